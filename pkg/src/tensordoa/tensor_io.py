"""On-disk container for tensors, masks and factor matrices: a JSON header
followed by raw little-endian payloads.

Layout:
  bytes 0..7    magic b"TDTENS1\\n"
  bytes 8..11   uint32 (LE) byte length of the JSON header
  header        UTF-8 JSON: {"arrays": [{"name", "kind", "shape"}...],
                             "meta": {...}}
  payload       the arrays in header order, each linearized with the FIRST
                mode varying fastest; kind "complex128" stores interleaved
                re/im float64 pairs, "float64" plain doubles, "uint8" raw
                bytes. All little-endian.
"""

import json
import struct

import numpy as np

from .pipeline import SubarrayConfig, TargetTensorPair

MAGIC = b"TDTENS1\n"

_KINDS = {
    "complex128": "<c16",
    "float64": "<f8",
    "uint8": "u1",
}


class FormatError(ValueError):
    """Malformed container file; maps to exit code 2 in the CLI."""


def write_container(path, arrays, meta=None):
    """arrays: ordered mapping name -> ndarray (complex128/float64/uint8)."""
    entries = []
    payloads = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if np.iscomplexobj(arr):
            kind = "complex128"
        elif arr.dtype == np.uint8 or arr.dtype == bool:
            kind = "uint8"
            arr = arr.astype(np.uint8)
        else:
            kind = "float64"
            arr = arr.astype(np.float64)
        entries.append({"name": name, "kind": kind, "shape": list(arr.shape)})
        payloads.append(np.ravel(arr, order="F").astype(_KINDS[kind]).tobytes())
    header = json.dumps(
        {"arrays": entries, "meta": {} if meta is None else meta},
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in payloads:
            fh.write(blob)


def read_container(path):
    """Returns (arrays dict in header order, meta dict). Raises FormatError
    on anything malformed."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if len(blob) < len(MAGIC) + 4 or blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic, not a tensor container")
    (header_len,) = struct.unpack("<I", blob[len(MAGIC) : len(MAGIC) + 4])
    start = len(MAGIC) + 4
    if start + header_len > len(blob):
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(blob[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt header: {exc}") from exc
    if not isinstance(header, dict) or "arrays" not in header:
        raise FormatError(f"{path}: header missing 'arrays'")

    arrays = {}
    offset = start + header_len
    for entry in header["arrays"]:
        try:
            name = entry["name"]
            kind = entry["kind"]
            shape = tuple(int(s) for s in entry["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: malformed array entry: {exc}") from exc
        if kind not in _KINDS:
            raise FormatError(f"{path}: unknown array kind '{kind}'")
        dtype = np.dtype(_KINDS[kind])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(blob):
            raise FormatError(f"{path}: truncated payload for array '{name}'")
        flat = np.frombuffer(blob[offset : offset + nbytes], dtype=dtype)
        arrays[name] = flat.reshape(shape, order="F").copy()
        offset += nbytes
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes")
    meta = header.get("meta", {})
    if not isinstance(meta, dict):
        raise FormatError(f"{path}: meta must be a mapping")
    return arrays, meta


def save_target_pair(path, pair):
    meta = {
        "content": "target_pair",
        "elements": pair.config.m_elements,
        "subarray_x": pair.config.l_x,
        "subarray_z": pair.config.l_z,
        "missing_fraction": pair.missing_fraction,
    }
    write_container(path, {"t_obs": pair.t_obs, "mask": pair.mask}, meta)


def load_target_pair(path):
    arrays, meta = read_container(path)
    for key in ("t_obs", "mask"):
        if key not in arrays:
            raise FormatError(f"{path}: missing array '{key}'")
    for key in ("elements", "subarray_x", "subarray_z"):
        if key not in meta:
            raise FormatError(f"{path}: meta missing '{key}'")
    try:
        cfg = SubarrayConfig(
            m_elements=int(meta["elements"]),
            l_x=int(meta["subarray_x"]),
            l_z=int(meta["subarray_z"]),
        )
    except ValueError as exc:
        raise FormatError(f"{path}: inconsistent subarray meta: {exc}") from exc
    t_obs = arrays["t_obs"]
    mask = arrays["mask"].astype(bool)
    if t_obs.shape != cfg.target_shape:
        raise FormatError(
            f"{path}: tensor shape {t_obs.shape} does not match config {cfg.target_shape}"
        )
    if mask.shape != t_obs.shape:
        raise FormatError(f"{path}: mask shape {mask.shape} != tensor shape")
    return TargetTensorPair(
        t_obs=t_obs,
        mask=mask,
        config=cfg,
        missing_fraction=float(1.0 - mask.mean()),
    )


def save_cp_model(path, model, meta=None):
    base = {"content": "cp_model", "rank": model.rank}
    if meta:
        base.update(meta)
    write_container(path, {"g": model.g, "h": model.h, "p": model.p}, base)


def load_cp_model(path):
    from .cp_als import CPModel

    arrays, meta = read_container(path)
    for key in ("g", "h", "p"):
        if key not in arrays:
            raise FormatError(f"{path}: missing factor '{key}'")
    try:
        model = CPModel(g=arrays["g"], h=arrays["h"], p=arrays["p"])
    except ValueError as exc:
        raise FormatError(f"{path}: inconsistent factors: {exc}") from exc
    return model, meta
