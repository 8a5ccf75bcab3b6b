"""Dense complex tensor kernel: outer-product sums, unfoldings, Khatri-Rao
products and index reshuffles shared by the whole package.

Linearization convention: whenever modes are merged or a tensor is flattened,
the first-listed mode varies fastest (Fortran order). Every function below
honors this convention, which is what makes the mode-1 unfolding of a CP
model equal ``G @ khatri_rao(P, H).T`` without any permutation fixups.
"""

import numpy as np


def rank1_sum(factors, shape):
    """Sum of rank-1 outer products.

    factors : sequence of tuples, one tuple per rank-1 term, each tuple
        holding one 1-D vector per mode.
    shape : expected tensor shape; every vector length is checked against it.
    """
    shape = tuple(int(s) for s in shape)
    out = np.zeros(shape, dtype=complex)
    for term in factors:
        if len(term) != len(shape):
            raise ValueError(
                f"rank-1 term has {len(term)} vectors, tensor has {len(shape)} modes"
            )
        vecs = [np.asarray(v, dtype=complex).ravel() for v in term]
        for m, v in enumerate(vecs):
            if v.shape[0] != shape[m]:
                raise ValueError(
                    f"mode {m} vector has length {v.shape[0]}, expected {shape[m]}"
                )
        acc = vecs[0]
        for v in vecs[1:]:
            acc = np.multiply.outer(acc, v)
        out += acc
    return out


def unfold(t, mode):
    """Mode-n unfolding: rows index the given mode, remaining modes are
    merged into columns with the first-listed remaining mode fastest."""
    t = np.asarray(t)
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for order-{t.ndim} tensor")
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order="F")


def unfold_mode1(t):
    """Mode-1 unfolding of an order-3 tensor: I1 x (I2*I3), mode-2 fastest
    along columns, so a CP tensor unfolds to G @ khatri_rao(P, H).T."""
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError(f"expected an order-3 tensor, got order {t.ndim}")
    return unfold(t, 0)


def khatri_rao(a, b):
    """Column-wise Kronecker product; column r is kron(a[:, r], b[:, r])
    with the b entries varying fastest."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("khatri_rao expects two matrices")
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"column count mismatch: {a.shape[1]} vs {b.shape[1]}"
        )
    i, r = a.shape
    j = b.shape[0]
    return (a[:, None, :] * b[None, :, :]).reshape(i * j, r)


def _check_partition(groups, order):
    flat = [m for g in groups for m in g]
    if sorted(flat) != list(range(order)):
        raise ValueError(
            f"groups {groups} are not an ordered partition of modes 0..{order - 1}"
        )


def merge_modes(t, groups):
    """Merge groups of modes into single modes.

    groups : ordered partition of the axis indices, e.g. [[0, 2], [1, 3], [4]].
        Within each group the first-listed mode varies fastest in the merged
        index. Entry values are preserved under the index bijection.
    """
    t = np.asarray(t)
    _check_partition(groups, t.ndim)
    perm = [m for g in groups for m in g]
    merged_shape = tuple(
        int(np.prod([t.shape[m] for m in g], dtype=np.int64)) for g in groups
    )
    return np.transpose(t, perm).reshape(merged_shape, order="F")


def split_modes(t, groups, original_shape):
    """Inverse of merge_modes given the recorded groups and original shape."""
    t = np.asarray(t)
    original_shape = tuple(int(s) for s in original_shape)
    _check_partition(groups, len(original_shape))
    if t.ndim != len(groups):
        raise ValueError("merged tensor order does not match group count")
    perm = [m for g in groups for m in g]
    permuted_shape = tuple(original_shape[m] for m in perm)
    expanded = t.reshape(permuted_shape, order="F")
    return np.transpose(expanded, np.argsort(perm))


def reverse_conjugate(t):
    """Flip every mode and conjugate: out[i...] = conj(t[I-1-i, ...]).
    An involution."""
    return np.conj(np.flip(np.asarray(t)))


def hadamard(a, b):
    """Entrywise product of two same-shaped tensors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a * b
