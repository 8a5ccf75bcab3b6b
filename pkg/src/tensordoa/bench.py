"""Trial runner and Monte Carlo harness: single scatter runs, (SNR x fault
count) sweeps with deterministic per-trial seeding, tensor-completion runs on
serialized inputs, and mask inspection reports.

Seeding: every random ingredient of a trial (fault placement, waveforms and
noise, solver restarts) draws from a SeedSequence keyed by (master seed,
stream tag, fault-cell index, trial index). The SNR index is deliberately
left out of the key, so an SNR sweep sees identical fault draws and identical
unit-variance noise/waveform realizations per trial with only the noise scale
changing -- a paired design that makes RMSE-vs-SNR trends meaningful at small
trial counts. Results are aggregated in (cell, trial) order, so output bytes
do not depend on worker count or scheduling.
"""

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .array_sim import ArrayGeometry, FaultMask, generate_snapshots, random_fault_mask
from .cp_als import als_solve
from .doa import estimate_from_tensor, match_and_score
from .pipeline import BlindDetector, OracleDetector, build_target
from .scenario import ConfigError, FaultSpec
from . import tensor_io

_TAG_FAULT, _TAG_DATA, _TAG_SOLVER = 1, 2, 3


def derive_seed(master_seed, tag, fault_idx, trial):
    """Deterministic per-trial stream seed; independent of scheduling."""
    ss = np.random.SeedSequence((int(master_seed), int(tag), int(fault_idx), int(trial)))
    return int(ss.generate_state(1)[0])


@dataclass
class TrialRecord:
    trial_index: int
    seed: int
    snr_db: float
    faults_total: int
    missing_fraction: float
    theta_errors_deg: list
    phi_errors_deg: list
    rmse_deg: float
    iterations: int
    converged: bool
    wall_time_s: float


@dataclass
class CellResult:
    snr_db: float
    faults_total: int
    trials: int
    rmse_deg: float
    median_rmse_deg: float
    convergence_rate: float
    mean_missing_fraction: float


def _fault_mask_for(scenario, fault_idx, trial):
    faults = scenario.faults
    m = scenario.m_elements
    if faults.kind == "none":
        return FaultMask.full(m)
    if faults.kind == "explicit":
        return FaultMask.from_dead(m, faults.dead_x, faults.dead_z)
    seed = derive_seed(scenario.seed, _TAG_FAULT, fault_idx, trial)
    if faults.kind == "random":
        return random_fault_mask(m, faults.count_x, faults.count_z, seed)
    total = faults.totals[fault_idx]
    n_x, n_z = FaultSpec.split_total(total)
    return random_fault_mask(m, n_x, n_z, seed)


def run_trial(scenario, snr_idx=0, fault_idx=0, trial=0):
    """One full trial: simulate, build the masked target, solve, score."""
    start = time.perf_counter()
    snr_db = scenario.snr_values()[snr_idx]
    fault_mask = _fault_mask_for(scenario, fault_idx, trial)
    data_seed = derive_seed(scenario.seed, _TAG_DATA, fault_idx, trial)
    snapshots = generate_snapshots(
        ArrayGeometry(scenario.m_elements),
        scenario.sources,
        scenario.snapshots,
        snr_db,
        mask=fault_mask,
        seed=data_seed,
    )
    if scenario.detector.kind == "blind":
        detector = BlindDetector(scenario.detector.gamma, scenario.detector.epsilon)
    else:
        detector = OracleDetector(fault_mask)
    pair = build_target(snapshots, scenario.subarray_config(), detector)

    solver_seed = derive_seed(scenario.seed, _TAG_SOLVER, fault_idx, trial)
    result = estimate_from_tensor(
        pair, scenario.solver.options(seed=solver_seed), truth=scenario.sources
    )
    record = TrialRecord(
        trial_index=trial,
        seed=data_seed,
        snr_db=snr_db,
        faults_total=len(fault_mask.dead_x) + len(fault_mask.dead_z),
        missing_fraction=pair.missing_fraction,
        theta_errors_deg=list(result.scored.theta_errors_deg),
        phi_errors_deg=list(result.scored.phi_errors_deg),
        rmse_deg=result.scored.rmse_deg,
        iterations=result.report.iterations,
        converged=result.report.converged,
        wall_time_s=time.perf_counter() - start,
    )
    return record, result


def run_single(scenario):
    """Single-trial run for scatter plots: returns the trial record plus one
    (truth, estimate) row per source, matched by the scoring assignment."""
    if scenario.trials != 1:
        raise ConfigError("run_single requires trials=1")
    if scenario.is_sweep():
        raise ConfigError("run_single requires a single-cell scenario (no sweeps)")
    record, result = run_trial(scenario, 0, 0, 0)
    perm = result.scored.permutation
    rows = []
    for j, src in enumerate(scenario.sources):
        est = result.estimates[perm[j]]
        rows.append(
            {
                "source": j,
                "azimuth_true_deg": src.azimuth_phi_deg,
                "elevation_true_deg": src.elevation_theta_deg,
                "azimuth_est_deg": est.azimuth_phi_deg,
                "elevation_est_deg": est.elevation_theta_deg,
            }
        )
    return record, rows


def _trial_task(args):
    scenario, snr_idx, fault_idx, trial = args
    record, _ = run_trial(scenario, snr_idx, fault_idx, trial)
    return (snr_idx, fault_idx, trial, record)


def _aggregate_cell(snr_db, faults_total, records):
    mses = np.array([r.rmse_deg**2 for r in records])
    return CellResult(
        snr_db=float(snr_db),
        faults_total=int(faults_total),
        trials=len(records),
        rmse_deg=float(np.sqrt(mses.mean())),
        median_rmse_deg=float(np.median([r.rmse_deg for r in records])),
        convergence_rate=float(np.mean([r.converged for r in records])),
        mean_missing_fraction=float(np.mean([r.missing_fraction for r in records])),
    )


def run_monte_carlo(scenario, workers=1, out_path=None):
    """Sweep (SNR x fault cells) x trials; returns one CellResult per cell.

    Per-trial seeds are fully determined by the scenario, so any worker count
    produces byte-identical output. If a trial fails, the cells completed so
    far are flushed to out_path before the error propagates.
    """
    snrs = scenario.snr_values()
    fault_cells = scenario.faults.cells()
    tasks = [
        (scenario, si, fi, t)
        for si in range(len(snrs))
        for fi in range(len(fault_cells))
        for t in range(scenario.trials)
    ]
    results = {}
    failure = None
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for snr_idx, fault_idx, trial, record in pool.map(
                    _trial_task, tasks, chunksize=4
                ):
                    results[(snr_idx, fault_idx, trial)] = record
        else:
            for task in tasks:
                snr_idx, fault_idx, trial, record = _trial_task(task)
                results[(snr_idx, fault_idx, trial)] = record
    except Exception as exc:  # noqa: BLE001 - re-raised after flushing
        failure = exc

    cells = []
    for si in range(len(snrs)):
        for fi in range(len(fault_cells)):
            records = [
                results[(si, fi, t)]
                for t in range(scenario.trials)
                if (si, fi, t) in results
            ]
            if len(records) != scenario.trials:
                continue
            faults_total = records[0].faults_total
            cells.append(_aggregate_cell(snrs[si], faults_total, records))
    if out_path is not None and (cells or failure is None):
        write_results_csv(out_path, cells, scenario.hash())
    if failure is not None:
        raise failure
    return cells


# -- CSV schema ------------------------------------------------------------

RESULTS_FIELDS = (
    "snr_db",
    "faults_total",
    "trials",
    "rmse_deg",
    "median_rmse_deg",
    "convergence_rate",
    "mean_missing_fraction",
)

SCATTER_FIELDS = (
    "source",
    "azimuth_true_deg",
    "elevation_true_deg",
    "azimuth_est_deg",
    "elevation_est_deg",
)


def _format_value(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, comment, fieldnames, rows):
    buf = io.StringIO()
    buf.write(comment + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fieldnames)
    for row in rows:
        writer.writerow([_format_value(row[k]) for k in fieldnames])
    data = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
    return data


def write_results_csv(path, cells, scenario_hash):
    rows = [asdict(c) for c in cells]
    return _write_csv(
        path, f"# tensordoa monte-carlo v1 scenario={scenario_hash}", RESULTS_FIELDS, rows
    )


def read_results_csv(path):
    """Parse a monte-carlo results CSV back into (cells, scenario_hash)."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("#"):
            raise ConfigError(f"{path}: missing header comment")
        scenario_hash = first.split("scenario=")[-1] if "scenario=" in first else ""
        reader = csv.DictReader(fh)
        cells = []
        for row in reader:
            cells.append(
                CellResult(
                    snr_db=float(row["snr_db"]),
                    faults_total=int(row["faults_total"]),
                    trials=int(row["trials"]),
                    rmse_deg=float(row["rmse_deg"]),
                    median_rmse_deg=float(row["median_rmse_deg"]),
                    convergence_rate=float(row["convergence_rate"]),
                    mean_missing_fraction=float(row["mean_missing_fraction"]),
                )
            )
    return cells, scenario_hash


def write_scatter_csv(path, rows, scenario_hash):
    return _write_csv(
        path, f"# tensordoa scatter v1 scenario={scenario_hash}", SCATTER_FIELDS, rows
    )


# -- standalone completion of serialized tensors ----------------------------


def complete_tensor(input_path, opts, out_dir):
    """Load a serialized target pair, solve the masked decomposition, write
    the reconstructed tensor, the factor matrices and a JSON report."""
    import os

    pair = tensor_io.load_target_pair(input_path)
    model, report = als_solve(pair.t_obs, pair.mask, opts)
    os.makedirs(out_dir, exist_ok=True)
    recon_path = os.path.join(out_dir, "recovered.tdt")
    factors_path = os.path.join(out_dir, "factors.tdt")
    report_path = os.path.join(out_dir, "report.json")
    tensor_io.write_container(
        recon_path,
        {"t_hat": model.to_tensor()},
        {"content": "recovered_tensor", "source": str(input_path)},
    )
    tensor_io.save_cp_model(
        factors_path,
        model,
        {
            "residual": report.residual,
            "converged": report.converged,
            "iterations": report.iterations,
        },
    )
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(asdict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return model, report, {"recovered": recon_path, "factors": factors_path, "report": report_path}


# -- mask inspection ---------------------------------------------------------


@dataclass
class MaskReport:
    missing_fraction: float
    fiber_histograms: dict
    confusion: dict | None = None

    def to_text(self):
        lines = [f"missing fraction: {self.missing_fraction:.4f}"]
        for mode, hist in self.fiber_histograms.items():
            lines.append(
                f"mode-{mode} fibers: {hist['intact']} intact, "
                f"{hist['partial']} partial, {hist['lost']} fully lost"
            )
        if self.confusion is not None:
            c = self.confusion
            lines.append(
                "blind vs oracle: "
                f"agree_reliable={c['agree_reliable']} agree_missing={c['agree_missing']} "
                f"blind_only_missing={c['blind_only_missing']} "
                f"oracle_only_missing={c['oracle_only_missing']}"
            )
        return "\n".join(lines)


def fiber_histograms(mask):
    """Per-mode counts of intact / partially lost / fully lost fibers."""
    mask = np.asarray(mask, dtype=bool)
    out = {}
    for mode in range(mask.ndim):
        length = mask.shape[mode]
        observed = np.moveaxis(mask, mode, 0).reshape(length, -1).sum(axis=0)
        out[mode + 1] = {
            "intact": int((observed == length).sum()),
            "partial": int(((observed > 0) & (observed < length)).sum()),
            "lost": int((observed == 0).sum()),
        }
    return out


def mask_confusion(blind_mask, oracle_mask):
    """Entry counts comparing a blind mask against the structural oracle."""
    blind = np.asarray(blind_mask, dtype=bool)
    oracle = np.asarray(oracle_mask, dtype=bool)
    return {
        "agree_reliable": int((blind & oracle).sum()),
        "agree_missing": int((~blind & ~oracle).sum()),
        "blind_only_missing": int((~blind & oracle).sum()),
        "oracle_only_missing": int((blind & ~oracle).sum()),
    }


def inspect_mask_from_pair(pair, confusion=None):
    return MaskReport(
        missing_fraction=pair.missing_fraction,
        fiber_histograms=fiber_histograms(pair.mask),
        confusion=confusion,
    )


def inspect_mask_from_scenario(scenario):
    """Build trial 0's target pair and report its mask. The true fault mask
    is always known here, so the report also compares a freshly computed
    blind mask against the structural oracle."""
    if scenario.is_sweep():
        raise ConfigError("inspect-mask requires a single-cell scenario (no sweeps)")
    from .pipeline import detect_mask, propagate_fault_mask

    fault_mask = _fault_mask_for(scenario, 0, 0)
    data_seed = derive_seed(scenario.seed, _TAG_DATA, 0, 0)
    snapshots = generate_snapshots(
        ArrayGeometry(scenario.m_elements),
        scenario.sources,
        scenario.snapshots,
        scenario.snr_values()[0],
        mask=fault_mask,
        seed=data_seed,
    )
    cfg = scenario.subarray_config()
    if scenario.detector.kind == "blind":
        detector = BlindDetector(scenario.detector.gamma, scenario.detector.epsilon)
    else:
        detector = OracleDetector(fault_mask)
    pair = build_target(snapshots, cfg, detector)
    blind = detect_mask(pair.t_obs, scenario.detector.gamma, scenario.detector.epsilon)
    oracle = propagate_fault_mask(fault_mask, cfg)
    return inspect_mask_from_pair(pair, confusion=mask_confusion(blind, oracle))
