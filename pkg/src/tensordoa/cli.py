"""Command-line interface: simulate | monte-carlo | complete | inspect-mask.

Exit codes: 0 success, 2 configuration or input-file error, 3 internal
numerical failure.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import bench, tensor_io
from .cp_als import SolverOptions
from .doa import ExtractionError
from .scenario import ConfigError, Scenario, preset, preset_names


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tensordoa",
        description=(
            "2D DOA estimation for L-shaped arrays with failed sensors via "
            "masked CP tensor completion"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario_flags(p):
        p.add_argument("--config", help="scenario YAML file")
        p.add_argument(
            "--preset", help=f"named scenario preset ({', '.join(preset_names())})"
        )
        p.add_argument("--seed", type=int, help="override master seed")
        p.add_argument("--trials", type=int, help="override trial count")
        p.add_argument("--out", help="output directory")

    p_sim = sub.add_parser("simulate", help="single trial; writes scatter CSV and record")
    add_scenario_flags(p_sim)

    p_mc = sub.add_parser("monte-carlo", help="SNR x fault sweep; writes results CSV")
    add_scenario_flags(p_mc)
    p_mc.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    p_comp = sub.add_parser("complete", help="complete a serialized masked tensor")
    p_comp.add_argument("input", help="target-pair container file")
    p_comp.add_argument("--rank", type=int, required=True)
    p_comp.add_argument("--max-iters", type=int, default=500)
    p_comp.add_argument("--tol", type=float, default=1e-8)
    p_comp.add_argument("--ridge", type=float, default=None, help="default: auto")
    p_comp.add_argument("--restarts", type=int, default=3)
    p_comp.add_argument("--seed", type=int, default=0)
    p_comp.add_argument("--out", default=".", help="output directory")

    p_insp = sub.add_parser("inspect-mask", help="mask statistics for a scenario or file")
    add_scenario_flags(p_insp)
    p_insp.add_argument("--input", help="target-pair container file")
    return parser


def _load_scenario(args):
    if getattr(args, "config", None) and getattr(args, "preset", None):
        raise ConfigError("give either --config or --preset, not both")
    if getattr(args, "config", None):
        scenario = Scenario.from_file(args.config)
    elif getattr(args, "preset", None):
        scenario = preset(args.preset)
    else:
        raise ConfigError("a scenario is required: pass --config or --preset")
    return scenario.with_overrides(
        seed=args.seed, trials=args.trials, output_dir=args.out
    )


def _out_dir(scenario):
    out = scenario.output_dir or "."
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_simulate(args):
    scenario = _load_scenario(args).with_overrides(trials=1)
    record, rows = bench.run_single(scenario)
    out = _out_dir(scenario)
    scatter_path = os.path.join(out, "scatter.csv")
    record_path = os.path.join(out, "record.json")
    bench.write_scatter_csv(scatter_path, rows, scenario.hash())
    with open(record_path, "w", encoding="utf-8") as fh:
        json.dump(asdict(record), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"missing fraction: {record.missing_fraction:.4f}")
    print(f"RMSE: {record.rmse_deg:.4f} deg ({record.iterations} sweeps, "
          f"converged={record.converged})")
    for row in rows:
        print(
            f"source {row['source']}: true (az={row['azimuth_true_deg']:.2f}, "
            f"el={row['elevation_true_deg']:.2f}) -> est "
            f"(az={row['azimuth_est_deg']:.2f}, el={row['elevation_est_deg']:.2f})"
        )
    print(f"wrote {scatter_path} and {record_path}")
    return 0


def _cmd_monte_carlo(args):
    scenario = _load_scenario(args)
    out = _out_dir(scenario)
    results_path = os.path.join(out, "results.csv")
    cells = bench.run_monte_carlo(scenario, workers=args.workers, out_path=results_path)
    print("snr_db  faults  trials  rmse_deg  median  conv  missing")
    for c in cells:
        print(
            f"{c.snr_db:6.1f}  {c.faults_total:6d}  {c.trials:6d}  "
            f"{c.rmse_deg:8.4f}  {c.median_rmse_deg:6.4f}  "
            f"{c.convergence_rate:4.2f}  {c.mean_missing_fraction:7.4f}"
        )
    print(f"wrote {results_path}")
    return 0


def _cmd_complete(args):
    opts = SolverOptions(
        rank=args.rank,
        max_iters=args.max_iters,
        rel_fit_tol=args.tol,
        ridge=args.ridge,
        restarts=args.restarts,
        seed=args.seed,
    )
    model, report, paths = bench.complete_tensor(args.input, opts, args.out)
    print(
        f"rank-{model.rank} completion: residual={report.residual:.6e} "
        f"converged={report.converged} sweeps={report.iterations}"
    )
    for label, path in paths.items():
        print(f"wrote {label}: {path}")
    return 0


def _cmd_inspect_mask(args):
    if args.input and (args.config or args.preset):
        raise ConfigError("give either --input or a scenario, not both")
    if args.input:
        pair = tensor_io.load_target_pair(args.input)
        report = bench.inspect_mask_from_pair(pair)
    else:
        scenario = _load_scenario(args)
        report = bench.inspect_mask_from_scenario(scenario)
    print(report.to_text())
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "monte-carlo": _cmd_monte_carlo,
    "complete": _cmd_complete,
    "inspect-mask": _cmd_inspect_mask,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, tensor_io.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ExtractionError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
