"""Command-line entry point: ``activity-hmm {simulate,fit,baseline,experiment}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .exceptions import ActivityHMMError, ConfigError
from .experiment import ExperimentConfig, compute_baselines, fit_sequence, run_experiment
from .model import check_feasible
from .simulate import read_sequence, simulate, write_sequence


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.weeks is not None:
        cfg.weeks = args.weeks
        cfg.horizon = None
    if args.iters is not None:
        cfg.fit = {**cfg.fit, "max_iters": args.iters}
    if args.samples is not None:
        cfg.baseline_samples = args.samples
    if args.out is not None:
        cfg.output_dir = args.out
    if getattr(args, "case", None):
        cfg.case, cfg.f, cfg.g = args.case, None, None
    if getattr(args, "cases", None):
        cfg.cases = list(args.cases.replace(",", ""))
    if getattr(args, "workers", None):
        cfg.workers = args.workers
    cfg.check()
    return cfg


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    spec, truth = cfg.build_spec(), cfg.build_truth()
    if truth is None:
        raise ConfigError("simulate needs truth parameters")
    check_feasible(spec, truth)
    x, y = simulate(spec, truth, cfg.seed)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_sequence(out / "x.txt", x + 1)
    write_sequence(out / "y.txt", y)
    truth.save(out / "truth.json")
    counts = np.bincount(y, minlength=spec.n_symbols + 1)
    _emit(
        {
            "horizon": spec.horizon,
            "seed": cfg.seed,
            "symbol_frequencies": {str(s): float(c) / spec.horizon for s, c in enumerate(counts)},
            "files": [str(out / "x.txt"), str(out / "y.txt")],
        }
    )
    return 0


def cmd_fit(args) -> int:
    cfg = _load_config(args)
    spec = cfg.build_spec()
    y = read_sequence(args.y, spec.n_symbols)
    if y.shape[0] != spec.horizon:
        cfg.horizon = int(y.shape[0])
        spec = cfg.build_spec()
    truth = None
    if args.truth:
        cfg.truth_file, cfg.truth = str(Path(args.truth).resolve()), None
    if not args.no_truth:
        truth = cfg.build_truth()
    record = fit_sequence(cfg, spec, y, truth)
    out = Path(cfg.output_dir)
    record.write(out)
    summary = {"iterations_run": record.iterations_run, "final_loglik": record.loglik[-1], "out": str(out)}
    if truth is not None:
        summary.update(final_err_tau=record.err_tau[-1], final_err_eps=record.err_eps[-1])
    _emit(summary)
    return 0


def cmd_baseline(args) -> int:
    cfg = _load_config(args)
    spec, truth = cfg.build_spec(), cfg.build_truth()
    if truth is None:
        raise ConfigError("baseline needs truth parameters")
    result = compute_baselines(spec, truth, cfg.baseline_samples, cfg.seed)
    result["case"] = cfg.case
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "baselines.json").write_text(json.dumps(result, indent=2) + "\n")
    _emit(result)
    return 0


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    summary = run_experiment(cfg)
    _emit({k: summary[k] for k in ("order_tau", "order_eps", "failures")})
    return 1 if summary["failures"] else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="JSON experiment config")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=str, help="output directory")
    common.add_argument("--weeks", type=int, help="horizon in weeks of ten-minute bins")
    common.add_argument("--iters", type=int, help="EM iterations")
    common.add_argument("--samples", type=int, help="baseline Monte-Carlo samples")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="activity-hmm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="sample x.txt and y.txt")
    p.add_argument("--case", choices=list("abcdefgh"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="estimate parameters from an emission file")
    p.add_argument("y", type=str, help="newline-delimited emission symbols")
    p.add_argument("--case", choices=list("abcdefgh"))
    p.add_argument("--truth", type=str, help="truth params JSON for error columns")
    p.add_argument("--no-truth", action="store_true", help="skip error columns")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("baseline", parents=[common], help="random-parameter baseline errors")
    p.add_argument("--case", choices=list("abcdefgh"))
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("experiment", parents=[common], help="run the full case study")
    p.add_argument("--cases", type=str, help="subset, e.g. 'ace'")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except ActivityHMMError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
