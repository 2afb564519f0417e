"""Simulation study: activity-pair cases, config resolution and per-case runs."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .activity import DAY, SHIFT_STEP, activity_from_config
from .em import FitConfig, fit, initialize_from_emissions
from .exceptions import ConfigError
from .metrics import baseline_epsilon, baseline_tau, error_epsilon, error_tau
from .model import ActivityProfile, ModelParams, ModelSpec, SupportMask, check_feasible
from .simulate import simulate

log = logging.getLogger(__name__)

WEEK = 7

# (f_j, g_j) per case
CASES: dict[str, tuple[str, str]] = {
    "a": ("1", "c"),
    "b": ("1", "r1"),
    "c": ("1", "1"),
    "d": ("r1", "r1"),
    "e": ("c", "c"),
    "f": ("r2", "1"),
    "g": ("r1", "1"),
    "h": ("c", "1"),
}

STUDY_TAU = [
    [0.0, 0.298244, 0.0621274],
    [0.134788, 0.0, 0.3710750],
    [0.383490, 0.182008, 0.0],
]
STUDY_EPSILON_DIAG = [0.770347, 0.579213, 0.0821789]


def study_truth() -> ModelParams:
    """Three-state truth with state-revealing emissions and a uniform start."""
    return ModelParams(np.full(3, 1.0 / 3.0), STUDY_TAU, np.diag(STUDY_EPSILON_DIAG))


CSV_HEADER = ["iteration", "err_tau", "err_eps", "loglik"]


@dataclass
class ExperimentConfig:
    n_states: int = 3
    n_symbols: int = 3
    weeks: int = 200
    horizon: int | None = None
    period: int = DAY
    shift_step: int = SHIFT_STEP
    case: str | None = "c"
    f: Any = None
    g: Any = None
    truth: dict | None = None
    truth_file: str | None = None
    emission_support: str = "diagonal"
    seed: int = 1
    fit: dict = field(default_factory=lambda: {"max_iters": 50, "early_stop": False})
    baseline_samples: int = 1000
    aggregate: str = "sum"
    cases: list[str] = field(default_factory=lambda: list(CASES))
    output_dir: str = "out"
    workers: int = 1
    base_dir: str | None = None

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        if base_dir is not None and cfg.base_dir is None:
            cfg.base_dir = str(base_dir)
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d, base_dir=path.parent)

    def check(self) -> None:
        if self.case is not None and self.case not in CASES:
            raise ConfigError(f"unknown case {self.case!r}; expected one of {sorted(CASES)}")
        bad = [c for c in self.cases if c not in CASES]
        if bad:
            raise ConfigError(f"unknown cases {bad}")
        if self.emission_support not in ("diagonal", "full"):
            raise ConfigError("emission_support must be 'diagonal' or 'full'")
        if self.aggregate not in ("sum", "mean"):
            raise ConfigError("aggregate must be 'sum' or 'mean'")
        if self.baseline_samples < 1:
            raise ConfigError("baseline_samples must be >= 1")
        if self.resolved_horizon() < 2:
            raise ConfigError("horizon must be at least 2")

    def resolved_horizon(self) -> int:
        return int(self.horizon) if self.horizon is not None else int(self.period * WEEK * self.weeks)

    def for_case(self, case: str) -> "ExperimentConfig":
        d = asdict(self)
        d.update(case=case, f=None, g=None)
        return ExperimentConfig(**d)

    def fit_config(self) -> FitConfig:
        opts = dict(self.fit)
        opts.setdefault("record_history", True)
        return FitConfig(**opts)

    def activity_entries(self) -> tuple[Any, Any]:
        if self.f is not None or self.g is not None:
            if self.f is None or self.g is None:
                raise ConfigError("custom activity needs both f and g")
            return self.f, self.g
        if self.case is None:
            raise ConfigError("config needs either a case or custom f/g")
        return CASES[self.case]

    def build_spec(self) -> ModelSpec:
        T = self.resolved_horizon()
        f_cfg, g_cfg = self.activity_entries()
        base = Path(self.base_dir) if self.base_dir else None
        kw = dict(horizon=T, base_dir=base, period=self.period, step=self.shift_step)
        f = np.vstack([activity_from_config(f_cfg, j, **kw) for j in range(self.n_states)])
        g = np.vstack([activity_from_config(g_cfg, j, **kw) for j in range(self.n_states)])
        if self.emission_support == "diagonal":
            if self.n_symbols != self.n_states:
                raise ConfigError("diagonal emission support needs n_symbols == n_states")
            mask = SupportMask.diagonal_emissions(self.n_states)
        else:
            mask = None
        return ModelSpec(self.n_states, self.n_symbols, T, ActivityProfile(f, g), mask)

    def build_truth(self) -> ModelParams | None:
        if self.truth is not None:
            return ModelParams.from_dict(self.truth)
        if self.truth_file is not None:
            path = Path(self.truth_file)
            if self.base_dir and not path.is_absolute():
                path = Path(self.base_dir) / path
            try:
                return ModelParams.load(path)
            except (OSError, KeyError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read truth params {path}: {exc}") from exc
        if self.n_states == 3 and self.n_symbols == 3:
            return study_truth()
        return None


def case_seed(seed: int, case: str) -> int:
    """Stable per-case seed so cases can run in any order or in parallel."""
    return int(np.random.SeedSequence([int(seed), ord(case)]).generate_state(1, np.uint64)[0])


@dataclass
class RunRecord:
    config: dict
    loglik: list[float]
    err_tau: list[float] | None
    err_eps: list[float] | None
    baselines: dict | None
    final_params: dict
    iteration_seconds: list[float]
    seconds: dict
    converged: bool

    @property
    def iterations_run(self) -> int:
        return len(self.loglik)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["iterations_run"] = self.iterations_run
        return d

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        with_err = self.err_tau is not None
        writer.writerow(CSV_HEADER if with_err else ["iteration", "loglik"])
        for k, ll in enumerate(self.loglik):
            row = [k + 1]
            if with_err:
                row += [repr(self.err_tau[k]), repr(self.err_eps[k])]
            writer.writerow(row + [repr(ll)])
        return buf.getvalue()

    def write(self, out_dir: Path) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "errors.csv").write_text(self.csv_text())
        (out_dir / "record.json").write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def compute_baselines(spec: ModelSpec, truth: ModelParams, n_samples: int, seed: int) -> dict:
    bt = baseline_tau(spec, truth, n_samples, seed)
    be = baseline_epsilon(spec, truth, n_samples, seed + 1)
    return {"tau": bt.to_dict(), "epsilon": be.to_dict()}


def fit_sequence(
    cfg: ExperimentConfig, spec: ModelSpec, y: np.ndarray, truth: ModelParams | None, baselines: dict | None = None
) -> RunRecord:
    t0 = time.perf_counter()
    init = initialize_from_emissions(spec, y)
    t1 = time.perf_counter()
    result = fit(spec, y, init, cfg.fit_config())
    t2 = time.perf_counter()
    iterates = result.history[1:]
    err_tau = err_eps = None
    if truth is not None:
        err_tau = [error_tau(spec, truth, p, cfg.aggregate) for p in iterates]
        err_eps = [error_epsilon(spec, truth, p, cfg.aggregate) for p in iterates]
    return RunRecord(
        config=config_echo(cfg),
        loglik=result.loglik_trace[1:],
        err_tau=err_tau,
        err_eps=err_eps,
        baselines=baselines,
        final_params=result.params.to_dict(),
        iteration_seconds=result.iteration_seconds,
        seconds={"initialize": t1 - t0, "fit": t2 - t1},
        converged=result.converged,
    )


def config_echo(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["horizon"] = cfg.resolved_horizon()
    return d


def run_case(cfg: ExperimentConfig, case: str, with_baselines: bool = True) -> RunRecord:
    """Simulate, initialize, fit and score one case of the study."""
    ccfg = cfg.for_case(case)
    spec = ccfg.build_spec()
    truth = ccfg.build_truth()
    if truth is None:
        raise ConfigError("the study needs truth parameters")
    check_feasible(spec, truth)
    seed = case_seed(cfg.seed, case)
    t0 = time.perf_counter()
    _, y = simulate(spec, truth, seed)
    sim_seconds = time.perf_counter() - t0
    baselines = compute_baselines(spec, truth, cfg.baseline_samples, seed) if with_baselines else None
    record = fit_sequence(ccfg, spec, y, truth, baselines)
    record.seconds["simulate"] = sim_seconds
    return record


def _run_case_safe(args):
    cfg, case = args
    try:
        return case, run_case(cfg, case), None
    except Exception as exc:  # isolate per-case failures
        log.exception("case %s failed", case)
        return case, None, {"error": type(exc).__name__, "message": str(exc)}


def run_experiment(cfg: ExperimentConfig, out_dir: Path | None = None) -> dict:
    """Run every configured case; write per-case artifacts and a summary."""
    out_dir = Path(out_dir or cfg.output_dir)
    jobs = [(cfg, c) for c in cfg.cases]
    if cfg.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_case_safe, jobs))
    else:
        results = [_run_case_safe(j) for j in jobs]

    summary = {"cases": {}, "failures": {}}
    for case, record, err in results:
        if err is not None:
            summary["failures"][case] = err
            continue
        record.write(out_dir / f"case_{case}")
        agg = cfg.aggregate
        summary["cases"][case] = {
            "final_err_tau": record.err_tau[-1],
            "final_err_eps": record.err_eps[-1],
            "baseline_tau": record.baselines["tau"][agg],
            "baseline_eps": record.baselines["epsilon"][agg],
            "final_loglik": record.loglik[-1],
            "iterations": record.iterations_run,
            "seconds": record.seconds,
        }
    done = summary["cases"]
    summary["order_tau"] = sorted(done, key=lambda c: done[c]["final_err_tau"], reverse=True)
    summary["order_eps"] = sorted(done, key=lambda c: done[c]["final_err_eps"], reverse=True)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case", "final_err_tau", "baseline_tau", "final_err_eps", "baseline_eps", "final_loglik"])
        for c in sorted(done):
            r = done[c]
            w.writerow([c, r["final_err_tau"], r["baseline_tau"], r["final_err_eps"], r["baseline_eps"], r["final_loglik"]])
    return summary
