"""EM driver: initialization, E/M alternation and convergence bookkeeping."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InitializationError
from .inference import forward_backward
from .model import ModelParams, ModelSpec, check_feasible, validate_sequence
from .mstep import EmissionSufficientStats, TransitionSufficientStats, mstep, update_epsilon, update_tau

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 50
    loglik_rel_tol: float = 1e-9
    root_tol: float = 1e-12
    record_history: bool = False
    # False reproduces fixed-length runs (every iteration executed)
    early_stop: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (self.loglik_rel_tol > 0 and self.root_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class FitResult:
    params: ModelParams
    loglik_trace: list[float]
    iterations_run: int
    converged: bool
    history: list[ModelParams] | None = None
    iteration_seconds: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "params": self.params.to_dict(),
            "loglik_trace": list(self.loglik_trace),
            "iterations_run": self.iterations_run,
            "converged": self.converged,
            "iteration_seconds": list(self.iteration_seconds),
        }
        if self.history is not None:
            d["history"] = [p.to_dict() for p in self.history]
        return d


def fit(spec: ModelSpec, y, init: ModelParams, config: FitConfig | None = None) -> FitResult:
    """Run constrained EM from ``init``.

    ``loglik_trace[k]`` is ``log Pr(y)`` under the k-th iterate
    (``k = 0`` is ``init``), so the trace has ``iterations_run + 1`` entries.
    ``history`` holds the same iterates when requested.
    """
    config = config or FitConfig()
    y = validate_sequence(y, spec.n_symbols, spec.horizon)
    check_feasible(spec, init)
    params = init
    post = forward_backward(spec, params, y)
    trace = [post.log_likelihood]
    history = [params] if config.record_history else None
    seconds = []
    converged = False
    k = 0
    for k in range(1, config.max_iters + 1):
        t0 = time.perf_counter()
        params = mstep(spec, post, previous=params, tol=config.root_tol)
        post = forward_backward(spec, params, y)
        seconds.append(time.perf_counter() - t0)
        trace.append(post.log_likelihood)
        if history is not None:
            history.append(params)
        gain = trace[-1] - trace[-2]
        if gain < -1e-8 * max(1.0, abs(trace[-2])):
            log.warning("log-likelihood decreased by %.3g at iteration %d", -gain, k)
        if config.early_stop and abs(gain) < config.loglik_rel_tol * abs(trace[-2]):
            converged = True
            break
    return FitResult(params, trace, k, converged, history, seconds)


def interpolate_states(y, f: np.ndarray) -> np.ndarray:
    """Fill silent stretches of a state-revealing emission sequence.

    Symbol ``s`` identifies zero-based state ``s - 1``. Between a non-zero
    emission from ``j`` and the next one from ``i``, the path stays at ``j``
    up to and including the first time ``f_j`` peaks on the silent stretch,
    then switches to ``i``. Leading/trailing silence copies the
    nearest non-zero emission.
    """
    y = np.asarray(y)
    nz = np.flatnonzero(y)
    if nz.size == 0:
        raise InitializationError("emission sequence has no non-zero symbol")
    z = np.empty(y.shape[0], dtype=np.int64)
    states = y[nz] - 1
    z[: nz[0] + 1] = states[0]
    z[nz[-1] :] = states[-1]
    for k in range(nz.size - 1):
        p, q = nz[k], nz[k + 1]
        j, i = states[k], states[k + 1]
        z[p] = j
        if q == p + 1:
            continue
        t_peak = p + 1 + int(np.argmax(f[j, p + 1 : q]))
        z[p + 1 : t_peak + 1] = j
        z[t_peak + 1 : q] = i
    return z


def uniform_feasible(spec: ModelSpec) -> ModelParams:
    """Half-saturated parameters: every allowed entry set so each constraint has slack 1/2."""
    mask = spec.support
    act = spec.activity
    n, m = spec.n_states, spec.n_symbols
    tau = np.zeros((n, n))
    eps = np.zeros((m, n))
    for j in range(n):
        k = mask.allowed_transitions[:, j].sum()
        if k and act.f_star[j] > 0:
            tau[mask.allowed_transitions[:, j], j] = 1.0 / (2.0 * k * act.f_star[j])
        k = mask.allowed_emissions[:, j].sum()
        if k and act.g_star[j] > 0:
            eps[mask.allowed_emissions[:, j], j] = 1.0 / (2.0 * k * act.g_star[j])
    return ModelParams(np.full(n, 1.0 / n), tau, eps)


def initialize_from_emissions(spec: ModelSpec, y, tol: float = 1e-12) -> ModelParams:
    """Starting parameters from the interpolated state path.

    Applies to state-revealing emissions (``M == N``); other models get
    :func:`uniform_feasible`.
    """
    y = validate_sequence(y, spec.n_symbols, spec.horizon)
    fallback = uniform_feasible(spec)
    if spec.n_symbols != spec.n_states:
        log.info("emissions are not state-revealing; using uniform feasible start")
        return fallback
    z = interpolate_states(y, spec.activity.f)
    pi = np.bincount(z, minlength=spec.n_states) / z.shape[0]
    tstats = TransitionSufficientStats.from_path(z, spec.n_states)
    estats = EmissionSufficientStats.from_path(z, y, spec.n_states, spec.n_symbols)
    tau = update_tau(tstats, spec, previous=fallback.tau, tol=tol)
    eps = update_epsilon(estats, spec, previous=fallback.epsilon, tol=tol)
    return ModelParams(pi, tau, eps)
