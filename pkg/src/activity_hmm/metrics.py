"""Relative-entropy error functions and Monte-Carlo baselines."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError
from .model import ModelParams, ModelSpec, _emission_block, _transition_block

log = logging.getLogger(__name__)

AGGREGATIONS = ("sum", "mean")


def relative_entropy(p, q, axis: int = 0) -> np.ndarray | float:
    """``sum_i p_i log(p_i / q_i)`` along ``axis``, with 0 log(0/q) = 0 and +inf where q_i = 0 < p_i."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionError(f"distributions have shapes {p.shape} and {q.shape}")
    pos = p > 0.0
    with np.errstate(divide="ignore"):
        terms = np.where(pos, p * (np.log(np.where(pos, p, 1.0)) - np.log(np.where(pos, q, 1.0))), 0.0)
    terms = np.where(pos & (q <= 0.0), np.inf, terms)
    out = terms.sum(axis=axis)
    # rounding can push exact matches to -1e-17
    out = np.maximum(out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def averaged_relative_entropy(p_seq, q_seq) -> float:
    """Mean over time of per-step relative entropies; time is the first axis."""
    p_seq = np.asarray(p_seq, dtype=float)
    q_seq = np.asarray(q_seq, dtype=float)
    if p_seq.shape != q_seq.shape:
        raise DimensionError(f"sequences have shapes {p_seq.shape} and {q_seq.shape}")
    if p_seq.shape[0] < 1:
        raise DimensionError("need at least one time step")
    return float(np.mean(relative_entropy(p_seq, q_seq, axis=1)))


def _column_ares(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    # P, Q: (L, K, N) columns are distributions; returns per-column ARE (N,)
    return np.mean(relative_entropy(P, Q, axis=1), axis=0)


def _aggregate(per_state: np.ndarray, aggregate: str) -> float:
    if aggregate == "sum":
        return float(per_state.sum())
    if aggregate == "mean":
        return float(per_state.mean())
    raise ValueError(f"aggregate must be one of {AGGREGATIONS}")


def tau_state_errors(spec: ModelSpec, truth: ModelParams, estimate: ModelParams) -> np.ndarray:
    f = spec.activity.f[:, :-1]
    return _column_ares(_transition_block(f, truth.tau), _transition_block(f, estimate.tau))


def epsilon_state_errors(spec: ModelSpec, truth: ModelParams, estimate: ModelParams) -> np.ndarray:
    g = spec.activity.g
    return _column_ares(_emission_block(g, truth.epsilon), _emission_block(g, estimate.epsilon))


def error_tau(spec: ModelSpec, truth: ModelParams, estimate: ModelParams, aggregate: str = "sum") -> float:
    """Time-averaged RE between true and estimated transition columns, combined over source states."""
    return _aggregate(tau_state_errors(spec, truth, estimate), aggregate)


def error_epsilon(spec: ModelSpec, truth: ModelParams, estimate: ModelParams, aggregate: str = "sum") -> float:
    return _aggregate(epsilon_state_errors(spec, truth, estimate), aggregate)


# -- baselines ---------------------------------------------------------------


def _random_column(rng: np.random.Generator, allowed: np.ndarray, peak: float) -> np.ndarray:
    # i.i.d. U[0,1] on allowed entries, redrawn until peak * sum <= 1
    col = np.zeros(allowed.shape[0])
    k = int(allowed.sum())
    if k == 0:
        return col
    while True:
        draw = rng.random(k)
        if peak * draw.sum() <= 1.0:
            col[allowed] = draw
            return col


def random_tau(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    mask = spec.support.allowed_transitions
    return np.column_stack([_random_column(rng, mask[:, j], spec.activity.f_star[j]) for j in range(spec.n_states)])


def random_epsilon(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    mask = spec.support.allowed_emissions
    return np.column_stack([_random_column(rng, mask[:, j], spec.activity.g_star[j]) for j in range(spec.n_states)])


@dataclass(frozen=True)
class Baseline:
    """Monte-Carlo mean error of random feasible parameters, under both state aggregations."""

    sum: float
    mean: float
    n_samples: int
    n_infinite: int

    def value(self, aggregate: str = "sum") -> float:
        return self.sum if aggregate == "sum" else self.mean

    def to_dict(self) -> dict:
        return {"sum": self.sum, "mean": self.mean, "n_samples": self.n_samples, "n_infinite": self.n_infinite}


def _baseline(per_state_fn, draw_fn, spec, truth, n_samples, seed, draws=None) -> Baseline:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(n_samples):
        candidate = draws[k] if draws is not None else draw_fn(spec, rng)
        rows.append(per_state_fn(candidate))
    per = np.array(rows)  # (n_samples, N)
    finite = np.all(np.isfinite(per), axis=1)
    n_inf = int((~finite).sum())
    if n_inf:
        log.warning("%d of %d baseline draws gave infinite relative entropy; excluded", n_inf, n_samples)
    per = per[finite]
    if per.shape[0] == 0:
        return Baseline(float("inf"), float("inf"), n_samples, n_inf)
    return Baseline(float(per.sum(axis=1).mean()), float(per.mean()), n_samples, n_inf)


def baseline_tau(
    spec: ModelSpec, truth: ModelParams, n_samples: int = 1000, seed: int = 0, draws: list | None = None
) -> Baseline:
    """Expected transition error of uniformly random feasible ``tau``.

    ``draws`` overrides the random generator with explicit ``tau`` matrices.
    """
    f = spec.activity.f[:, :-1]
    P = _transition_block(f, truth.tau)
    return _baseline(lambda tau: _column_ares(P, _transition_block(f, tau)), random_tau, spec, truth, n_samples, seed, draws)


def baseline_epsilon(
    spec: ModelSpec, truth: ModelParams, n_samples: int = 1000, seed: int = 0, draws: list | None = None
) -> Baseline:
    g = spec.activity.g
    P = _emission_block(g, truth.epsilon)
    return _baseline(
        lambda eps: _column_ares(P, _emission_block(g, eps)), random_epsilon, spec, truth, n_samples, seed, draws
    )
