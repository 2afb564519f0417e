"""Constrained M-step.

Each column ``j`` of ``tau`` (and of ``epsilon``) is maximized independently
over ``{x >= 0 : a*_j * sum(x) <= 1}`` where ``a*_j`` is the peak activity.
The stationarity condition collapses to a scalar equation in ``u = 1/tau_j``::

    sum_t w_t / (u - p_t) = 1,    w_t = f_j(t) xi_jj(t),  p_t = f_j(t) M_j

whose left side is strictly decreasing past the largest pole, so it has
exactly one admissible root. The column is then ``Xi[:, j] / u``, unless
that breaks the peak constraint, in which case it saturates at
``Xi[:, j] / (a*_j M_j)``. Emissions are the same problem with the
zero-emission posterior mass in place of the self-loop mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InconsistentStatistics
from .inference import PosteriorStats
from .model import ModelParams, ModelSpec, SupportMask, observation_likelihoods, transition_matrices

WEIGHT_FLOOR = 1e-300
BOUNDARY_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class TransitionSufficientStats:
    """Xi (N, N) pair totals; xi_diag and mu (N, T-1) self-loop and exit series."""

    Xi: np.ndarray
    xi_diag: np.ndarray
    mu: np.ndarray

    @property
    def M_total(self) -> np.ndarray:
        return self.mu.sum(axis=1)

    @classmethod
    def from_posterior(cls, post: PosteriorStats) -> "TransitionSufficientStats":
        xi = post.xi
        n = xi.shape[0]
        idx = np.arange(n)
        xi_diag = xi[idx, idx, :]
        Xi = xi.sum(axis=2)
        mu = xi.sum(axis=0) - xi_diag
        Xi[idx, idx] = 0.0
        return cls(Xi, xi_diag, np.clip(mu, 0.0, None))

    @classmethod
    def from_path(cls, z: np.ndarray, n_states: int) -> "TransitionSufficientStats":
        """Hard counts: ``xi_ij(t) = [z_{t+1} = i][z_t = j]``."""
        z = np.asarray(z)
        src, dst = z[:-1], z[1:]
        L = src.shape[0]
        xi_diag = np.zeros((n_states, L))
        mu = np.zeros((n_states, L))
        stay = src == dst
        xi_diag[src[stay], np.flatnonzero(stay)] = 1.0
        mu[src[~stay], np.flatnonzero(~stay)] = 1.0
        Xi = np.zeros((n_states, n_states))
        np.add.at(Xi, (dst[~stay], src[~stay]), 1.0)
        return cls(Xi, xi_diag, mu)


@dataclass(frozen=True, eq=False)
class EmissionSufficientStats:
    """Lambda (M, N) symbol totals; lambda0 and nu (N, T) silent and non-silent mass."""

    Lambda: np.ndarray
    lambda0: np.ndarray
    nu: np.ndarray

    @property
    def N_total(self) -> np.ndarray:
        return self.nu.sum(axis=1)

    @property
    def Gamma(self) -> np.ndarray:
        return self.lambda0.sum(axis=1) + self.nu.sum(axis=1)

    @classmethod
    def from_gamma(cls, gamma: np.ndarray, y: np.ndarray, n_symbols: int) -> "EmissionSufficientStats":
        y = np.asarray(y)
        silent = y == 0
        lambda0 = gamma * silent[None, :]
        nu = gamma * (~silent)[None, :]
        Lambda = np.zeros((n_symbols, gamma.shape[0]))
        np.add.at(Lambda, y[~silent] - 1, gamma[:, ~silent].T)
        return cls(Lambda, lambda0, nu)

    @classmethod
    def from_posterior(cls, post: PosteriorStats, n_symbols: int) -> "EmissionSufficientStats":
        return cls.from_gamma(post.gamma, post.y, n_symbols)

    @classmethod
    def from_path(cls, z: np.ndarray, y: np.ndarray, n_states: int, n_symbols: int) -> "EmissionSufficientStats":
        gamma = np.zeros((n_states, len(z)))
        gamma[np.asarray(z), np.arange(len(z))] = 1.0
        return cls.from_gamma(gamma, y, n_symbols)


# -- scalar root ------------------------------------------------------------


def inner_residual(u: float, weights: np.ndarray, poles: np.ndarray) -> float:
    """``sum_t w_t / (u - p_t) - 1``; +inf at a pole."""
    with np.errstate(divide="ignore"):
        return float(np.sum(weights / (u - poles)) - 1.0)


def _active_terms(weights, poles):
    weights = np.asarray(weights, dtype=float)
    poles = np.asarray(poles, dtype=float)
    keep = weights > WEIGHT_FLOOR
    if not keep.any():
        raise ValueError("root equation needs at least one positive weight")
    return weights[keep], poles[keep]


def inner_bracket(weights, poles, bracket_hi: float | None = None) -> tuple[float, float]:
    """Lower estimate from the largest-pole term alone, and a valid upper end.

    ``bracket_hi`` is the caller's a-priori bound; if it is not past the root
    (possible for statistics that are not posteriors) the tighter
    ``p_max + sum(w)`` is used, which always is.
    """
    w, p = _active_terms(weights, poles)
    k = int(np.argmax(p))  # first maximizer
    lo = p[k] + w[k]
    safe_hi = p[k] + w.sum()
    hi = safe_hi if bracket_hi is None else float(bracket_hi)
    if not (hi >= lo and inner_residual(hi, w, p) <= 0.0):
        hi = safe_hi
    return float(lo), float(hi)


def solve_inner(weights, poles, bracket_hi: float | None = None, tol: float = 1e-12, newton: bool = True) -> float:
    """Unique root ``u > max(p)`` of ``sum_t w_t / (u - p_t) = 1``.

    Bisection to width ``tol * hi`` on the bracket, then Newton polish kept
    inside the final bracket.
    """
    w, p = _active_terms(weights, poles)
    lo, hi = inner_bracket(w, p, bracket_hi)
    width = tol * hi
    r_lo = inner_residual(lo, w, p)
    if r_lo <= 0.0:
        return lo
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        r = inner_residual(mid, w, p)
        if r > 0.0:
            lo = mid
        elif r < 0.0:
            hi = mid
        else:
            return mid
    u = 0.5 * (lo + hi)
    if not newton:
        return u
    best_u, best_r = u, abs(inner_residual(u, w, p))
    for _ in range(8):
        d = u - p
        r = np.sum(w / d) - 1.0
        dr = -np.sum(w / (d * d))
        step = u - r / dr
        if not lo <= step <= hi or step == u:
            break
        u = step
        r_new = abs(inner_residual(u, w, p))
        if r_new < best_r:
            best_u, best_r = u, r_new
        if r_new == 0.0:
            break
    return best_u


# -- column updates ----------------------------------------------------------


def constrained_column(
    counts: np.ndarray,
    self_mass: np.ndarray,
    activity: np.ndarray,
    peak: float,
    allowed: np.ndarray | None = None,
    previous: np.ndarray | None = None,
    tol: float = 1e-12,
) -> tuple[np.ndarray, str]:
    """Maximize ``sum_i c_i log x_i + sum_t m_t log(1 - a_t sum_i x_i)`` s.t. ``peak * sum x <= 1``.

    Returns the column and the case taken: ``"zero"``, ``"interior"``,
    ``"boundary"`` or ``"unchanged"``.
    """
    counts = np.asarray(counts, dtype=float)
    if allowed is not None:
        counts = np.where(allowed, counts, 0.0)
    total = counts.sum()
    weights = np.asarray(activity, dtype=float) * np.asarray(self_mass, dtype=float)
    active = weights > WEIGHT_FLOOR
    if total <= 0.0:
        if not active.any() and previous is not None:
            col = np.array(previous, dtype=float)
            if allowed is not None:
                col = np.where(allowed, col, 0.0)
            return col, "unchanged"
        return np.zeros_like(counts), "zero"
    if peak <= 0.0:
        raise InconsistentStatistics("positive exit/emission mass for a state whose activity is identically zero")
    if not active.any():
        return counts / (peak * total), "boundary"
    activity = np.asarray(activity, dtype=float)
    peak_active = activity[active].max()
    u = solve_inner(weights, activity * total, 2.0 * len(activity) * peak_active, tol=tol)
    if peak * total / u >= 1.0 - BOUNDARY_SLACK:
        return counts / (peak * total), "boundary"
    return counts / u, "interior"


def update_pi(post: PosteriorStats) -> np.ndarray:
    g = np.clip(post.gamma[:, 0], 0.0, None)
    return g / g.sum()


def update_tau_column(
    stats: TransitionSufficientStats,
    j: int,
    f_j: np.ndarray,
    f_star: float,
    allowed: np.ndarray | None = None,
    previous: np.ndarray | None = None,
    tol: float = 1e-12,
) -> np.ndarray:
    """New ``tau[:, j]``; ``f_j`` is the activity on the transition grid (length T-1 or T)."""
    f_j = np.asarray(f_j, dtype=float)[: stats.xi_diag.shape[1]]
    counts = stats.Xi[:, j].copy()
    counts[j] = 0.0
    ok = np.ones_like(counts, dtype=bool) if allowed is None else np.asarray(allowed, bool).copy()
    ok[j] = False
    if f_star <= 0.0 and (counts * ok).sum() > 0.0:
        raise InconsistentStatistics(f"transition out of state {j + 1} inferred but its activity is zero")
    col, _ = constrained_column(counts, stats.xi_diag[j], f_j, f_star, ok, previous, tol)
    col[j] = 0.0
    return col


def update_epsilon_column(
    stats: EmissionSufficientStats,
    j: int,
    g_j: np.ndarray,
    g_star: float,
    allowed: np.ndarray | None = None,
    previous: np.ndarray | None = None,
    tol: float = 1e-12,
) -> np.ndarray:
    counts = stats.Lambda[:, j]
    if g_star <= 0.0 and (counts if allowed is None else counts * allowed).sum() > 0.0:
        raise InconsistentStatistics(f"emission from state {j + 1} inferred but its activity is zero")
    col, _ = constrained_column(counts, stats.lambda0[j], g_j, g_star, allowed, previous, tol)
    return col


def update_tau(stats, spec: ModelSpec, previous: np.ndarray | None = None, tol: float = 1e-12) -> np.ndarray:
    n = spec.n_states
    mask = spec.support.allowed_transitions
    act = spec.activity
    tau = np.zeros((n, n))
    for j in range(n):
        prev = None if previous is None else previous[:, j]
        tau[:, j] = update_tau_column(stats, j, act.f[j, :-1], act.f_star[j], mask[:, j], prev, tol)
    return tau


def update_epsilon(stats, spec: ModelSpec, previous: np.ndarray | None = None, tol: float = 1e-12) -> np.ndarray:
    mask = spec.support.allowed_emissions
    act = spec.activity
    eps = np.zeros((spec.n_symbols, spec.n_states))
    for j in range(spec.n_states):
        prev = None if previous is None else previous[:, j]
        eps[:, j] = update_epsilon_column(stats, j, act.g[j], act.g_star[j], mask[:, j], prev, tol)
    return eps


def mstep(spec: ModelSpec, post: PosteriorStats, previous: ModelParams | None = None, tol: float = 1e-12) -> ModelParams:
    """The maximizer of the expected complete-data log-likelihood."""
    tstats = TransitionSufficientStats.from_posterior(post)
    estats = EmissionSufficientStats.from_posterior(post, spec.n_symbols)
    return ModelParams(
        update_pi(post),
        update_tau(tstats, spec, None if previous is None else previous.tau, tol),
        update_epsilon(estats, spec, None if previous is None else previous.epsilon, tol),
    )


def _weighted_log(weight: np.ndarray, prob: np.ndarray) -> float:
    pos = weight > 0.0
    if np.any(prob[pos] <= 0.0):
        return -np.inf
    return float(np.sum(weight[pos] * np.log(prob[pos])))


def expected_log_likelihood(spec: ModelSpec, params: ModelParams, post: PosteriorStats) -> float:
    """Expected complete-data log-likelihood under ``post``; ``-inf`` if a weighted event is impossible.

    Uses ``0 log 0 = 0``.
    """
    A = transition_matrices(spec, params, check=False)  # (T-1, N, N)
    L = observation_likelihoods(spec, params, post.y, check=False)  # (T, N)
    xi = np.moveaxis(post.xi, -1, 0)
    return (
        _weighted_log(post.gamma[:, 0], params.pi)
        + _weighted_log(xi, A)
        + _weighted_log(post.gamma.T, L)
    )
