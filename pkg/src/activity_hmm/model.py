"""Model definition: activity profiles, parameters and time-indexed probabilities.

Conventions
-----------
States are zero-based internally (``0..N-1``). Emission symbols run over
``0..M`` where 0 means "no emission"; row ``s-1`` of ``epsilon`` holds the
parameters of symbol ``s``. Time indices are zero-based positions on the grid
``t = 1..T`` (index 0 is the first step).

Transition matrices are **column-stochastic**: ``A[i, j]`` is the probability
of moving *to* ``i`` *from* ``j``. ``tau[i, j]`` follows the same orientation
and its diagonal is structurally zero; the self-transition probability is the
complement ``1 - f_j(t) * sum_{i != j} tau[i, j]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConstraintViolation, DimensionError

FEASIBILITY_TOL = 1e-12


def _readonly(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ActivityProfile:
    """Per-state transition (``f``) and emission (``g``) activity levels, shape (N, T)."""

    f: np.ndarray
    g: np.ndarray
    f_star: np.ndarray = field(init=False, repr=False)
    g_star: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        f = _readonly(np.atleast_2d(self.f))
        g = _readonly(np.atleast_2d(self.g))
        if f.shape != g.shape:
            raise DimensionError(f"f has shape {f.shape} but g has shape {g.shape}")
        if f.shape[1] < 2:
            raise DimensionError("activity profile needs at least two time steps")
        for name, a in (("f", f), ("g", g)):
            if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
                raise ValueError(f"activity levels {name} must lie in [0, 1]")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)
        # f only enters transitions at t = 1..T-1
        object.__setattr__(self, "f_star", _readonly(f[:, :-1].max(axis=1)))
        object.__setattr__(self, "g_star", _readonly(g.max(axis=1)))

    @classmethod
    def from_functions(cls, f_funcs, g_funcs, horizon: int) -> "ActivityProfile":
        """Sample callables ``func(t)`` (one per state) on ``t = 1..horizon``."""
        t = np.arange(1, horizon + 1, dtype=float)
        return cls(np.vstack([fn(t) for fn in f_funcs]), np.vstack([gn(t) for gn in g_funcs]))

    @property
    def n_states(self) -> int:
        return self.f.shape[0]

    @property
    def horizon(self) -> int:
        return self.f.shape[1]


@dataclass(frozen=True, eq=False)
class SupportMask:
    """A-priori structural zeros of ``tau`` (N x N) and ``epsilon`` (M x N)."""

    allowed_transitions: np.ndarray
    allowed_emissions: np.ndarray

    def __post_init__(self):
        tr = np.array(self.allowed_transitions, dtype=bool)
        np.fill_diagonal(tr, False)
        tr.setflags(write=False)
        object.__setattr__(self, "allowed_transitions", tr)
        object.__setattr__(self, "allowed_emissions", _readonly(self.allowed_emissions, bool))

    @classmethod
    def full(cls, n_states: int, n_symbols: int) -> "SupportMask":
        return cls(np.ones((n_states, n_states), bool), np.ones((n_symbols, n_states), bool))

    @classmethod
    def diagonal_emissions(cls, n_states: int) -> "SupportMask":
        """State ``j`` may only emit its own label: the mobile-phone toy model."""
        return cls(np.ones((n_states, n_states), bool), np.eye(n_states, dtype=bool))

    def to_dict(self) -> dict:
        return {
            "allowed_transitions": self.allowed_transitions.astype(int).tolist(),
            "allowed_emissions": self.allowed_emissions.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SupportMask":
        return cls(np.array(d["allowed_transitions"], bool), np.array(d["allowed_emissions"], bool))


@dataclass(frozen=True, eq=False)
class ModelSpec:
    n_states: int
    n_symbols: int
    horizon: int
    activity: ActivityProfile
    mask: SupportMask | None = None

    def __post_init__(self):
        if self.n_states < 1 or self.n_symbols < 1 or self.horizon < 2:
            raise DimensionError("need n_states >= 1, n_symbols >= 1 and horizon >= 2")
        if self.activity.f.shape != (self.n_states, self.horizon):
            raise DimensionError(
                f"activity has shape {self.activity.f.shape}, expected {(self.n_states, self.horizon)}"
            )
        if self.mask is not None:
            if self.mask.allowed_transitions.shape != (self.n_states, self.n_states) or (
                self.mask.allowed_emissions.shape != (self.n_symbols, self.n_states)
            ):
                raise DimensionError("support mask does not match model dimensions")

    @property
    def support(self) -> SupportMask:
        return self.mask if self.mask is not None else SupportMask.full(self.n_states, self.n_symbols)


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Initial distribution ``pi`` (N,), transition ``tau`` (N, N), emission ``epsilon`` (M, N)."""

    pi: np.ndarray
    tau: np.ndarray
    epsilon: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float).reshape(-1)
        tau = np.array(self.tau, dtype=float)
        eps = np.array(self.epsilon, dtype=float)
        if eps.ndim == 1:
            eps = np.diag(eps) if eps.shape[0] == pi.shape[0] else eps[:, None]
        n = pi.shape[0]
        if tau.shape != (n, n) or eps.ndim != 2 or eps.shape[1] != n:
            raise DimensionError(f"inconsistent shapes pi={pi.shape} tau={tau.shape} epsilon={eps.shape}")
        np.fill_diagonal(tau, 0.0)
        for name, a in (("pi", pi), ("tau", tau), ("epsilon", eps)):
            if not np.all(np.isfinite(a)) or a.min() < 0.0:
                raise ValueError(f"{name} entries must be finite and nonnegative")
            a.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "epsilon", eps)

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.epsilon.shape[0]

    def to_dict(self) -> dict:
        return {"pi": self.pi.tolist(), "tau": self.tau.tolist(), "epsilon": self.epsilon.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(d["pi"], d["tau"], d["epsilon"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ModelParams":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def max_abs_diff(self, other: "ModelParams") -> float:
        return float(
            max(
                np.abs(self.pi - other.pi).max(),
                np.abs(self.tau - other.tau).max(),
                np.abs(self.epsilon - other.epsilon).max(),
            )
        )


@dataclass(frozen=True)
class FeasibilityReport:
    tau_slack: np.ndarray
    eps_slack: np.ndarray
    pi_ok: bool
    mask_ok: bool
    tol: float = FEASIBILITY_TOL

    @property
    def ok(self) -> bool:
        return bool(
            self.pi_ok and self.mask_ok and self.tau_slack.min() >= -self.tol and self.eps_slack.min() >= -self.tol
        )

    def raise_if_infeasible(self) -> None:
        if not self.pi_ok:
            raise ConstraintViolation("initial distribution pi is not a probability vector", "pi")
        if not self.mask_ok:
            raise ConstraintViolation("parameters are nonzero outside the support mask", "mask")
        for kind, slack in (("tau", self.tau_slack), ("epsilon", self.eps_slack)):
            j = int(np.argmin(slack))
            if slack[j] < -self.tol:
                raise ConstraintViolation(
                    f"{kind} constraint violated for state {j + 1} (slack {slack[j]:.3g})", kind, j, float(slack[j])
                )


def _check_dims(spec: ModelSpec, params: ModelParams) -> None:
    if params.n_states != spec.n_states or params.n_symbols != spec.n_symbols:
        raise DimensionError(
            f"params have N={params.n_states}, M={params.n_symbols}; spec has N={spec.n_states}, M={spec.n_symbols}"
        )


def validate(spec: ModelSpec, params: ModelParams, tol: float = FEASIBILITY_TOL) -> FeasibilityReport:
    """Per-state constraint slacks ``1 - f*_j sum_i tau_ij`` and ``1 - g*_j sum_s eps_sj``."""
    _check_dims(spec, params)
    act = spec.activity
    tau_slack = 1.0 - act.f_star * params.tau.sum(axis=0)
    eps_slack = 1.0 - act.g_star * params.epsilon.sum(axis=0)
    pi_ok = bool(abs(params.pi.sum() - 1.0) <= tol)
    mask_ok = True
    if spec.mask is not None:
        mask_ok = bool(
            np.all(params.tau[~spec.mask.allowed_transitions] == 0.0)
            and np.all(params.epsilon[~spec.mask.allowed_emissions] == 0.0)
        )
    return FeasibilityReport(tau_slack, eps_slack, pi_ok, mask_ok, tol)


def check_feasible(spec: ModelSpec, params: ModelParams) -> None:
    validate(spec, params).raise_if_infeasible()


def transition_matrix(spec: ModelSpec, params: ModelParams, t: int) -> np.ndarray:
    """Column-stochastic ``A(t)`` for the step from grid index ``t`` to ``t+1``."""
    check_feasible(spec, params)
    if not 0 <= t < spec.horizon - 1:
        raise IndexError(f"transition index {t} outside [0, {spec.horizon - 2}]")
    return _transition_block(spec.activity.f[:, t : t + 1], params.tau)[0]


def transition_matrices(spec: ModelSpec, params: ModelParams, check: bool = True) -> np.ndarray:
    """All transition matrices, shape (T-1, N, N)."""
    if check:
        check_feasible(spec, params)
    return _transition_block(spec.activity.f[:, :-1], params.tau)


def _transition_block(f: np.ndarray, tau: np.ndarray) -> np.ndarray:
    # f: (N, L) -> (L, N, N); A[t, i, j] = f[j, t] * tau[i, j]
    A = f.T[:, None, :] * tau[None, :, :]
    n = tau.shape[0]
    diag = 1.0 - f.T * tau.sum(axis=0)[None, :]
    A[:, np.arange(n), np.arange(n)] = np.clip(diag, 0.0, 1.0)
    return A


def emission_distribution(spec: ModelSpec, params: ModelParams, t: int, j: int) -> np.ndarray:
    """Distribution over symbols ``0..M`` emitted by state ``j`` at grid index ``t``."""
    check_feasible(spec, params)
    if not 0 <= t < spec.horizon:
        raise IndexError(f"time index {t} outside [0, {spec.horizon - 1}]")
    return _emission_block(spec.activity.g[:, t : t + 1], params.epsilon)[0, :, j]


def emission_matrices(spec: ModelSpec, params: ModelParams, check: bool = True) -> np.ndarray:
    """All emission matrices, shape (T, M+1, N); ``B[t, s, j] = b_sj(t)``."""
    if check:
        check_feasible(spec, params)
    return _emission_block(spec.activity.g, params.epsilon)


def _emission_block(g: np.ndarray, eps: np.ndarray) -> np.ndarray:
    L = g.shape[1]
    out = np.empty((L, eps.shape[0] + 1, eps.shape[1]))
    out[:, 1:, :] = g.T[:, None, :] * eps[None, :, :]
    out[:, 0, :] = np.clip(1.0 - g.T * eps.sum(axis=0)[None, :], 0.0, 1.0)
    return out


def observation_likelihoods(spec: ModelSpec, params: ModelParams, y: np.ndarray, check: bool = True) -> np.ndarray:
    """``b_{y_t, j}(t)`` for every time and state, shape (T, N)."""
    if check:
        check_feasible(spec, params)
    y = np.asarray(y)
    g = spec.activity.g.T  # (T, N)
    out = np.empty_like(g)
    zero = y == 0
    out[zero] = np.clip(1.0 - g[zero] * params.epsilon.sum(axis=0)[None, :], 0.0, 1.0)
    nz = ~zero
    out[nz] = g[nz] * params.epsilon[y[nz] - 1, :]
    return out


def validate_sequence(y, n_symbols: int, horizon: int | None = None) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise DimensionError("emission sequence must be one-dimensional")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.mod(y, 1) == 0):
            raise ValueError("emission symbols must be integers")
        y = y.astype(np.int64)
    if horizon is not None and y.shape[0] != horizon:
        raise DimensionError(f"sequence has length {y.shape[0]}, expected {horizon}")
    if y.size and (y.min() < 0 or y.max() > n_symbols):
        raise ValueError(f"emission symbols must lie in 0..{n_symbols}")
    return y.astype(np.int64, copy=False)
