"""E-step: scaled forward-backward for the activity-modulated HMM."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ImpossibleObservation
from .model import (
    ModelParams,
    ModelSpec,
    check_feasible,
    observation_likelihoods,
    transition_matrices,
    validate_sequence,
)


@dataclass(frozen=True, eq=False)
class PosteriorStats:
    """Posterior marginals for one emission sequence.

    gamma : (N, T), ``gamma[j, t] = Pr(X_t = j | y)``
    xi : (N, N, T-1), ``xi[i, j, t] = Pr(X_t = j, X_{t+1} = i | y)`` (destination first)
    """

    gamma: np.ndarray
    xi: np.ndarray
    log_likelihood: float
    y: np.ndarray


def _forward(A: np.ndarray, L: np.ndarray, pi: np.ndarray):
    T, N = L.shape
    alpha = np.empty((T, N))
    scale = np.empty(T)
    a = L[0] * pi
    c = a.sum()
    if not c > 0.0:
        raise ImpossibleObservation("observation at t=0 has zero probability", 0)
    alpha[0] = a / c
    scale[0] = c
    for t in range(1, T):
        a = L[t] * (A[t - 1] @ alpha[t - 1])
        c = a.sum()
        if not c > 0.0:
            raise ImpossibleObservation(f"observation at t={t} has zero probability given the past", t)
        alpha[t] = a / c
        scale[t] = c
    return alpha, scale


def _prepare(spec: ModelSpec, params: ModelParams, y):
    check_feasible(spec, params)
    y = validate_sequence(y, spec.n_symbols, spec.horizon)
    A = transition_matrices(spec, params, check=False)
    L = observation_likelihoods(spec, params, y, check=False)
    return y, A, L


def log_likelihood(spec: ModelSpec, params: ModelParams, y) -> float:
    """``log Pr(y; params)`` from the forward pass alone."""
    _, A, L = _prepare(spec, params, y)
    _, scale = _forward(A, L, params.pi)
    return float(np.log(scale).sum())


def forward_backward(spec: ModelSpec, params: ModelParams, y) -> PosteriorStats:
    """Posterior state and pair marginals via per-step normalized recursions.

    Cost is O(N^2 T). Raises :class:`ImpossibleObservation` when ``Pr(y) = 0``.
    """
    y, A, L = _prepare(spec, params, y)
    alpha, scale = _forward(A, L, params.pi)
    T, N = L.shape
    beta = np.empty((T, N))
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = (L[t + 1] * beta[t + 1]) @ A[t] / scale[t + 1]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    # xi[t, i, j] = beta_i(t+1) L_i(t+1) A_ij(t) alpha_j(t) / c(t+1)
    w = L[1:] * beta[1:] / scale[1:, None]
    xi = w[:, :, None] * A * alpha[:-1, None, :]
    xi /= xi.sum(axis=(1, 2), keepdims=True)
    return PosteriorStats(
        gamma=np.ascontiguousarray(gamma.T),
        xi=np.ascontiguousarray(np.moveaxis(xi, 0, -1)),
        log_likelihood=float(np.log(scale).sum()),
        y=y,
    )


def forward_backward_unscaled(spec: ModelSpec, params: ModelParams, y) -> PosteriorStats:
    """Unnormalized recursions with the diagonal-observation matrix kept explicit.

    The backward covector absorbs the observation at its own step, and the
    state marginal divides it back out (zero entries invert to 1). Products
    underflow for long sequences; use only for short cross-checks.
    """
    y, A, L = _prepare(spec, params, y)
    T, N = L.shape
    alpha = np.empty((T, N))
    beta = np.empty((T, N))
    alpha[0] = L[0] * params.pi
    for t in range(1, T):
        alpha[t] = L[t] * (A[t - 1] @ alpha[t - 1])
    beta[-1] = L[-1]
    for t in range(T - 2, -1, -1):
        beta[t] = (beta[t + 1] @ A[t]) * L[t]
    Linv = np.where(L != 0.0, 1.0 / np.where(L != 0.0, L, 1.0), 1.0)
    num = beta * Linv * alpha
    den = num.sum(axis=1, keepdims=True)
    if np.any(den == 0.0):
        t = int(np.flatnonzero(den[:, 0] == 0.0)[0])
        raise ImpossibleObservation(f"zero path mass at t={t}", t)
    gamma = num / den
    xi = beta[1:, :, None] * A * alpha[:-1, None, :]
    xi /= xi.sum(axis=(1, 2), keepdims=True)
    prob = alpha[-1].sum()
    return PosteriorStats(
        gamma=gamma.T.copy(),
        xi=np.moveaxis(xi, 0, -1).copy(),
        log_likelihood=float(np.log(prob)) if prob > 0 else -np.inf,
        y=y,
    )
