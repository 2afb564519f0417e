"""Seeded sampling of hidden state paths and emission sequences."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .model import ModelParams, ModelSpec, check_feasible, emission_matrices, validate_sequence


def _uniforms(seed: int, horizon: int) -> np.ndarray:
    # Philox is counter-based: uniform k of row r depends only on (seed, r, k).
    gen = np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))
    return gen.random((2, horizon))


def _inverse_cdf(p, u: float) -> int:
    acc = 0.0
    last = 0
    for k, pk in enumerate(p):
        if pk > 0.0:
            last = k
            acc += pk
            if u < acc:
                return k
    return last


def simulate(spec: ModelSpec, params: ModelParams, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``(x, y)``: zero-based states and symbols in ``0..M``, both of length T.

    Identical ``(spec, params, seed)`` always give identical output.
    """
    check_feasible(spec, params)
    T, N = spec.horizon, spec.n_states
    u = _uniforms(seed, T)
    f = spec.activity.f
    tau = params.tau.tolist()
    out_mass = params.tau.sum(axis=0).tolist()

    x = np.empty(T, dtype=np.int64)
    state = _inverse_cdf(params.pi.tolist(), u[0, 0])
    x[0] = state
    f_rows = f.tolist()
    u_x = u[0].tolist()
    for t in range(T - 1):
        act = f_rows[state][t]
        col = [act * tau[i][state] for i in range(N)]
        col[state] = max(0.0, 1.0 - act * out_mass[state])
        state = _inverse_cdf(col, u_x[t + 1])
        x[t + 1] = state

    B = emission_matrices(spec, params, check=False)  # (T, M+1, N)
    probs = B[np.arange(T), :, x]  # (T, M+1)
    cdf = np.cumsum(probs, axis=1)
    y = (u[1][:, None] >= cdf).sum(axis=1)
    last_pos = probs.shape[1] - 1 - np.argmax(probs[:, ::-1] > 0.0, axis=1)
    y = np.minimum(y, last_pos)
    # skip zero-probability symbols hit by an exact cdf tie
    while True:
        bad = probs[np.arange(T), y] == 0.0
        if not bad.any():
            break
        y[bad] += 1
    return x, y.astype(np.int64)


def write_sequence(path: str | Path, seq) -> None:
    """Newline-delimited integers."""
    np.savetxt(path, np.asarray(seq, dtype=np.int64), fmt="%d")


def read_sequence(path: str | Path, n_symbols: int | None = None) -> np.ndarray:
    seq = np.loadtxt(path, dtype=np.int64, ndmin=1)
    if n_symbols is not None:
        seq = validate_sequence(seq, n_symbols)
    return seq
