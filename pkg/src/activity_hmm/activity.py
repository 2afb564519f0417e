"""Activity function library.

Activity functions are sampled on the integer grid ``t = 1..T`` and stored
as arrays; nothing downstream ever evaluates them off-grid.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .exceptions import ConfigError

DAY = 24 * 6  # ten-minute bins
SHIFT_STEP = 6


def time_grid(horizon: int) -> np.ndarray:
    return np.arange(1, horizon + 1, dtype=float)


def constant(t, value: float = 1.0) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.full(t.shape, float(value))


def raised_cosine(t, n: float = 1.0, period: float = DAY) -> np.ndarray:
    """``(n - cos(2 pi t / period)) / (n + 1)``; bounded by [0, 1] for n >= 1."""
    if n <= 0:
        raise ValueError("raised cosine requires n > 0")
    if period < 1:
        raise ValueError("period must be >= 1")
    t = np.asarray(t, dtype=float)
    return (n - np.cos(2.0 * np.pi * t / period)) / (n + 1.0)


def shifted_cosine(t, j: int, period: float = DAY, step: float = SHIFT_STEP) -> np.ndarray:
    """Daily cosine whose phase is offset by ``step * j`` bins for state label ``j``."""
    if period < 1:
        raise ValueError("period must be >= 1")
    t = np.asarray(t, dtype=float)
    return (2.0 - np.cos(2.0 * np.pi * (t - step * j) / period)) / 3.0


def load_activity_file(path: str | Path, horizon: int) -> np.ndarray:
    """Read a two-column ``t value`` text file onto the grid ``1..horizon``."""
    try:
        data = np.loadtxt(path, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read activity file {path}: {exc}") from exc
    if data.shape[1] != 2:
        raise ConfigError(f"activity file {path} must have two columns (t, value)")
    t = data[:, 0].astype(int)
    if np.any(t != data[:, 0]):
        raise ConfigError(f"activity file {path} has non-integer time stamps")
    out = np.full(horizon, np.nan)
    inside = (t >= 1) & (t <= horizon)
    out[t[inside] - 1] = data[inside, 1]
    if np.isnan(out).any():
        missing = int(np.flatnonzero(np.isnan(out))[0]) + 1
        raise ConfigError(f"activity file {path} has no value for t={missing}")
    return out


def activity_from_config(
    cfg: Any,
    state: int,
    horizon: int,
    base_dir: Path | None = None,
    period: float = DAY,
    step: float = SHIFT_STEP,
) -> np.ndarray:
    """Materialize one state's activity series from a config entry.

    ``cfg`` is a name (``"constant"``, ``"r1"``, ``"r2"``, ``"c"``), a mapping with
    ``name`` plus parameters, a mapping with ``file``, or a list with one such
    entry per state. ``state`` is zero-based; shifted cosines use label ``state+1``.
    """
    if isinstance(cfg, (list, tuple)):
        if state >= len(cfg):
            raise ConfigError(f"activity list has no entry for state {state + 1}")
        return activity_from_config(cfg[state], state, horizon, base_dir, period, step)
    if isinstance(cfg, str):
        cfg = _SHORT_NAMES.get(cfg, {"name": cfg})
    if not isinstance(cfg, Mapping):
        raise ConfigError(f"bad activity entry: {cfg!r}")
    if "file" in cfg:
        path = Path(cfg["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_activity_file(path, horizon)
    t = time_grid(horizon)
    name = cfg.get("name")
    period = cfg.get("period", period)
    if name == "constant":
        values = constant(t, cfg.get("value", 1.0))
    elif name == "raised_cosine":
        values = raised_cosine(t, cfg.get("n", 1.0), period)
    elif name == "shifted_cosine":
        values = shifted_cosine(t, state + 1, period, cfg.get("step", step))
    else:
        raise ConfigError(f"unknown activity function {name!r}")
    return values


_SHORT_NAMES = {
    "1": {"name": "constant"},
    "constant": {"name": "constant"},
    "r1": {"name": "raised_cosine", "n": 1},
    "r2": {"name": "raised_cosine", "n": 2},
    "c": {"name": "shifted_cosine"},
}
