"""Jackknife errors, Binder cumulants and finite-size crossings."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def jackknife(samples: np.ndarray, estimator: Callable[[np.ndarray], float]) -> tuple[float, float]:
    """Leave-one-out jackknife over the first axis of `samples` (rows are independent units).

    `estimator` maps the column means to a scalar.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    full = estimator(x.mean(axis=0))
    if n < 2:
        return float(full), float("nan")
    tot = x.sum(axis=0)
    loo = np.array([estimator((tot - x[i]) / (n - 1)) for i in range(n)])
    err = np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return float(full), float(err)


def block(series: np.ndarray, n_blocks: int = 20) -> np.ndarray:
    """Block means of a time series along its first axis (drops the remainder)."""
    x = np.asarray(series, dtype=float)
    size = x.shape[0] // n_blocks
    if size < 1:
        return x
    return x[: size * n_blocks].reshape(n_blocks, size, *x.shape[1:]).mean(axis=1)


def binder_from_moments(means: np.ndarray) -> float:
    """U = 1 - <m^4> / (3 <m^2>^2) from column means [m2, m4, ...]."""
    return float(1.0 - means[1] / (3.0 * means[0] ** 2))


def binder(m2: Sequence[float], m4: Sequence[float]) -> tuple[float, float]:
    """Binder cumulant of averaged moments with a jackknife error over the rows."""
    return jackknife(np.column_stack([m2, m4]), binder_from_moments)


def crossing(x: Sequence[float], y_small: Sequence[float], y_large: Sequence[float]) -> float:
    """First sign change of y_large - y_small, located by linear interpolation; nan if none."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(y_large, dtype=float) - np.asarray(y_small, dtype=float)
    for k in range(len(x) - 1):
        if d[k] == 0.0:
            return float(x[k])
        if d[k] * d[k + 1] < 0.0:
            return float(x[k] - d[k] * (x[k + 1] - x[k]) / (d[k + 1] - d[k]))
    if len(d) and d[-1] == 0.0:
        return float(x[-1])
    return float("nan")


def crossing_with_error(x, y_small, err_small, y_large, err_large, rng: np.random.Generator,
                        n_resample: int = 400) -> tuple[float, float]:
    """Crossing plus a parametric-bootstrap spread from independent Gaussian errors."""
    c = crossing(x, y_small, y_large)
    ys, es = np.asarray(y_small), np.asarray(err_small)
    yl, el = np.asarray(y_large), np.asarray(err_large)
    res = []
    for _ in range(n_resample):
        v = crossing(x, ys + es * rng.standard_normal(ys.size), yl + el * rng.standard_normal(yl.size))
        if np.isfinite(v):
            res.append(v)
    err = float(np.std(res)) if len(res) > 1 else float("nan")
    return c, err


def level_crossing(x: Sequence[float], y: Sequence[float], level: float) -> float:
    """First x where y crosses `level` (linear interpolation); nan if none."""
    return crossing(x, np.full(len(x), level), y)
