"""Curve distances: integrated squared difference and dynamic time warping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .errors import ConfigurationError
from .fdata import Curve, Grid, check_same_grid


@dataclass(frozen=True)
class DtwConfig:
    """``band_radius`` is the Sakoe-Chiba half-width in grid steps (None = full window).

    The local cost is always the squared difference.
    """

    band_radius: Optional[int] = None

    def __post_init__(self):
        if self.band_radius is not None and self.band_radius < 0:
            raise ConfigurationError("band_radius must be >= 0")

    def check_lengths(self, n: int, m: int) -> None:
        if n < 1 or m < 1:
            raise ValueError("DTW needs non-empty sequences")
        if self.band_radius is not None and abs(n - m) > self.band_radius:
            raise ConfigurationError(
                f"band radius {self.band_radius} admits no warping path between lengths {n} and {m}"
            )


def l2_distance_sq(x: Curve, y: Curve) -> float:
    """Trapezoid quadrature of (x - y)^2 over the shared grid."""
    check_same_grid(x.grid, y.grid)
    d = x.values - y.values
    return float(x.grid.integrate(d * d))


def l2_distance_matrix(a: np.ndarray, b: np.ndarray, grid: Grid) -> np.ndarray:
    """Pairwise integrated squared distances between rows of ``a`` and rows of ``b``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    w = grid.weights
    out = np.empty((a.shape[0], b.shape[0]))
    for i in range(a.shape[0]):
        diff = b - a[i]
        out[i] = (diff * diff) @ w
    return out


@njit(cache=True)
def _dtw(x, y, band):
    n = x.shape[0]
    m = y.shape[0]
    inf = np.inf
    prev = np.full(m + 1, inf)
    cur = np.full(m + 1, inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur[:] = inf
        lo = 1
        hi = m
        if band >= 0:
            lo = max(1, i - band)
            hi = min(m, i + band)
        for j in range(lo, hi + 1):
            d = x[i - 1] - y[j - 1]
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = d * d + best
        prev, cur = cur, prev
        prev[0] = inf
    return prev[m]


@njit(cache=True)
def _dtw_many(query, refs, band):
    out = np.empty(refs.shape[0])
    for r in range(refs.shape[0]):
        out[r] = _dtw(query, refs[r], band)
    return out


def _as_values(c) -> np.ndarray:
    return np.ascontiguousarray(c.values if isinstance(c, Curve) else c, dtype=np.float64).ravel()


def dtw_distance(x, y, cfg: DtwConfig = DtwConfig()) -> float:
    """Unnormalised DTW cost with steps (-1,0), (0,-1), (-1,-1) and squared local cost.

    Accepts Curves or plain sequences; the two inputs may differ in length.
    """
    xv, yv = _as_values(x), _as_values(y)
    cfg.check_lengths(xv.size, yv.size)
    band = -1 if cfg.band_radius is None else int(cfg.band_radius)
    return float(_dtw(xv, yv, band))


def dtw_distance_matrix(a: np.ndarray, b: np.ndarray, cfg: DtwConfig = DtwConfig()) -> np.ndarray:
    a = np.ascontiguousarray(np.atleast_2d(a), dtype=np.float64)
    b = np.ascontiguousarray(np.atleast_2d(b), dtype=np.float64)
    cfg.check_lengths(a.shape[1], b.shape[1])
    band = -1 if cfg.band_radius is None else int(cfg.band_radius)
    return np.vstack([_dtw_many(a[i], b, band) for i in range(a.shape[0])])


def distance_matrix(a: np.ndarray, b: np.ndarray, grid: Grid, metric: str = "l2", dtw: DtwConfig = DtwConfig()) -> np.ndarray:
    if metric == "l2":
        return l2_distance_matrix(a, b, grid)
    if metric == "dtw":
        return dtw_distance_matrix(a, b, dtw)
    raise ConfigurationError(f"unknown metric {metric!r} (expected 'l2' or 'dtw')")
