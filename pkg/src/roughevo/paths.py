"""Paths on uniform time grids: fBm generation, dyadic refinement, Hölder norms."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg

from .spectral import SpectralOperator


class GridError(ValueError):
    pass


class RegularizationError(RuntimeError):
    """Cholesky factorization of the fBm covariance failed."""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    cells: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise GridError("horizon must be positive")
        if self.cells < 2:
            raise GridError("a grid needs at least 2 cells")

    @property
    def h(self) -> float:
        return self.horizon / self.cells

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.cells + 1)

    def index(self, t: float) -> int:
        """Grid index of ``t``; raises if ``t`` is not (numerically) a node."""
        k = round(t / self.h)
        if abs(k * self.h - t) > 1e-9 * max(1.0, self.horizon) or not 0 <= k <= self.cells:
            raise GridError(f"time {t} is not a grid node")
        return int(k)


@dataclass(frozen=True)
class GridPath:
    """A ``V``-valued path given by its values at the grid nodes.

    ``values`` has shape ``(M + 1, N)``.  Piecewise-linear paths are evaluated
    between nodes by linear interpolation and have cell-constant slopes.
    """

    grid: TimeGrid
    values: np.ndarray
    interpolation: str = "piecewise-linear"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != self.grid.cells + 1:
            raise GridError(f"expected {self.grid.cells + 1} samples, got {vals.shape[0]}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("path values must be finite")
        if self.interpolation not in ("piecewise-linear", "sample-only"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @cached_property
    def slopes(self) -> np.ndarray:
        """Cell slopes ``omega'``, shape ``(M, N)``."""
        out = np.diff(self.values, axis=0) / self.grid.h
        out.setflags(write=False)
        return out

    def at(self, k: int) -> np.ndarray:
        return self.values[k]

    def __call__(self, t):
        """Linear interpolation; ``t`` scalar or array (result gets a trailing mode axis)."""
        t = np.asarray(t, dtype=float)
        x = np.clip(t / self.grid.h, 0.0, self.grid.cells)
        k = np.minimum(np.floor(x).astype(int), self.grid.cells - 1)
        frac = (x - k)[..., None]
        return (1.0 - frac) * self.values[k] + frac * self.values[k + 1]

    def with_values(self, values) -> "GridPath":
        return GridPath(self.grid, values, self.interpolation)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"mode_{i + 1}" for i in range(self.dim)])
            for t, row in zip(self.times, self.values):
                writer.writerow([repr(float(t))] + [repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path) -> "GridPath":
        with Path(path).open() as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(x) for x in row] for row in rows[1:]])
        t = data[:, 0]
        return cls(TimeGrid(float(t[-1]), len(t) - 1), data[:, 1:])


@dataclass(frozen=True)
class HolderParams:
    """Exponent set used by the integrals and the solver."""

    H: float = 0.45
    beta: float = 0.36
    beta_p: float = 0.40
    beta_pp: float | None = None
    alpha: float = 0.66
    gamma: float = 0.8

    def __post_init__(self):
        if self.beta_pp is None:
            object.__setattr__(self, "beta_pp", 0.5 * (self.beta_p + self.H))
        self.validate()

    def violations(self) -> list[str]:
        H, b, bp, bpp, a, g = self.H, self.beta, self.beta_p, self.beta_pp, self.alpha, self.gamma
        checks = [
            (1 / 3 < b, "1/3 < beta"),
            (b <= bp, "beta <= beta'"),
            (bp < H, "beta' < H"),
            (H <= 0.5, "H <= 1/2"),
            (1 - b < a, "1 - beta < alpha"),
            (a < 2 * b, "alpha < 2 beta"),
            (a < (b + 1) / 2, "alpha < (beta + 1)/2"),
            (b < a, "beta < alpha"),
            (a + bp > 1, "alpha + beta' > 1"),
            (bp < bpp, "beta' < beta''"),
            (bpp < H, "beta'' < H"),
            (a < g, "alpha < gamma"),
            (g < 1, "gamma < 1"),
        ]
        return [name for ok, name in checks if not ok]

    def validate(self) -> None:
        bad = self.violations()
        if bad:
            raise ConfigError("exponent constraints violated: " + "; ".join(bad))


def fbm_covariance(H: float, times: np.ndarray) -> np.ndarray:
    s, t = np.meshgrid(times, times, indexing="ij")
    return 0.5 * (s ** (2 * H) + t ** (2 * H) - np.abs(t - s) ** (2 * H))


def generate_fbm(H: float, op: SpectralOperator, grid: TimeGrid, mode_weights=None,
                 seed: int = 0, samples: int | None = None) -> GridPath | list[GridPath]:
    """Mode-wise independent fBm by exact Cholesky sampling of the grid covariance.

    Mode ``i`` is scaled by ``mode_weights[i]`` (default ``lambda_i^(-kappa_hat)``).
    With ``samples`` given, a list of independent paths is returned.
    """
    if not 0 < H <= 0.5:
        raise ValueError("H must lie in (0, 1/2]")
    q = op.eigenvalues ** (-op.kappa_hat) if mode_weights is None else np.asarray(mode_weights, float)
    if q.shape != (op.dim,) or not np.all(np.isfinite(q)):
        raise ValueError("mode weights must be finite, one per mode")
    cov = fbm_covariance(H, grid.times[1:])
    try:
        chol = scipy.linalg.cholesky(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise RegularizationError(
            f"fBm covariance is not numerically positive definite at M={grid.cells}") from exc
    rng = np.random.default_rng(seed)
    count = 1 if samples is None else samples
    paths = []
    for _ in range(count):
        z = rng.standard_normal((grid.cells, op.dim))
        vals = np.zeros((grid.cells + 1, op.dim))
        vals[1:] = (chol @ z) * q
        paths.append(GridPath(grid, vals))
    return paths[0] if samples is None else paths


def refine_dyadic(path: GridPath, level_from: int, level_to: int) -> GridPath:
    """Piecewise-linear interpolant through ``2**level_to + 1`` subsampled nodes,
    expressed on the full grid of ``path`` (which has ``2**level_from`` cells)."""
    if path.grid.cells != 2**level_from:
        raise GridError(f"path has {path.grid.cells} cells, not 2**{level_from}")
    if not 0 <= level_to <= level_from:
        raise GridError("need 0 <= level_to <= level_from")
    step = 2 ** (level_from - level_to)
    coarse_t = path.times[::step]
    coarse_v = path.values[::step]
    vals = np.stack([np.interp(path.times, coarse_t, coarse_v[:, i]) for i in range(path.dim)], axis=1)
    return GridPath(path.grid, vals)


def subsample(path: GridPath, step: int) -> GridPath:
    """The coarse-grid path through every ``step``-th node."""
    if path.grid.cells % step:
        raise GridError("step must divide the number of cells")
    return GridPath(TimeGrid(path.grid.horizon, path.grid.cells // step), path.values[::step])


def holder_sup(values: np.ndarray, times: np.ndarray, beta: float, weighted: bool) -> float:
    """``max over grid pairs s < t`` of ``|x(t)-x(s)| / (t-s)^beta`` (times ``s^beta``
    if weighted, pairs with ``s = 0`` excluded)."""
    vals = values.reshape(values.shape[0], -1)
    best = 0.0
    n = len(times)
    for lag in range(1, n):
        d = np.sqrt(np.sum((vals[lag:] - vals[:-lag]) ** 2, axis=1))
        dt = times[lag:] - times[:-lag]
        ratio = d / dt**beta
        if weighted:
            ratio = ratio[1:] * times[1 : n - lag] ** beta if n - lag > 1 else ratio[:0]
        if ratio.size:
            best = max(best, float(ratio.max()))
    return best


def path_norm(path: GridPath, beta: float, weighted: bool = False) -> tuple[float, float, float]:
    """``(sup-norm, seminorm, full norm)`` of the discrete (weighted) Hölder norm."""
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    sup = float(np.max(np.sqrt(np.sum(path.values**2, axis=1))))
    semi = holder_sup(path.values, path.times, beta, weighted)
    return sup, semi, sup + semi


def sup_norm(path: GridPath) -> float:
    return float(np.max(np.sqrt(np.sum(path.values**2, axis=1))))


def holder_exponent_fit(path: GridPath, lags=None) -> float:
    """Regression slope of ``log max |x(t+d)-x(t)|`` against ``log d``; a rough
    empirical Hölder exponent used for diagnostics."""
    n = path.grid.cells
    if lags is None:
        lags = sorted({2**k for k in range(int(math.log2(n)))})
    ds, ms = [], []
    for lag in lags:
        d = np.sqrt(np.sum((path.values[lag:] - path.values[:-lag]) ** 2, axis=1)).max()
        ds.append(lag * path.grid.h)
        ms.append(d)
    return float(np.polyfit(np.log(ds), np.log(ms), 1)[0])
