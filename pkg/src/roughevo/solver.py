"""Fixed-point operator on path-area pairs and the Picard iteration.

The default (``exact``) route evaluates the integrals cell by cell for a
piecewise-linear driver: on ``[t_k, t_k+1]`` the integrand is expanded to
second order around ``u(t_k)``, ``G(u(r)) ~ G(u_k) + DG(u_k)(u(r) - u_k)``, and
the semigroup factor is integrated exactly, which gives::

    I(t_k+1) = S(h) I(t_k) + diag(phi1/h) G(u_k) dw_k + diag(2 phi2/h^2) DG(u_k) : v(t_k, t_k+1)

For ``lam -> 0`` this is the second-order (Davie) step ``G dw + DG : v``.  The
area component of the image is the path area of the new path against the
driver.  The ``fractional`` route evaluates the path component with the
fractional-derivative representation instead (slow; used for cross-checks).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .areas import AreaOperator, GridArea, path_area
from .fraccalc import DEFAULT_QUAD, QuadratureSpec, rough_integral
from .nonlinearity import NonlinearityG
from .paths import GridPath, HolderParams, TimeGrid, holder_sup
from .spectral import phi1, phi2


class NoLocalSolutionError(RuntimeError):
    """The horizon shrank below four grid cells without a contracting iteration."""


class DependencyError(ValueError):
    pass


@dataclass(frozen=True)
class SolutionPair:
    u: GridPath
    v: GridArea
    beta: float = 0.36
    beta_p: float = 0.40

    @property
    def grid(self) -> TimeGrid:
        return self.u.grid

    def norms(self) -> tuple[float, float, float]:
        return pair_norm(self)


@dataclass(frozen=True)
class SolverConfig:
    horizon: float = 1.0
    tol: float = 1e-8
    max_iter: int = 200
    quad: QuadratureSpec = DEFAULT_QUAD
    pair_tol: float = 1e-8
    method: str = "exact"

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not (self.tol > 0 and self.pair_tol > 0):
            raise ValueError("tolerances must be positive")


# --- norms -------------------------------------------------------------------------

def _area_lag_sup(lag_values, cells: int, h: float, times, beta, beta_p) -> float:
    best = 0.0
    for lag in range(1, cells + 1):
        vals = lag_values(lag).reshape(cells + 1 - lag, -1)
        ratio = np.sqrt(np.sum(vals**2, axis=1))[1:] * times[1 : cells + 1 - lag] ** beta
        if ratio.size:
            best = max(best, float(ratio.max()) / (lag * h) ** (beta + beta_p))
    return best


def pair_norm(U: SolutionPair, other: SolutionPair | None = None) -> tuple[float, float, float]:
    """Weighted path norm, weighted area norm and their sum (of ``U - other``)."""
    g = U.grid
    uvals = U.u.values if other is None else U.u.values - other.u.values
    sup = float(np.max(np.sqrt(np.sum(uvals**2, axis=1))))
    pn = sup + holder_sup(uvals, g.times, U.beta, weighted=True)
    if other is None:
        lagf = U.v.lag_values
    else:
        lagf = lambda lag: U.v.lag_values(lag) - other.v.lag_values(lag)  # noqa: E731
    an = _area_lag_sup(lagf, g.cells, g.h, g.times, U.beta, U.beta_p)
    return pn, an, pn + an


def w_distance(U1: SolutionPair, U2: SolutionPair) -> float:
    return pair_norm(U1, U2)[2]


# --- operator ----------------------------------------------------------------------

def _check(params: HolderParams | None):
    if params is not None:
        params.validate()


def semigroup_path(op, grid: TimeGrid, u0) -> GridPath:
    return GridPath(grid, op.decay(grid.times) * np.asarray(u0, dtype=float)[None, :])


def apply_T1(U: SolutionPair, omega: GridPath, u0, G: NonlinearityG,
             params: HolderParams | None = None, quad: QuadratureSpec = DEFAULT_QUAD,
             method: str = "exact", times=None) -> GridPath:
    """Path component ``S(t) u0 + int_0^t S(t - r) G(u(r)) d omega(r)`` on the grid.

    With ``method='fractional'`` only the grid times listed in ``times`` (default
    all) are computed by the fractional route; other entries are left as ``S(t)u0``.
    """
    _check(params)
    op = G.op
    grid = omega.grid
    base = op.decay(grid.times) * np.asarray(u0, dtype=float)[None, :]
    if G.is_zero:
        return GridPath(grid, base)
    if method == "exact":
        h = grid.h
        lam = op.eigenvalues
        c1, c2 = phi1(lam, h) / h, 2.0 * phi2(lam, h) / h**2
        decay = np.exp(-lam * h)
        u = U.u.values
        dw = np.diff(omega.values, axis=0)
        cell_v = U.v.lag_values(1)
        Gu = G(u[:-1])
        DGu = G.derivative(u[:-1])
        incr = (c1 * np.einsum("nij,nj->ni", Gu, dw)
                + c2 * np.einsum("nikj,nkj->ni", DGu, cell_v))
        integral = np.zeros_like(base)
        for k in range(grid.cells):
            integral[k + 1] = decay * integral[k] + incr[k]
        return GridPath(grid, base + integral)
    if method == "fractional":
        alpha = params.alpha if params is not None else 0.66
        vals = base.copy()
        idx = range(1, grid.cells + 1) if times is None else [grid.index(t) for t in times]
        for j in idx:
            t = grid.times[j]
            vals[j] += rough_integral(G, U.u, U.v, omega, 0.0, t, alpha, quad, semigroup=(op, t))
        return GridPath(grid, vals)
    raise ValueError(f"unknown method {method!r}")


def apply_T2(U: SolutionPair, omega: GridPath, a: AreaOperator | None, u0, G: NonlinearityG,
             params: HolderParams | None = None, quad: QuadratureSpec = DEFAULT_QUAD,
             path: GridPath | None = None) -> GridArea:
    """Area component: the area of the image path against the driver.

    ``path`` may pass an already computed ``apply_T1`` result.
    """
    if a is None:
        raise DependencyError("apply_T2 needs an AreaOperator for the driver")
    _check(params)
    if path is None:
        path = apply_T1(U, omega, u0, G, params, quad)
    return path_area(path, omega, (U.beta, U.beta_p))


def apply_T(U: SolutionPair, omega: GridPath, a: AreaOperator | None, u0, G, params=None,
            quad: QuadratureSpec = DEFAULT_QUAD) -> SolutionPair:
    path = apply_T1(U, omega, u0, G, params, quad)
    return SolutionPair(path, apply_T2(U, omega, a, u0, G, params, quad, path=path), U.beta, U.beta_p)


def initial_pair(omega: GridPath, u0, G: NonlinearityG, params: HolderParams | None = None) -> SolutionPair:
    """``(S(.) u0, area of that path)``."""
    b, bp = (params.beta, params.beta_p) if params is not None else (0.36, 0.40)
    path = semigroup_path(G.op, omega.grid, u0)
    return SolutionPair(path, path_area(path, omega, (b, bp)), b, bp)


# --- Picard iteration ----------------------------------------------------------------

@dataclass
class IterationHistory:
    rows: list = field(default_factory=list)

    def add(self, it: int, diff: float, ratio: float, horizon: float) -> None:
        self.rows.append((it, diff, ratio, horizon))

    def ratios_on(self, horizon: float) -> list[float]:
        return [r for _, _, r, h in self.rows if h == horizon and not math.isnan(r)]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "delta_W", "ratio", "horizon"])
            for it, d, r, h in self.rows:
                writer.writerow([it, repr(float(d)), repr(float(r)), repr(float(h))])


def truncate(path: GridPath, cells: int) -> GridPath:
    return GridPath(TimeGrid(cells * path.grid.h, cells), path.values[: cells + 1])


def solve_fixed_point(omega: GridPath, a: AreaOperator | None, u0, G: NonlinearityG,
                      config: SolverConfig = SolverConfig(), params: HolderParams | None = None,
                      start: SolutionPair | None = None):
    """Picard iteration ``U_k+1 = T(U_k)``; returns ``(U*, history)``.

    Stops when ``|U_k+1 - U_k|_W < tol (1 + |U_k+1|_W)``.  Three consecutive
    non-contracting steps halve the horizon and restart.
    """
    _check(params)
    if config.method != "exact":
        raise ValueError("the Picard driver uses the exact route")
    history = IterationHistory()
    cells = omega.grid.cells
    if abs(config.horizon - omega.grid.horizon) > 1e-12 * config.horizon:
        cells = int(round(config.horizon / omega.grid.h))
    it = 0
    while True:
        if cells < 4:
            raise NoLocalSolutionError("horizon fell below four grid cells")
        drv = truncate(omega, cells) if cells != omega.grid.cells else omega
        horizon = drv.grid.horizon
        U = initial_pair(drv, u0, G, params) if start is None or start.grid != drv.grid else start
        prev, bad = None, 0
        for _ in range(config.max_iter):
            it += 1
            new = apply_T(U, drv, a, u0, G, params, config.quad)
            diff = w_distance(new, U)
            ratio = diff / prev if prev else float("nan")
            history.add(it, diff, ratio, horizon)
            U = new
            if diff < config.tol * (1.0 + pair_norm(U)[2]):
                return U, history
            bad = bad + 1 if (prev is not None and ratio >= 1.0) else 0
            prev = diff
            if bad >= 3:
                break
        cells //= 2


def fixed_point_residual(U: SolutionPair, omega: GridPath, a, u0, G, params=None) -> float:
    return w_distance(apply_T(U, omega, a, u0, G, params), U)


# --- reference scheme --------------------------------------------------------------------

def _exp_euler(op, values: np.ndarray, h: float, u0, G) -> np.ndarray:
    decay = np.exp(-op.eigenvalues * h)
    out = np.empty_like(values)
    out[0] = u0
    for k in range(len(values) - 1):
        out[k + 1] = decay * (out[k] + G(out[k]) @ (values[k + 1] - values[k]))
    return out


def reference_mild_smooth(omega: GridPath, u0, G: NonlinearityG, grid: TimeGrid | None = None,
                          richardson: bool = False, refine: int = 1) -> GridPath:
    """Exponential Euler ``u_k+1 = S(h)(u_k + G(u_k) dw_k)`` on ``grid`` refined
    ``refine`` times (values reported on ``grid``); ``richardson`` combines the
    runs on ``h`` and ``h/2`` as ``2 u_{h/2} - u_h``."""
    grid = omega.grid if grid is None else grid
    u0 = np.asarray(u0, dtype=float)

    def run(factor):
        fine = TimeGrid(grid.horizon, grid.cells * factor)
        vals = omega(fine.times)
        return _exp_euler(G.op, vals, fine.h, u0, G)[::factor]

    coarse = run(refine)
    if not richardson:
        return GridPath(grid, coarse)
    return GridPath(grid, 2.0 * run(2 * refine) - coarse)
