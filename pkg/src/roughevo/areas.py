"""Second-level objects: path areas, the semigroup-twisted area and its relatives.

For a piecewise-linear driver every object is a sum of exponential moments
over segments on which the slope is constant, so all evaluations below are
closed forms.  Notation per mode ``i`` (eigenvalue ``lam_i``)::

    J_i(a, b)[k]    = int_a^b exp(-lam_i (b - r)) w'_k(r) dr          (S_omega)
    K_i(a, b)[l]    = int_a^b exp(-lam_i (x - a)) w'_l(x) dx          (omega_S)
    A_i(a, b)[k, l] = int_a^b int_a^x exp(-lam_i (x - r)) w'_k(r) dr w'_l(x) dx
"""

from __future__ import annotations

import csv
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .paths import GridError, GridPath, TimeGrid
from .spectral import SpectralOperator, phi1, phi2, phi3


class NeedsInterpolationError(ValueError):
    pass


class WeightedDomainError(ValueError):
    pass


# --- GridArea -----------------------------------------------------------------------

@dataclass(frozen=True)
class GridArea:
    """Tensor-valued function on grid pairs ``(t_i, t_j)``, ``i <= j``.

    Either ``values`` holds a dense ``(M+1, M+1, ...)`` array, or the area is
    stored in Chen form ``v(s,t) = base(t) - base(s) - (left(s)-left(0)) (x)
    (right(t)-right(s))`` with ``base(t) = v(0, t)``.  The Chen form also gives
    exact values between grid nodes when ``left`` and ``right`` are
    piecewise-linear.
    """

    grid: TimeGrid
    values: np.ndarray | None = None
    base: np.ndarray | None = None
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    exponents: tuple[float, float] = (0.36, 0.40)

    def __post_init__(self):
        m = self.grid.cells + 1
        if self.values is not None:
            vals = np.asarray(self.values, dtype=float)
            if vals.shape[:2] != (m, m):
                raise GridError(f"dense area needs leading shape ({m}, {m})")
            if not np.all(np.isfinite(vals)):
                raise ValueError("area values must be finite")
            idx = np.arange(m)
            vals = vals.copy()
            vals[idx, idx] = 0.0
            object.__setattr__(self, "values", vals)
        elif self.base is None or self.left is None or self.right is None:
            raise ValueError("need dense values or (base, left, right)")
        else:
            for name in ("base", "left", "right"):
                arr = np.asarray(getattr(self, name), dtype=float)
                if arr.shape[0] != m:
                    raise GridError(f"{name} needs {m} rows")
                object.__setattr__(self, name, arr)

    @property
    def dense(self) -> bool:
        return self.values is not None

    @property
    def shape(self) -> tuple:
        return self.values.shape[2:] if self.dense else self.base.shape[1:]

    def value(self, i: int, j: int) -> np.ndarray:
        if i > j:
            raise GridError("areas are defined for s <= t only")
        if self.dense:
            return self.values[i, j]
        if i == j:
            return np.zeros(self.shape)
        return (self.base[j] - self.base[i]
                - np.multiply.outer(self.left[i] - self.left[0], self.right[j] - self.right[i]))

    def __call__(self, s: float, t: float) -> np.ndarray:
        return self.value(self.grid.index(s), self.grid.index(t))

    def lag_values(self, lag: int) -> np.ndarray:
        """``v(t_i, t_{i+lag})`` for all admissible ``i``."""
        m = self.grid.cells + 1
        i = np.arange(m - lag)
        if self.dense:
            return self.values[i, i + lag]
        dl = self.left[i] - self.left[0]
        dr = self.right[i + lag] - self.right[i]
        return self.base[i + lag] - self.base[i] - np.einsum("nk,nl->nkl", dl, dr)

    def to_dense(self) -> "GridArea":
        if self.dense:
            return self
        m = self.grid.cells + 1
        vals = np.zeros((m, m) + self.shape)
        for lag in range(1, m):
            i = np.arange(m - lag)
            vals[i, i + lag] = self.lag_values(lag)
        return GridArea(self.grid, vals, exponents=self.exponents)

    def perturbed(self, i: int, j: int, delta) -> "GridArea":
        dense = self.to_dense()
        vals = dense.values.copy()
        vals[i, j] += delta
        return GridArea(self.grid, vals, exponents=self.exponents)

    def _base_at(self, x):
        """``v(0, x)`` for arbitrary ``x`` (Chen form only)."""
        g = self.grid
        k = np.minimum(np.floor(np.asarray(x) / g.h + 1e-12).astype(int), g.cells - 1)
        k = np.maximum(k, 0)
        frac = (np.asarray(x) - k * g.h) / g.h
        du = (self.left[k + 1] - self.left[k]) * frac[..., None]
        dw = (self.right[k + 1] - self.right[k]) * frac[..., None]
        return (self.base[k] + np.einsum("...k,...l->...kl", self.left[k] - self.left[0], dw)
                + 0.5 * np.einsum("...k,...l->...kl", du, dw))

    def _path_at(self, arr, x):
        return GridPath(self.grid, arr)(x)

    def pointwise(self, r: float, qs) -> np.ndarray:
        """``v(r, q)`` for each ``q`` in ``qs``, shape ``(len(qs),) + shape``."""
        qs = np.atleast_1d(np.asarray(qs, dtype=float))
        if self.dense:
            i = self.grid.index(r)
            return np.array([self.values[i, self.grid.index(q)] for q in qs])
        ur = self._path_at(self.left, r) - self.left[0]
        wr = self._path_at(self.right, r)
        wq = self._path_at(self.right, qs)
        return (self._base_at(qs) - self._base_at(r)[None]
                - np.einsum("k,nl->nkl", ur, wq - wr[None]))

    def frobenius_table(self):
        rows = []
        t = self.grid.times
        for lag in range(1, self.grid.cells + 1):
            vals = self.lag_values(lag).reshape(self.grid.cells + 1 - lag, -1)
            norms = np.sqrt(np.sum(vals**2, axis=1))
            rows.extend(zip(t[: len(norms)], t[lag:], norms))
        rows.sort()
        return rows

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["s", "t", "frobenius"])
            for s, t, n in self.frobenius_table():
                writer.writerow([repr(float(s)), repr(float(t)), repr(float(n))])


def zero_area(grid: TimeGrid, dim: int) -> GridArea:
    m = grid.cells + 1
    return GridArea(grid, base=np.zeros((m, dim, dim)), left=np.zeros((m, dim)),
                    right=np.zeros((m, dim)))


def area_norm(v: GridArea, beta: float, beta_p: float, weighted: bool = True) -> float:
    """``sup s^beta |v(s,t)| / (t-s)^(beta+beta')`` over grid pairs (``s > 0`` when weighted)."""
    t = v.grid.times
    best = 0.0
    for lag in range(1, v.grid.cells + 1):
        vals = v.lag_values(lag).reshape(v.grid.cells + 1 - lag, -1)
        ratio = np.sqrt(np.sum(vals**2, axis=1)) / (lag * v.grid.h) ** (beta + beta_p)
        if weighted:
            ratio = ratio[1:] * t[1 : len(ratio)] ** beta
        if ratio.size:
            best = max(best, float(ratio.max()))
    return best


def _require_linear(path: GridPath):
    if path.interpolation != "piecewise-linear":
        raise NeedsInterpolationError("the driver must be piecewise-linear")


def path_area(u: GridPath, omega: GridPath, exponents=(0.36, 0.40)) -> GridArea:
    """``(u (x) omega)(s, t) = int_s^t (u(q) - u(s)) (x) omega'(q) dq`` for
    piecewise-linear ``u`` and ``omega`` on a common grid, in Chen form."""
    _require_linear(omega)
    if u.grid != omega.grid:
        raise GridError("u and omega must share the grid")
    du = np.diff(u.values, axis=0)
    dw = np.diff(omega.values, axis=0)
    mid = u.values[:-1] - u.values[0] + 0.5 * du
    base = np.zeros((u.grid.cells + 1, u.dim, omega.dim))
    base[1:] = np.cumsum(np.einsum("nk,nl->nkl", mid, dw), axis=0)
    return GridArea(u.grid, base=base, left=u.values, right=omega.values, exponents=exponents)


def area_u_omega(u: GridPath, omega: GridPath, s: float, t: float) -> np.ndarray:
    if s > t:
        raise GridError("need s <= t")
    return path_area(u, omega)(s, t)


# --- AreaOperator ----------------------------------------------------------------------

@dataclass
class AreaOperator:
    """Evaluator for the twisted area and its companions of a piecewise-linear driver."""

    driver: GridPath
    op: SpectralOperator
    cache_rows: int = 64
    _rows: OrderedDict = field(default_factory=OrderedDict, init=False, repr=False)

    def __post_init__(self):
        _require_linear(self.driver)
        if self.driver.dim != self.op.dim:
            raise ValueError("driver and operator dimensions differ")

    @property
    def grid(self) -> TimeGrid:
        return self.driver.grid

    @property
    def lam(self) -> np.ndarray:
        return self.op.eigenvalues

    def segments(self, a: float, b: float):
        """Segment lengths and slopes of the driver on ``[a, b]``."""
        if a > b:
            raise GridError("need a <= b")
        t = self.grid.times
        pts = np.concatenate([[a], t[(t > a) & (t < b)], [b]])
        lengths = np.diff(pts)
        keep = lengths > 0
        mids = 0.5 * (pts[:-1] + pts[1:])
        k = np.minimum((mids / self.grid.h).astype(int), self.grid.cells - 1)
        return lengths[keep], self.driver.slopes[k][keep], pts[:-1][keep]

    def J(self, a: float, b: float) -> np.ndarray:
        lengths, slopes, _ = self.segments(a, b)
        out = np.zeros((self.op.dim, self.op.dim))
        for h, w in zip(lengths, slopes):
            out = np.exp(-self.lam * h)[:, None] * out + phi1(self.lam, h)[:, None] * w[None, :]
        return out

    def K(self, a: float, b: float) -> np.ndarray:
        lengths, slopes, starts = self.segments(a, b)
        out = np.zeros((self.op.dim, self.op.dim))
        for h, w, x in zip(lengths, slopes, starts):
            out += (np.exp(-self.lam * (x - a)) * phi1(self.lam, h))[:, None] * w[None, :]
        return out

    def A(self, a: float, b: float) -> np.ndarray:
        n = self.op.dim
        lengths, slopes, _ = self.segments(a, b)
        j = np.zeros((n, n))
        out = np.zeros((n, n, n))
        for h, w in zip(lengths, slopes):
            p1, p2 = phi1(self.lam, h), phi2(self.lam, h)
            out += np.einsum("i,ik,l->ikl", p1, j, w) + np.einsum("i,k,l->ikl", p2, w, w)
            j = np.exp(-self.lam * h)[:, None] * j + p1[:, None] * w[None, :]
        return out

    def K_to(self, t: float, points) -> np.ndarray:
        """``K(p, t)`` for every ``p`` in ``points`` (each ``<= t``), by one backward sweep."""
        points = np.atleast_1d(np.asarray(points, dtype=float))
        grid_t = self.grid.times
        pts = np.unique(np.concatenate([points, grid_t[grid_t < t], [t]]))
        pts = pts[pts <= t]
        vals = np.zeros((len(pts), self.op.dim, self.op.dim))
        decay, p1, _, ws = self._steps(pts)
        for k in range(len(pts) - 2, -1, -1):
            vals[k] = decay[k][:, None] * vals[k + 1] + p1[k][:, None] * ws[k][None, :]
        return vals[np.searchsorted(pts, points)]

    def _steps(self, pts):
        """Per-step decay, phi1, phi2 (each ``(n, N)``) and driver slopes of the
        partition ``pts`` (every step inside one grid cell)."""
        h = np.diff(pts)[:, None]
        c = np.minimum((0.5 * (pts[1:] + pts[:-1]) / self.grid.h).astype(int), self.grid.cells - 1)
        lam = self.lam[None, :]
        return np.exp(-lam * h), phi1(lam, h), phi2(lam, h), self.driver.slopes[c]

    def sweep(self, a: float, points):
        """``(J(a, p), A(a, p))`` for every ``p >= a`` in ``points``, by one forward sweep."""
        points = np.atleast_1d(np.asarray(points, dtype=float))
        grid_t = self.grid.times
        end = points.max()
        pts = np.unique(np.concatenate([[a], points, grid_t[(grid_t > a) & (grid_t < end)]]))
        pts = pts[pts >= a]
        n = self.op.dim
        js = np.zeros((len(pts), n, n))
        As = np.zeros((len(pts), n, n, n))
        decay, P1, P2, ws = self._steps(pts)
        for k in range(len(pts) - 1):
            js[k + 1] = decay[k][:, None] * js[k] + P1[k][:, None] * ws[k][None, :]
        incr = (np.einsum("ni,nik,nl->nikl", P1, js[:-1], ws)
                + np.einsum("ni,nk,nl->nikl", P2, ws, ws))
        As[1:] = np.cumsum(incr, axis=0)
        idx = np.searchsorted(pts, points)
        return js[idx], As[idx]

    def oS_rows(self, t_outer: float, s: float, taus) -> np.ndarray:
        """``oS_kernel(t_outer, s, tau)`` for an array of ``tau``, shape ``(n, N, N, N)``."""
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        js, As = self.sweep(s, taus)
        k = self.K_to(t_outer, np.concatenate([[s], taus]))
        k_s, k_tau = k[0], k[1:]
        dw = self.driver(taus) - self.driver(s)
        inner = js - dw[:, None, :]
        return (np.einsum("nik,nil->nikl", inner, k_tau) + As
                + np.einsum("nk,nil->nikl", dw, k_tau - k_s[None]))

    def row(self, i: int):
        """``(J, A)`` from grid node ``i`` to every node ``j >= i`` (memoized)."""
        if i in self._rows:
            self._rows.move_to_end(i)
            return self._rows[i]
        n, m = self.op.dim, self.grid.cells
        h = self.grid.h
        p1, p2 = phi1(self.lam, h), phi2(self.lam, h)
        decay = np.exp(-self.lam * h)
        slopes = self.driver.slopes
        js = np.zeros((m + 1 - i, n, n))
        As = np.zeros((m + 1 - i, n, n, n))
        for c in range(i, m):
            w = slopes[c]
            k = c - i
            As[k + 1] = (As[k] + np.einsum("i,ik,l->ikl", p1, js[k], w)
                         + np.einsum("i,k,l->ikl", p2, w, w))
            js[k + 1] = decay[:, None] * js[k] + p1[:, None] * w[None, :]
        js.setflags(write=False)
        As.setflags(write=False)
        self._rows[i] = (js, As)
        if len(self._rows) > self.cache_rows:
            self._rows.popitem(last=False)
        return js, As

    def twisted(self, s: float, t: float) -> np.ndarray:
        """The rank-3 kernel ``A_i(s,t)[k,l]``; grid times use the memoized rows."""
        try:
            i, j = self.grid.index(s), self.grid.index(t)
        except GridError:
            return self.A(s, t)
        return self.row(i)[1][j - i]

    def basis_norm(self, s: float, t: float) -> float:
        """Hilbert-Schmidt norm of ``E -> E(w (x)_S w)(s,t)`` over an orthonormal
        basis of ``L_2(V, V_kappa)``."""
        A = self.twisted(s, t)
        w = self.op.weights(-2.0 * self.op.kappa_hat)
        return float(np.sqrt(np.sum(w[:, None, None] * A * A)))


def omega_S_apply(a: AreaOperator, s: float, t: float, e) -> np.ndarray:
    """``int_s^t S(x - s) e (x) omega'(x) dx``."""
    return np.asarray(e, dtype=float)[:, None] * a.K(s, t)


def S_omega_apply(a: AreaOperator, s: float, t: float, E) -> np.ndarray:
    """``int_s^t S(t - r) E omega'(r) dr``."""
    return np.einsum("ik,ik->i", np.asarray(E, dtype=float), a.J(s, t))


def omega_S_omega_apply(a: AreaOperator, s: float, t: float, E) -> np.ndarray:
    """``E (omega (x)_S omega)(s, t)``."""
    return np.einsum("ik,ikl->il", np.asarray(E, dtype=float), a.twisted(s, t))


def oS_kernel(a: AreaOperator, t_outer: float, s: float, tau: float, inner=None) -> np.ndarray:
    """Rank-3 kernel ``Phi_i[k, l]`` of ``E (omega_S(t) (x) omega)(s, tau)``, so that
    the tensor is ``sum_k E_ik Phi_i[k, l]``.  Built from the three-term split::

        omega_S(tau,t) int_s^tau (S(tau-r) - id) E d omega(r)
        + E (omega (x)_S omega)(s, tau) + (omega_S(tau,t) - omega_S(s,t)) E (omega(tau) - omega(s))

    ``inner`` optionally supplies ``int_s^tau (exp(-lam_i (tau-r)) - 1) d omega_k(r)``.
    """
    if not s <= tau <= t_outer:
        raise GridError("need s <= tau <= t")
    dw = a.driver(tau) - a.driver(s)
    if inner is None:
        inner = a.J(s, tau) - dw[None, :]
    k_tau, k_s = a.K(tau, t_outer), a.K(s, t_outer)
    return (np.einsum("ik,il->ikl", inner, k_tau) + a.A(s, tau)
            + np.einsum("k,il->ikl", dw, k_tau - k_s))


def omega_S_tensor_omega_apply(a: AreaOperator, t_outer: float, s: float, tau: float, E,
                               params=None, method: str = "exact", quad=None) -> np.ndarray:
    """``E (omega_S(t) (x) omega)(s, tau)``.  With ``method='fractional'`` the inner
    Hölder-regular integral is evaluated as a Young integral."""
    if params is not None:
        params.validate()
    inner = None
    if method == "fractional" and tau > s:
        from .fraccalc import DEFAULT_QUAD, young_integral

        lam = a.lam
        f = lambda r: np.exp(-np.multiply.outer(tau - np.asarray(r), lam)) - 1.0  # noqa: E731
        alpha = params.alpha if params is not None else 0.66
        inner = young_integral(f, a.driver, s, tau, alpha, quad or DEFAULT_QUAD, pairing="outer")
    elif method not in ("exact", "fractional"):
        raise ValueError(f"unknown method {method!r}")
    return np.einsum("ik,ikl->il", np.asarray(E, dtype=float), oS_kernel(a, t_outer, s, tau, inner))


def smooth_oS_oracle(a: AreaOperator, t_outer: float, s: float, tau: float, E, n: int = 4) -> np.ndarray:
    """Direct quadrature of ``int_s^tau (omega_S(r,t) - omega_S(s,t)) E d omega(r)``."""
    from scipy.special import roots_legendre

    E = np.asarray(E, dtype=float)
    xg, wg = roots_legendre(n)
    lengths, slopes, starts = a.segments(s, tau)
    k_s = a.K(s, t_outer)
    out = np.zeros((a.op.dim, a.op.dim))
    for h, w, x0 in zip(lengths, slopes, starts):
        for xi, wi in zip(xg, wg):
            r = x0 + 0.5 * (xi + 1.0) * h
            e = E @ w
            out += 0.5 * h * wi * e[:, None] * (a.K(r, t_outer) - k_s)
    return out


# --- w = u (x) (omega (x)_S omega) -----------------------------------------------------------

def w_exact(a: AreaOperator, u: GridPath, Etilde, t: float, s: float, q: float) -> np.ndarray:
    """``-int_s^q omega_S(r,t) Etilde(u(r) - u(s), omega'(r)) dr`` in closed form.

    ``Etilde[i, k, j]`` maps ``x (x) y`` to ``sum Etilde[i,k,j] x_k y_j``.
    """
    if s <= 0:
        raise WeightedDomainError("w is defined for s > 0 only")
    if not s <= q <= t:
        raise GridError("need s <= q <= t")
    Et = np.asarray(Etilde, dtype=float)
    lam = a.lam
    lengths, slopes, starts = a.segments(s, q)
    us = u(s)
    out = np.zeros((a.op.dim, a.op.dim))
    k_end = a.K(q, t)
    # walk backwards so that K(segment end, t) is available by recursion
    for h, w, x0 in zip(lengths[::-1], slopes[::-1], starts[::-1]):
        c0 = u(x0) - us
        c1 = (u(x0 + h) - u(x0)) / h
        p1, p2, p3 = phi1(lam, h), phi2(lam, h), phi3(lam, h)
        e0 = np.einsum("ikj,k,j->i", Et, c0, w)
        e1 = np.einsum("ikj,k,j->i", Et, c1, w)
        out -= (e0 * p2 + e1 * p3)[:, None] * w[None, :] + (e0 * p1 + e1 * p2)[:, None] * k_end
        k_end = np.exp(-lam * h)[:, None] * k_end + p1[:, None] * w[None, :]
    return out


def w_apply(a: AreaOperator, u: GridPath, v: GridArea | None, t: float, s: float, q: float, Etilde,
            params=None, method: str = "exact", quad=None) -> np.ndarray:
    """``Etilde w(t, s, q)``.  ``method='fractional'`` evaluates the three-integral
    representation with fractional kernels (``v`` is the area of ``(u, omega)``)."""
    if s <= 0:
        raise WeightedDomainError("w is defined for s > 0 only")
    if method == "exact":
        return w_exact(a, u, Etilde, t, s, q)
    if method != "fractional":
        raise ValueError(f"unknown method {method!r}")
    if q == s:
        return np.zeros((a.op.dim, a.op.dim))
    from .fraccalc import DEFAULT_QUAD, w_fractional

    alpha = params.alpha if params is not None else 0.66
    return w_fractional(a, u, v, t, s, q, np.asarray(Etilde, dtype=float), alpha, quad or DEFAULT_QUAD)


# --- Chen residuals ---------------------------------------------------------------------------

def chen_residual(kind: str, s: float, r: float, t: float, *, u=None, omega=None, v=None,
                  a: AreaOperator | None = None, Etilde=None, q: float | None = None) -> float:
    """Norm of the defect of the Chen equality of the given kind.

    ``path``: ``v(s,r) + v(r,t) + (u(r)-u(s)) (x) (omega(t)-omega(r)) - v(s,t)``.
    ``twisted``: rank-3 defect of ``A(s,r) + A(r,t) + omega_S(r,t) S_omega(s,r) - A(s,t)``,
    measured over an orthonormal basis of ``L_2(V, V_kappa)``.
    ``w``: the generalized equality on ``s <= r <= q <= t`` (``q = t`` by default)::

        w(t,s,r) + w(t,r,q) - Etilde(u(r)-u(s), .)(omega (x)_S omega)(r,q)
            = w(t,s,q) + omega_S(q,t) S_omega(r,q) Etilde(u(r)-u(s), .)
    """
    if kind == "path":
        vsr, vrt, vst = v(s, r), v(r, t), v(s, t)
        corr = np.multiply.outer(u(r) - u(s), omega(t) - omega(r))
        return float(np.linalg.norm(vsr + vrt + corr - vst))
    if kind == "twisted":
        defect = (a.twisted(s, r) + a.twisted(r, t)
                  + np.einsum("ik,il->ikl", a.J(s, r), a.K(r, t)) - a.twisted(s, t))
        wts = a.op.weights(-2.0 * a.op.kappa_hat)
        return float(np.sqrt(np.sum(wts[:, None, None] * defect**2)))
    if kind == "w":
        q = t if q is None else q
        Et = np.asarray(Etilde, dtype=float)
        E_r = np.einsum("ikj,k->ij", Et, u(r) - u(s))
        lhs = (w_exact(a, u, Et, t, s, r) + w_exact(a, u, Et, t, r, q)
               - omega_S_omega_apply(a, r, q, E_r))
        rhs = w_exact(a, u, Et, t, s, q) + omega_S_apply(a, q, t, S_omega_apply(a, r, q, E_r))
        return float(np.linalg.norm(lhs - rhs))
    raise ValueError(f"unknown kind {kind!r}")
