"""Weyl-Marchaud fractional derivatives and the pathwise integrals built on them.

Real convention: the complex unit factors are dropped and every pairing of a
right derivative with a left derivative carries one factor ``-1``::

    R^a_{s+} f[r]   = (f(r)/(r-s)^a + a int_s^r (f(r)-f(q))/(r-q)^(1+a) dq) / Gamma(1-a)
    L^{1-a}_{t-} g[r] = ((g(r)-g(t))/(t-r)^(1-a)
                        + (1-a) int_r^t (g(r)-g(q))/(q-r)^(2-a) dq) / Gamma(a)
    int_s^t f dg    = - int_s^t R^a_{s+} f[r] L^{1-a}_{t-} g[r] dr

Weakly singular inner integrals use product integration: the numerator is
interpolated linearly on a mesh graded toward the singular point and the kernel
is integrated exactly per cell.  Breakpoints of grid paths are merged into the
mesh, so piecewise-linear operands are handled exactly.  Outer integrals use
Gauss-Legendre cells with Gauss-Jacobi rules on the two end cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma, roots_jacobi, roots_legendre

from .paths import GridPath


class DomainError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


class InvalidAreaError(ValueError):
    pass


class InconsistentPairError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    """Mesh parameters: cells per unit length (at least ``subdivisions`` per
    interval), grading exponent at singular endpoints, Gauss points per cell."""

    subdivisions: int = 32
    grading: float = 3.0
    points: int = 2

    def __post_init__(self):
        if self.subdivisions < 4:
            raise ConfigurationError("subdivisions must be at least 4")
        if self.grading < 1:
            raise ConfigurationError("grading exponent must be at least 1")
        if self.points < 1:
            raise ConfigurationError("need at least one Gauss point per cell")

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return QuadratureSpec(self.subdivisions * factor, self.grading, self.points)

    def cells(self, length: float) -> int:
        return max(self.subdivisions, math.ceil(self.subdivisions * length))


DEFAULT_QUAD = QuadratureSpec()


@dataclass(frozen=True)
class FracDerivSample:
    r: float
    value: np.ndarray
    order: float
    anchor: float
    side: str
    accurate: bool = True


# --- operands -----------------------------------------------------------------

def as_function(f):
    """``(callable, breakpoints)`` for a grid path, a vectorized callable or a
    ``(callable, breakpoints)`` pair."""
    if isinstance(f, tuple):
        return f
    if isinstance(f, GridPath):
        return f, f.times
    if callable(f):
        return f, None
    raise TypeError("operand must be a GridPath or a callable")


def _eval(func, q):
    return np.asarray(func(np.asarray(q, dtype=float)), dtype=float)


# --- meshes ---------------------------------------------------------------------

def graded_nodes(a: float, b: float, n: int, grading: float, end: str) -> np.ndarray:
    """``n + 1`` nodes on ``[a, b]`` clustered toward ``end`` ('left', 'right', 'both')."""
    j = np.arange(n + 1) / n
    if end == "right":
        x = b - (b - a) * (1.0 - j) ** grading
    elif end == "left":
        x = a + (b - a) * j**grading
    elif end == "both":
        m = max(n // 2, 2)
        k = np.arange(m + 1) / m
        mid = 0.5 * (a + b)
        left = a + (mid - a) * k**grading
        right = b - (b - mid) * k[::-1] ** grading
        x = np.concatenate([left, right[1:]])
    else:
        raise ValueError(f"unknown end {end!r}")
    x[0], x[-1] = a, b
    return x


def _merge(nodes: np.ndarray, breaks, a: float, b: float) -> np.ndarray:
    if breaks is not None:
        inner = breaks[(breaks > a) & (breaks < b)]
        nodes = np.union1d(nodes, inner)
    # drop near-duplicates so cell widths stay well conditioned
    scale = max(abs(a), abs(b), b - a)
    keep = np.concatenate([[True], np.diff(nodes) > 1e-13 * scale])
    nodes = nodes[keep]
    nodes[-1] = b
    return nodes


def _mesh(a, b, quad, end, breaks):
    return _merge(graded_nodes(a, b, quad.cells(b - a), quad.grading, end), breaks, a, b)


def kernel_weights(x: np.ndarray, a: float) -> np.ndarray:
    """Product-integration weights for ``int psi(x) x^(-1-a) dx`` over
    ``[0, x[0]]`` with ``psi`` linear between the nodes ``x`` (descending,
    ``x[-1] = 0``) and ``psi(0) = 0``; one weight per node ``x[:-1]``."""
    x0, x1 = x[:-1], x[1:]
    d = x0 - x1
    w = np.zeros(len(x) - 1)
    pos = x1 > 0
    m1 = (x0 ** (1 - a) - x1 ** (1 - a)) / (1 - a)
    m0 = np.where(pos, (np.where(pos, x1, 1.0) ** (-a) - x0 ** (-a)) / a, 0.0)
    # contribution of a cell to its far node (x0) and its near node (x1)
    far = np.where(pos, (m1 - x1 * m0) / d, m1 / d)
    near = np.where(pos, (x0 * m0 - m1) / d, 0.0)
    w += far
    w[1:] += near[:-1]
    return w


@lru_cache(maxsize=64)
def _gauss(n: int, a: float = 0.0, b: float = 0.0):
    if a == 0.0 and b == 0.0:
        return roots_legendre(n)
    return roots_jacobi(n, a, b)


def _half_rule(anchor, length, sign, exponent, n, p, breaks):
    """Gauss rule on ``anchor + sign * [0, length]`` in the variable ``y`` with
    ``|r - anchor| = y^m``, ``m = 1/(1-exponent)``."""
    m = 1.0 / (1.0 - exponent)
    y = np.linspace(0.0, length ** (1.0 / m), n + 1)
    if breaks is not None:
        d = sign * (breaks - anchor)
        d = d[(d > 0) & (d <= length * (1 + 1e-12))]
        if d.size:
            yb = d ** (1.0 / m)
            y = _merge(np.union1d(y, yb), None, 0.0, y[-1])
            y = _merge(np.union1d(y, _kink_nodes(y, yb)), None, 0.0, y[-1])
    xg, wg = _gauss(p)
    h = np.diff(y)
    ys = (y[:-1, None] + 0.5 * (xg + 1.0) * h[:, None]).ravel()
    wy = (0.5 * h[:, None] * wg).ravel()
    return anchor + sign * ys**m, m * ys ** (m - 1.0) * wy


def _kink_nodes(y: np.ndarray, kinks: np.ndarray, levels: int = 5, ratio: float = 0.15) -> np.ndarray:
    """Geometric nodes toward each interior kink: integrands of piecewise-linear
    operands have ``|r - kink|^a`` terms there, which uniform Gauss cells resolve
    only at a low algebraic rate."""
    idx = np.searchsorted(y, kinks)
    below = kinks - y[np.maximum(idx - 1, 0)]
    above = y[np.minimum(idx + 1, len(y) - 1)] - kinks
    f = ratio ** np.arange(1, levels + 1)
    pts = np.concatenate([(kinks[:, None] - below[:, None] * f).ravel(),
                          (kinks[:, None] + above[:, None] * f).ravel()])
    return pts[(pts > y[0]) & (pts < y[-1])]


def outer_rule(s: float, t: float, quad: QuadratureSpec, left_exp: float = 0.0,
               right_exp: float = 0.0, breaks=None):
    """Nodes and weights for ``int_s^t F(r) dr`` where ``F`` may blow up like
    ``(r-s)^(-left_exp)`` and ``(t-r)^(-right_exp)``.  Each half of the interval
    is mapped by a power substitution that cancels the endpoint singularity."""
    half = 0.5 * (t - s)
    n = max(quad.cells(t - s) // 2, 2)
    nl, wl = _half_rule(s, half, 1.0, left_exp, n, quad.points, breaks)
    nr, wr = _half_rule(t, half, -1.0, right_exp, n, quad.points, breaks)
    return np.concatenate([nl, nr[::-1]]), np.concatenate([wl, wr[::-1]])


# --- derivatives -------------------------------------------------------------------

def _gauss_singular_sum(psi_func, near, far, a, quad):
    """``int psi(q) |q - near|^(-1-a) dq`` between ``near`` and ``far`` for smooth
    ``psi`` vanishing at ``near``.  The substitution ``|q - near| = y^m`` with
    ``m = 1/(1-a)`` removes the weak singularity; the ``y`` range is split into
    uniform cells with Gauss-Legendre points (a mesh graded with exponent ``m``)."""
    length = abs(far - near)
    m = 1.0 / (1.0 - a)
    n = quad.cells(length)
    y = np.linspace(0.0, length ** (1.0 / m), n + 1)
    xg, wg = _gauss(quad.points)
    h = np.diff(y)
    ys = (y[:-1, None] + 0.5 * (xg + 1.0) * h[:, None]).ravel()
    wy = (0.5 * h[:, None] * wg).ravel()
    # dx = m y^(m-1) dy and x^(-1-a) = y^(-m(1+a))
    ws = m * wy * ys ** (m - 1.0 - m * (1.0 + a))
    sign = 1.0 if far > near else -1.0
    return np.tensordot(ws, psi_func(near + sign * ys**m), axes=(0, 0))


def _right_sum(psi_func, s, alpha, r, quad, breaks):
    """``int_s^r psi(q) (r-q)^(-1-alpha) dq`` with ``psi(r) = 0``."""
    if breaks is None:
        return _gauss_singular_sum(psi_func, r, s, alpha, quad)
    q = _mesh(s, r, quad, "right", breaks)
    w = kernel_weights(r - q, alpha)
    vals = psi_func(q[:-1])
    return np.tensordot(w, vals, axes=(0, 0))


def _left_sum(psi_func, r, one_minus_alpha, t, quad, breaks):
    """``int_r^t psi(q) (q-r)^(-2+alpha) dq`` with ``psi(r) = 0``."""
    if breaks is None:
        return _gauss_singular_sum(psi_func, r, t, one_minus_alpha, quad)
    q = _mesh(r, t, quad, "left", breaks)[::-1]
    w = kernel_weights(q - r, one_minus_alpha)
    vals = psi_func(q[:-1])
    return np.tensordot(w, vals, axes=(0, 0))


def _check_order(alpha):
    if not 0 < alpha < 1:
        raise DomainError(f"order must lie in (0, 1), got {alpha}")


def right_value(f, s: float, alpha: float, r: float, quad: QuadratureSpec = DEFAULT_QUAD):
    """``R^alpha_{s+} f[r]`` as an array."""
    _check_order(alpha)
    if not r > s:
        raise DomainError(f"need s < r, got s={s}, r={r}")
    func, breaks = as_function(f)
    fr = _eval(func, r)
    integral = _right_sum(lambda q: fr - _eval(func, q), s, alpha, r, quad, breaks)
    return (fr * (r - s) ** (-alpha) + alpha * integral) / gamma(1 - alpha)


def left_value(f, t: float, one_minus_alpha: float, r: float,
               quad: QuadratureSpec = DEFAULT_QUAD, subtract_end: bool = True):
    """``L^{1-alpha}_{t-} f[r]``; with ``subtract_end=False`` the value ``f(t)``
    is taken as zero (derivative of ``f`` rather than of ``f - f(t)``)."""
    _check_order(one_minus_alpha)
    if not r < t:
        raise DomainError(f"need r < t, got r={r}, t={t}")
    a = 1.0 - one_minus_alpha
    func, breaks = as_function(f)
    fr = _eval(func, r)
    ft = _eval(func, t) if subtract_end else 0.0
    integral = _left_sum(lambda q: fr - _eval(func, q), r, one_minus_alpha, t, quad, breaks)
    return ((fr - ft) * (t - r) ** (-one_minus_alpha) + one_minus_alpha * integral) / gamma(a)


def _rough_flag(func, anchor, r, alpha, side):
    """Flag operands whose increments near ``r`` decay slower than ``|r-q|^alpha``."""
    span = abs(r - anchor)
    ds = span * np.array([2.0**-12, 2.0**-6])
    q = r - ds if side == "right" else r + ds
    fr = _eval(func, r)
    inc = [float(np.linalg.norm(_eval(func, x) - fr)) for x in q]
    if inc[1] == 0.0:
        return True
    if inc[0] == 0.0:
        return True
    slope = math.log(inc[1] / inc[0]) / math.log(ds[1] / ds[0])
    return slope >= alpha - 1e-9


def frac_deriv_right(f, s: float, alpha: float, r: float,
                     quad: QuadratureSpec = DEFAULT_QUAD) -> FracDerivSample:
    value = right_value(f, s, alpha, r, quad)
    ok = bool(np.all(np.isfinite(value))) and _rough_flag(as_function(f)[0], s, r, alpha, "right")
    return FracDerivSample(r, value, alpha, s, "right", ok)


def frac_deriv_left(f, t: float, one_minus_alpha: float, r: float,
                    quad: QuadratureSpec = DEFAULT_QUAD) -> FracDerivSample:
    value = left_value(f, t, one_minus_alpha, r, quad)
    ok = bool(np.all(np.isfinite(value))) and _rough_flag(
        as_function(f)[0], t, r, one_minus_alpha, "left")
    return FracDerivSample(r, value, one_minus_alpha, t, "left", ok)


def compensated_value(G, u, s: float, alpha: float, r: float,
                      quad: QuadratureSpec = DEFAULT_QUAD, semigroup=None):
    """Compensated derivative of ``G(u(.))`` at ``r``; with ``semigroup=(op, t)``
    the operand is ``S(t - .) G(u(.))`` and the compensation is ``S(t-q) DG(u(q))``."""
    _check_order(alpha)
    if not r > s:
        raise DomainError(f"need s < r, got s={s}, r={r}")
    func, breaks = as_function(u)
    ur = _eval(func, r)
    Gr = G(ur)
    if semigroup is not None:
        op, t = semigroup
        Gr = op.decay(t - r)[:, None] * Gr

    def psi(q):
        uq = _eval(func, q)
        comp = G(uq) + np.einsum("qikj,qk->qij", G.derivative(uq), ur[None, :] - uq)
        if semigroup is not None:
            comp = op.decay(t - q)[:, :, None] * comp
        return Gr[None] - comp

    integral = _right_sum(psi, s, alpha, r, quad, breaks)
    return (Gr * (r - s) ** (-alpha) + alpha * integral) / gamma(1 - alpha)


def compensated_deriv(G, u, s: float, alpha: float, r: float,
                      quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    return compensated_value(G, u, s, alpha, r, quad)


# --- tensor derivatives -------------------------------------------------------------

def _area_function(v):
    """``(callable (r, q_array) -> (n, N, N), breakpoints)`` for a grid area or callable."""
    from .areas import GridArea

    if isinstance(v, GridArea):
        return v.pointwise, v.grid.times
    if isinstance(v, tuple):
        return v
    if callable(v):
        return v, None
    raise TypeError("area operand must be a GridArea or a callable")


def tensor_deriv(v, t: float, one_minus_alpha: float, r: float,
                 quad: QuadratureSpec = DEFAULT_QUAD, diag_tol: float = 1e-12) -> np.ndarray:
    """``(v(r,t)/(t-r)^(1-alpha) + (1-alpha) int_r^t v(r,q)/(q-r)^(2-alpha) dq) / Gamma(alpha)``."""
    _check_order(one_minus_alpha)
    if not r < t:
        raise DomainError(f"need r < t, got r={r}, t={t}")
    vf, breaks = _area_function(v)
    ends = vf(r, np.array([r, t]))
    if np.max(np.abs(ends[0])) > diag_tol:
        raise InvalidAreaError("area does not vanish on the diagonal")
    vrt = ends[1]
    integral = _left_sum(lambda q: vf(r, q), r, one_minus_alpha, t, quad, breaks)
    a = 1.0 - one_minus_alpha
    return (vrt * (t - r) ** (-one_minus_alpha) + one_minus_alpha * integral) / gamma(a)


def iterated_tensor_deriv(v, t: float, alpha: float, r: float,
                          quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """``L^{1-alpha}_{t-}`` applied to ``theta -> D v[theta]`` (no end subtraction)."""
    oma = 1.0 - alpha
    _check_order(oma)
    if not r < t:
        raise DomainError(f"need r < t, got r={r}, t={t}")
    _, breaks = _area_function(v)

    def g(thetas):
        out = []
        for th in np.atleast_1d(thetas):
            out.append(np.zeros_like(g_r) if th >= t else tensor_deriv(v, t, oma, th, quad))
        return np.array(out)

    g_r = tensor_deriv(v, t, oma, r, quad)
    integral = _left_sum(lambda q: g_r[None] - g(q), r, oma, t, quad, breaks)
    return (g_r * (t - r) ** (-oma) + oma * integral) / gamma(alpha)


# --- integrals ----------------------------------------------------------------------

_PAIRINGS = {
    "mul": lambda a, b: a * b,
    "outer": lambda a, b: np.multiply.outer(a, b),
    "matvec": lambda a, b: a @ b,
}


def young_integral(u, omega, s: float, t: float, alpha: float,
                   quad: QuadratureSpec = DEFAULT_QUAD, pairing: str = "mul",
                   exponents: tuple[float, float] | None = None):
    """``int_s^t u d omega = - int R^alpha_{s+} u[r] L^{1-alpha}_{t-} omega[r] dr``.

    ``exponents`` are the declared Hölder exponents ``(beta_u, beta_omega)``;
    Young's condition requires ``beta_u > alpha`` and ``alpha + beta_omega > 1``.
    """
    _check_order(alpha)
    if exponents is not None:
        bu, bw = exponents
        if not (bu > alpha and alpha + bw > 1):
            raise ConfigurationError(
                f"exponents (beta_u={bu}, beta_omega={bw}) violate Young's condition for alpha={alpha}")
    if not s < t:
        raise DomainError("need s < t")
    pair = _PAIRINGS[pairing]
    breaks = _breaks(u, omega)
    nodes, weights = outer_rule(s, t, quad, alpha, 1.0 - alpha, breaks)
    total = 0.0
    for r, w in zip(nodes, weights):
        total = total + w * pair(right_value(u, s, alpha, r, quad),
                                 left_value(omega, t, 1.0 - alpha, r, quad))
    return -total


def _breaks(*objs):
    pts = [o.times for o in objs if isinstance(o, GridPath)]
    return np.unique(np.concatenate(pts)) if pts else None


def rough_integral(G, u, v, omega, s: float, t: float, alpha: float,
                   quad: QuadratureSpec = DEFAULT_QUAD, semigroup=None, chen_check=None):
    """``int_s^t G(u) d omega`` for a path-area pair ``(u, v)``::

        - int comp^alpha_{s+} G(u)[r] L^{1-alpha}_{t-} omega[r] dr
        + int R^{2alpha-1}_{s+} DG(u)[r] : LL v(., t)[r] dr

    With ``semigroup=(op, tau)`` the integrand is ``S(tau - .) G(u(.))``.
    ``chen_check`` is an optional callable returning the Chen residual of the
    pair; values above ``1e-8`` raise :class:`InconsistentPairError`.
    """
    if chen_check is not None:
        res = chen_check()
        if res > 1e-8:
            raise InconsistentPairError(f"Chen residual {res:.3e} for the path-area pair")
    if G.is_zero:
        return np.zeros(G.dim)
    ufunc, _ = as_function(u)
    breaks = _breaks(u, omega)
    nodes, weights = outer_rule(s, t, quad, alpha, 1.0 - alpha, breaks)
    order2 = 2.0 * alpha - 1.0
    total = np.zeros(G.dim)
    for r, w in zip(nodes, weights):
        comp = compensated_value(G, u, s, alpha, r, quad, semigroup)
        lw = left_value(omega, t, 1.0 - alpha, r, quad)
        if semigroup is None:
            dg = lambda q: G.derivative(_eval(ufunc, q))  # noqa: E731
        else:
            op, tau = semigroup
            dg = lambda q: op.decay(tau - np.asarray(q))[..., :, None, None] * G.derivative(  # noqa: E731
                _eval(ufunc, q))
        d2 = right_value(dg, s, order2, r, quad)
        llv = iterated_tensor_deriv(v, t, alpha, r, quad)
        total = total - w * (comp @ lw) + w * np.einsum("ikj,kj->i", d2, llv)
    return total


def byparts_residual(f, g, s: float, t: float, alpha: float,
                     quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``|int R^alpha_{s+} f[r] g(r) dr - int f(r) L^alpha_{t-} g[r] dr|`` where
    ``L^alpha_{t-}`` is the Marchaud left derivative of order ``alpha`` (no end
    subtraction)."""
    fun_f, _ = as_function(f)
    fun_g, _ = as_function(g)
    nodes, weights = outer_rule(s, t, quad, alpha, alpha)
    lhs = sum(w * right_value(f, s, alpha, r, quad) * _eval(fun_g, r) for r, w in zip(nodes, weights))
    rhs = sum(w * _eval(fun_f, r) * marchaud_left(g, t, alpha, r, quad) for r, w in zip(nodes, weights))
    return float(np.max(np.abs(lhs - rhs)))


def marchaud_left(g, t: float, alpha: float, r: float, quad: QuadratureSpec = DEFAULT_QUAD):
    """``(g(r)/(t-r)^alpha + alpha int_r^t (g(r)-g(q))/(q-r)^(1+alpha) dq) / Gamma(1-alpha)``."""
    _check_order(alpha)
    func, breaks = as_function(g)
    gr = _eval(func, r)
    integral = _left_sum(lambda q: gr - _eval(func, q), r, alpha, t, quad, breaks)
    return (gr * (t - r) ** (-alpha) + alpha * integral) / gamma(1 - alpha)


def w_fractional(a, u, v, t: float, s: float, q: float, Etilde: np.ndarray, alpha: float,
                 quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """Three-integral representation of ``Etilde w(t, s, q)`` for the integrand
    ``Y(r) = omega_S(r,t) Etilde(u(r) - u(s), .)``::

        w = - int Y d omega
          = int comp^alpha Y[r] L omega[r] dr
            - int R^{2alpha-1} X[r] : LL (omega_S(t) (x) omega)(., q)[r] dr
            - int R^{2alpha-1} K(., t)[r] Etilde : LL v(., q)[r] dr

    with ``X(r) = Etilde(u(r) - u(s), .)``; the compensation removes the two
    first-order increments of ``Y``.
    """
    ufunc, ubreaks = as_function(u)
    breaks = np.union1d(a.grid.times, ubreaks) if ubreaks is not None else a.grid.times
    us = _eval(ufunc, s)

    def X(theta):
        return np.einsum("ikj,...k->...ij", Etilde, _eval(ufunc, theta) - us)

    def Kt(theta):
        vals = a.K_to(t, theta)
        return vals[0] if np.ndim(theta) == 0 else vals

    def comp_value(r):
        ur, kr = _eval(ufunc, r), Kt(np.array([r]))[0]
        Yr = np.einsum("il,ij->ilj", kr, X(r))

        def psi(theta):
            du = ur[None] - _eval(ufunc, theta)
            dk = kr[None] - Kt(theta)
            return np.einsum("nil,ikj,nk->nilj", dk, Etilde, du)

        integral = _right_sum(psi, s, alpha, r, quad, breaks)
        return (Yr * (r - s) ** (-alpha) + alpha * integral) / gamma(1 - alpha)

    phi_area = (lambda th, qs: a.oS_rows(t, th, qs), breaks)
    order2 = 2.0 * alpha - 1.0
    nodes, weights = outer_rule(s, q, quad, alpha, 1.0 - alpha, breaks)
    total = np.zeros((a.op.dim, a.op.dim))
    for r, wgt in zip(nodes, weights):
        lw = left_value(a.driver, q, 1.0 - alpha, r, quad)
        t1 = np.einsum("ilj,j->il", comp_value(r), lw)
        dx = right_value((X, breaks), s, order2, r, quad)
        t2 = np.einsum("ij,ijl->il", dx, iterated_tensor_deriv(phi_area, q, alpha, r, quad))
        dk = right_value((Kt, breaks), s, order2, r, quad)
        t3 = np.einsum("ikj,kj,il->il", Etilde, iterated_tensor_deriv(v, q, alpha, r, quad), dk)
        total += wgt * (t1 - t2 - t3)
    return total
