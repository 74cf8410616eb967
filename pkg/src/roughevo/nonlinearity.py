"""Rank-structured diffusion coefficient ``G: V -> L_2(V, V_kappa)``.

Entry ``(i, j)`` of ``G(u)`` is ``g_ij(u) = mu_ij * phi((u, h_ij))`` with unit
directions ``h_ij``.  All derivatives are available in closed form, and the
bound constants are ``sup|phi^(m)|`` times the weighted norm of ``mu``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectralOperator, hs_norm

# (phi, phi', phi'', phi''') and sup|phi^(m)| for m = 0..4; sup is None when unbounded
_PROFILES = {
    "sin": (
        (np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)),
        (1.0, 1.0, 1.0, 1.0, 1.0),
    ),
    "tanh": (
        (
            np.tanh,
            lambda x: 1.0 / np.cosh(x) ** 2,
            lambda x: -2.0 * np.tanh(x) / np.cosh(x) ** 2,
            lambda x: (4.0 * np.tanh(x) ** 2 - 2.0 / np.cosh(x) ** 2) / np.cosh(x) ** 2,
        ),
        # second-derivative sup is 4/(3 sqrt 3); the fourth is a numerically located extremum
        (1.0, 1.0, 4.0 / (3.0 * np.sqrt(3.0)), 2.0, 4.085885502828204),
    ),
    "linear": (
        (lambda x: x, np.ones_like, np.zeros_like, np.zeros_like),
        (None, 1.0, 0.0, 0.0, 0.0),
    ),
}


class ArityError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class NonlinearityG:
    op: SpectralOperator
    mu: np.ndarray
    directions: np.ndarray
    profile: str = "sin"
    c_G: float = field(init=False)
    c_DG: float = field(init=False)
    c_D2G: float = field(init=False)
    c_D3G: float = field(init=False)

    def __post_init__(self):
        n = self.op.dim
        mu = np.asarray(self.mu, dtype=float)
        h = np.asarray(self.directions, dtype=float)
        if mu.shape != (n, n) or h.shape != (n, n, n):
            raise ConfigurationError("mu must be N x N and directions N x N x N")
        if self.profile not in _PROFILES:
            raise ConfigurationError(f"unknown profile {self.profile!r}")
        norms = np.linalg.norm(h, axis=2)
        if not np.allclose(norms[mu != 0], 1.0):
            raise ConfigurationError("directions h_ij must be unit vectors")
        weight = np.sum(self.op.weights(2.0 * self.op.kappa_hat)[:, None] * mu**2)
        if not np.isfinite(weight):
            raise ConfigurationError("weighted coefficient sum diverges")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "directions", h)
        m = float(np.sqrt(weight))
        sups = _PROFILES[self.profile][1]
        funcs = _PROFILES[self.profile][0]
        object.__setattr__(self, "c_G", hs_norm(mu * funcs[0](np.zeros((n, n))), self.op))
        object.__setattr__(self, "c_DG", sups[1] * m)
        object.__setattr__(self, "c_D2G", sups[2] * m)
        object.__setattr__(self, "c_D3G", sups[3] * m)

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def is_zero(self) -> bool:
        return not np.any(self.mu)

    def _arg(self, u):
        return np.einsum("...k,ijk->...ij", u, self.directions)

    def _phi(self, m, a):
        return _PROFILES[self.profile][0][m](a)

    def __call__(self, u) -> np.ndarray:
        """``G(u)`` as an ``N x N`` matrix (batched over leading axes of ``u``)."""
        u = np.asarray(u, dtype=float)
        return self.mu * self._phi(0, self._arg(u))

    def derivative(self, u) -> np.ndarray:
        """``DG(u)`` as a map ``V (x) V -> V_kappa``: array ``[..., i, k, j]`` where
        ``k`` is the differentiation direction and ``j`` the argument slot."""
        u = np.asarray(u, dtype=float)
        c = self.mu * self._phi(1, self._arg(u))
        return np.einsum("...ij,ijk->...ikj", c, self.directions)

    def second_derivative(self, u) -> np.ndarray:
        """``D^2 G(u)`` as ``[..., i, k1, k2, j]``."""
        u = np.asarray(u, dtype=float)
        c = self.mu * self._phi(2, self._arg(u))
        return np.einsum("...ij,ijk,ijl->...iklj", c, self.directions, self.directions)

    def apply(self, u, order: int = 0, directions=()) -> np.ndarray:
        """``D^m G(u)`` applied to ``m`` directions, as an ``N x N`` map.

        Entry ``(i, j)`` is ``D^m g_ij(u)(d_1, ..., d_m)``.
        """
        if order not in (0, 1, 2, 3):
            raise ArityError("order must be 0, 1, 2 or 3")
        if len(directions) != order:
            raise ArityError(f"order {order} needs {order} directions, got {len(directions)}")
        u = np.asarray(u, dtype=float)
        out = self.mu * self._phi(order, self._arg(u))
        for d in directions:
            out = out * self._arg(np.asarray(d, dtype=float))
        return out


def G_apply(G: NonlinearityG, u, order: int = 0, directions=()) -> np.ndarray:
    return G.apply(u, order, directions)


def zero_G(op: SpectralOperator) -> NonlinearityG:
    n = op.dim
    h = np.zeros((n, n, n))
    h[..., 0] = 1.0
    return NonlinearityG(op, np.zeros((n, n)), h, "sin")


def make_example_G(op: SpectralOperator, decay: float = 1.0, profile: str = "sin",
                   seed: int = 0, amplitude: float = 1.0) -> NonlinearityG:
    """``mu_ij = amplitude * (+/-)(i j)^(-decay) lambda_i^(-kappa)`` with random signs
    and random unit directions ``h_ij``, both drawn from ``seed``."""
    n = op.dim
    idx = np.arange(1, n + 1, dtype=float)
    with np.errstate(over="ignore"):
        base = np.outer(idx, idx) ** (-decay) * (op.eigenvalues ** (-op.kappa_hat))[:, None]
    if not np.all(np.isfinite(base)):
        raise ConfigurationError("coefficient magnitudes overflow for this decay")
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=(n, n))
    h = rng.standard_normal((n, n, n))
    h /= np.linalg.norm(h, axis=2, keepdims=True)
    return NonlinearityG(op, amplitude * signs * base, h, profile)


def single_term_G(op: SpectralOperator, profile: str = "sin", coeff: float = 1.0) -> NonlinearityG:
    """Only ``mu_11 = coeff`` with ``h_11 = e_1``."""
    n = op.dim
    mu = np.zeros((n, n))
    mu[0, 0] = coeff
    h = np.zeros((n, n, n))
    h[..., 0] = 1.0
    return NonlinearityG(op, mu, h, profile)


@dataclass
class BoundsReport:
    passed: list[bool]
    worst_ratio: list[float]
    max_lhs: list[float]

    @property
    def all_passed(self) -> bool:
        return all(self.passed)


def G_bounds_check(G: NonlinearityG, samples: int = 500, seed: int = 0,
                   scale: float = 1.0, rtol: float = 1e-12) -> BoundsReport:
    """Evaluate the seven Lipschitz/Taylor inequalities on random tuples.

    ``worst_ratio`` is ``max lhs / rhs`` per item (``<= 1`` means the bound held).
    """
    op = G.op
    rng = np.random.default_rng(seed)
    n = G.dim
    hs = lambda E: hs_norm(E, op)  # noqa: E731
    nrm = np.linalg.norm
    cG, c1, c2, c3 = G.c_G, G.c_DG, G.c_D2G, G.c_D3G
    worst = [0.0] * 7
    maxl = [0.0] * 7
    ok = [True] * 7

    def record(i, lhs, rhs):
        maxl[i] = max(maxl[i], lhs)
        if lhs > rhs * (1 + rtol) + 1e-14:
            ok[i] = False
        if rhs > 0:
            worst[i] = max(worst[i], lhs / rhs)
        elif lhs > 1e-14:
            worst[i] = np.inf

    for _ in range(samples):
        # mix of scales so both large and small increments are exercised
        sc = scale * 10.0 ** rng.uniform(-2, 1, size=4)
        u1, u2, v1, v2 = (sc[i] * rng.standard_normal(n) for i in range(4))
        d = u1 - v1 - (u2 - v2)
        G_u1, G_u2, G_v1, G_v2 = G(u1), G(u2), G(v1), G(v2)
        DG_u1, DG_u2, DG_v1, DG_v2 = (G.derivative(x) for x in (u1, u2, v1, v2))

        record(0, hs(G_u1), cG + c1 * nrm(u1))
        record(1, hs(G_u1 - G_v1), c1 * nrm(u1 - v1))
        record(2, hs(DG_u1 - DG_v1), c2 * nrm(u1 - v1))
        taylor_u = G_u1 - G_u2 - np.einsum("ikj,k->ij", DG_u2, u1 - u2)
        record(3, hs(taylor_u), c2 * nrm(u1 - u2) ** 2)
        record(4, hs(G_u1 - G_v1 - (G_u2 - G_v2)),
               c1 * nrm(d) + c2 * nrm(u1 - u2) * (nrm(u1 - v1) + nrm(u2 - v2)))
        record(5, hs(DG_u1 - DG_v1 - (DG_u2 - DG_v2)),
               c2 * nrm(d) + c3 * nrm(u1 - u2) * (nrm(u1 - v1) + nrm(u2 - v2)))
        taylor_v = G_v1 - G_v2 - np.einsum("ikj,k->ij", DG_v2, v1 - v2)
        record(6, hs(taylor_u - taylor_v),
               c2 * (nrm(u1 - u2) + nrm(v1 - v2)) * nrm(d)
               + c3 * nrm(v1 - v2) * nrm(u2 - v2) * (nrm(u1 - u2) + nrm(d)))
    return BoundsReport(ok, [float(x) for x in worst], [float(x) for x in maxl])
