"""Finite-mode realization of the state space, the generator and its semigroup.

Everything is diagonal in the eigenbasis ``(e_i)`` of ``-A``: a vector is an
array of ``N`` coefficients, a tensor of ``V (x) V`` is an ``N x N`` array and a
Hilbert-Schmidt map ``V -> V_kappa`` is an ``N x N`` matrix whose entry
``(i, j)`` is the ``e_i`` coefficient of the image of ``e_j``.  Coordinates are
always stored against the ``V`` basis; the ``kappa`` weights only enter norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class InvalidSpectrumError(ValueError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralOperator:
    """Diagonal generator ``A = -diag(eigenvalues)`` truncated to ``dim`` modes."""

    eigenvalues: np.ndarray
    kappa_hat: float = 0.75
    embedding_sq: float = field(init=False)

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise InvalidSpectrumError("eigenvalues must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise InvalidSpectrumError("eigenvalues must be finite and strictly positive")
        if np.any(np.diff(lam) < 0):
            raise InvalidSpectrumError("eigenvalues must be sorted nondecreasing")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        with np.errstate(over="raise"):
            try:
                c2 = float(np.sum(lam ** (-2.0 * self.kappa_hat)))
            except FloatingPointError as exc:
                raise InvalidSpectrumError("sum of lambda^(-2 kappa) overflows") from exc
        if not np.isfinite(c2):
            raise InvalidSpectrumError("sum of lambda^(-2 kappa) overflows")
        object.__setattr__(self, "embedding_sq", c2)

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def embedding_norm(self) -> float:
        """Hilbert-Schmidt norm of the embedding ``V_kappa -> V``."""
        return float(np.sqrt(self.embedding_sq))

    def decay(self, t) -> np.ndarray:
        """Diagonal of ``S(t)``; ``t`` may be an array (extra leading axes)."""
        t = np.asarray(t, dtype=float)
        return np.exp(-np.multiply.outer(t, self.eigenvalues))

    def weights(self, kappa: float) -> np.ndarray:
        return self.eigenvalues ** kappa


def make_spectral_operator(eigenvalues, kappa_hat: float = 0.75) -> SpectralOperator:
    return SpectralOperator(np.asarray(eigenvalues, dtype=float), float(kappa_hat))


def laplacian_operator(dim: int = 8, kappa_hat: float = 0.75) -> SpectralOperator:
    """Dirichlet-Laplacian-like spectrum ``lambda_i = i^2``."""
    return make_spectral_operator(np.arange(1, dim + 1, dtype=float) ** 2, kappa_hat)


def semigroup_apply(op: SpectralOperator, t: float, x, side: str = "vector") -> np.ndarray:
    """Apply ``S(t)`` to a vector, or ``S(t) (x) id`` to a tensor (``side='tensor-left'``)."""
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    x = np.asarray(x, dtype=float)
    d = op.decay(t)
    if side == "vector":
        _check_shape(x, (op.dim,))
        return d * x
    if side == "tensor-left":
        _check_shape(x, (op.dim, op.dim))
        return d[:, None] * x
    raise ValueError(f"unknown side {side!r}")


def frac_power_apply(op: SpectralOperator, kappa: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_shape(x, (op.dim,))
    return op.weights(kappa) * x


def vnorm(op: SpectralOperator, x, kappa: float = 0.0) -> float:
    """``|x|_{V_kappa}``."""
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(np.sum(op.weights(2.0 * kappa) * x * x)))


def hs_norm(E, op: SpectralOperator) -> float:
    """``||E||_{L_2(V, V_kappa)}`` for an ``N x N`` matrix, or for a map
    ``V (x) V -> V_kappa`` stored as ``N x N x N`` (output index first)."""
    E = np.asarray(E, dtype=float)
    if E.ndim < 2 or E.shape[0] != op.dim or any(n != op.dim for n in E.shape[1:]):
        raise DimensionError(f"shape {E.shape} does not match dimension {op.dim}")
    w = op.weights(2.0 * op.kappa_hat).reshape((-1,) + (1,) * (E.ndim - 1))
    return float(np.sqrt(np.sum(w * E * E)))


def tensor_norm(x) -> float:
    return float(np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2)))


def phi1(lam, h):
    """``int_0^h exp(-lam x) dx`` evaluated stably (``lam`` may be 0)."""
    lam = np.asarray(lam, dtype=float)
    h = np.asarray(h, dtype=float)
    x = lam * h
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    val = -np.expm1(-safe) / safe
    return h * np.where(small, 1.0 - x / 2.0, val)


def phi2(lam, h):
    """``int_0^h int_0^x exp(-lam (x - y)) dy dx`` evaluated stably."""
    lam = np.asarray(lam, dtype=float)
    h = np.asarray(h, dtype=float)
    x = lam * h
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, x)
    val = (safe + np.expm1(-safe)) / safe**2
    series = 0.5 - x / 6.0 + x**2 / 24.0 - x**3 / 120.0
    return h * h * np.where(small, series, val)


def _check_shape(x: np.ndarray, shape: tuple) -> None:
    if x.shape != shape:
        raise DimensionError(f"expected shape {shape}, got {x.shape}")


def phi3(lam, h):
    """``int_0^h (h - x) int_0^x exp(-lam y) dy dx`` evaluated stably."""
    lam = np.asarray(lam, dtype=float)
    h = np.asarray(h, dtype=float)
    x = lam * h
    small = np.abs(x) < 5e-2
    safe_lam = np.where(small, 1.0, lam)
    val = (0.5 * h * h - phi2(safe_lam, h)) / safe_lam
    series = sum((-x) ** n / math.factorial(n + 3) for n in range(8))
    return np.where(small, h**3 * series, val)
