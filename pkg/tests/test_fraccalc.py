import numpy as np
import pytest
from scipy.integrate import quad as squad
from scipy.special import gamma

from roughevo.fraccalc import (ConfigurationError, DomainError, InconsistentPairError,
                               InvalidAreaError, QuadratureSpec, byparts_residual, frac_deriv_right,
                               iterated_tensor_deriv, left_value, right_value, rough_integral,
                               tensor_deriv, young_integral)
from roughevo.nonlinearity import single_term_G
from roughevo.paths import GridPath, TimeGrid
from roughevo.spectral import laplacian_operator

ALPHA = 0.66


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
def test_power_function_derivatives(p):
    # Marchaud derivatives of powers vanishing at the anchor
    r, t = 0.3, 1.0
    left = left_value(lambda q: (t - q) ** p, t, 1 - ALPHA, r)
    assert left == pytest.approx(gamma(p + 1) / gamma(p + ALPHA) * (t - r) ** (p + ALPHA - 1), rel=1e-4)
    right = right_value(lambda q: q**p, 0.0, ALPHA, 0.7)
    assert right == pytest.approx(gamma(p + 1) / gamma(p + 1 - ALPHA) * 0.7 ** (p - ALPHA), rel=1e-4)


def test_young_integral_of_smooth_functions():
    val = young_integral(np.exp, np.sin, 0.1, 0.9, ALPHA)
    exact = squad(lambda q: np.exp(q) * np.cos(q), 0.1, 0.9)[0]
    assert val == pytest.approx(exact, rel=1e-5)


def test_young_integral_on_kinked_grid_path_converges():
    grid = TimeGrid(1.0, 8)
    t = grid.times
    u = GridPath(grid, 1.0 + 0.0 * t)
    w = GridPath(grid, np.abs(t - 0.5))
    exact = w.values[-1, 0] - w.values[0, 0]
    errs = [abs(young_integral(u, w, 0.0, 1.0, ALPHA, QuadratureSpec(n))[0] - exact) for n in (32, 128)]
    assert errs[0] < 1e-4
    assert errs[1] < errs[0] / 4


def test_young_condition_and_domain_errors():
    with pytest.raises(ConfigurationError):
        young_integral(np.sin, np.cos, 0.0, 1.0, ALPHA, exponents=(0.4, 0.45))
    with pytest.raises(DomainError):
        young_integral(np.sin, np.cos, 0.5, 0.5, ALPHA)
    with pytest.raises(DomainError):
        right_value(np.sin, 0.5, ALPHA, 0.2)


def test_rough_integral_matches_smooth_oracle():
    op = laplacian_operator(1)
    G = single_term_G(op, "sin", 1.0)
    u = lambda q: (0.3 + 0.8 * np.asarray(q))[..., None]  # noqa: E731
    om = lambda q: (np.asarray(q) ** 2)[..., None]  # noqa: E731
    v = lambda r, qs: (0.8 * (2 * (np.asarray(qs) ** 3 - r**3) / 3  # noqa: E731
                              - r * (np.asarray(qs) ** 2 - r**2)))[:, None, None]
    val = rough_integral(G, u, v, om, 0.0, 1.0, ALPHA)
    exact = squad(lambda q: np.sin(0.3 + 0.8 * q) * 2 * q, 0, 1)[0]
    assert val[0] == pytest.approx(exact, rel=1e-5)
    with pytest.raises(InconsistentPairError):
        rough_integral(G, u, v, om, 0.0, 1.0, ALPHA, chen_check=lambda: 1e-3)


def test_tensor_derivative_rejects_nonzero_diagonal():
    bad = lambda r, qs: (1.0 + np.asarray(qs) - r)[:, None, None]  # noqa: E731
    with pytest.raises(InvalidAreaError):
        tensor_deriv(bad, 1.0, 1 - ALPHA, 0.2)


def test_iterated_derivative_of_homogeneous_area():
    # v(r, q) = (q - r)^2 gives a closed form by scaling
    v = lambda r, qs: ((np.asarray(qs) - r) ** 2)[:, None, None]  # noqa: E731
    oma = 1 - ALPHA
    d1 = tensor_deriv(v, 1.0, oma, 0.4)[0, 0]
    closed = (1 + oma / (1 + ALPHA)) / gamma(ALPHA) * 0.6 ** (1 + ALPHA)
    assert d1 == pytest.approx(closed, rel=1e-6)
    a = iterated_tensor_deriv(v, 1.0, ALPHA, 0.4)[0, 0]
    b = iterated_tensor_deriv(v, 1.0, ALPHA, 0.7)[0, 0]
    assert a / b == pytest.approx((0.6 / 0.3) ** (2 * ALPHA), rel=1e-4)


def test_integration_by_parts():
    f = lambda q: np.cos(2 * q) + q  # noqa: E731
    g = lambda q: np.exp(-q) * np.sin(3 * q)  # noqa: E731
    assert byparts_residual(f, g, 0.1, 0.8, ALPHA, QuadratureSpec(64, 3.0, 3)) < 1e-6


def test_roughness_flag():
    assert frac_deriv_right(np.sin, 0.0, ALPHA, 0.5).accurate
    assert not frac_deriv_right(lambda q: np.abs(q - 0.5) ** 0.3, 0.0, ALPHA, 0.5).accurate


def test_quadrature_spec_validation():
    with pytest.raises(ConfigurationError):
        QuadratureSpec(subdivisions=2)
    assert QuadratureSpec().refined().subdivisions == 64
