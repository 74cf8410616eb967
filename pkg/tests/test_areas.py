import numpy as np
import pytest

from roughevo.areas import (AreaOperator, GridArea, NeedsInterpolationError, WeightedDomainError,
                            area_norm, chen_residual, oS_kernel, omega_S_tensor_omega_apply,
                            path_area, smooth_oS_oracle, w_apply, w_exact, zero_area)
from roughevo.fraccalc import QuadratureSpec
from roughevo.paths import GridError, GridPath, TimeGrid
from roughevo.spectral import laplacian_operator


def _smooth(grid, dim, shift=0.0):
    t = grid.times
    return GridPath(grid, np.stack([np.sin((i + 1) * 2.0 * t + shift) / (i + 1) for i in range(dim)], 1))


def _fine(path, per_cell):
    """Midpoints, widths and slopes of a uniform refinement of a piecewise-linear path."""
    g = path.grid
    x = np.linspace(0.0, g.horizon, g.cells * per_cell + 1)
    mid = 0.5 * (x[1:] + x[:-1])
    k = np.minimum((mid / g.h).astype(int), g.cells - 1)
    return mid, np.diff(x), path.slopes[k]


def test_path_area_against_brute_force(fbm_pair):
    omega, u = fbm_pair
    v = path_area(u, omega)
    mid, dx, dw = _fine(omega, 200)
    for s, t in [(0.0, 1.0), (0.25, 0.5), (0.125, 0.875)]:
        m = (mid > s) & (mid < t)
        brute = np.einsum("nk,nl->kl", u(mid[m]) - u(s), dw[m] * dx[m, None])
        assert np.allclose(v(s, t), brute, atol=1e-5)


def test_pointwise_area_off_grid(fbm_pair):
    omega, u = fbm_pair
    v = path_area(u, omega)
    r, qs = 0.3, np.array([0.41, 0.77, 1.0])
    vals = v.pointwise(r, qs)
    mid, dx, dw = _fine(omega, 400)
    for q, val in zip(qs, vals):
        m = (mid > r) & (mid < q)
        brute = np.einsum("nk,nl->kl", u(mid[m]) - u(r), dw[m] * dx[m, None])
        assert np.allclose(val, brute, atol=2e-3)
    # Chen across the off-grid point is exact
    chen = vals[0] + v.pointwise(0.41, [1.0])[0] + np.multiply.outer(u(0.41) - u(r), omega(1.0) - omega(0.41))
    assert np.allclose(chen, vals[2], atol=1e-13)


def test_kernels_against_double_quadrature():
    op = laplacian_operator(2)
    grid = TimeGrid(1.0, 4)
    w = _smooth(grid, 2)
    a = AreaOperator(w, op)
    mid, dx, dw = _fine(w, 400)
    s, t = 0.1, 0.9
    m = (mid > s) & (mid < t)
    x, d, sl = mid[m], dx[m], dw[m] * dx[m, None]
    lam = op.eigenvalues
    K = np.einsum("in,nl->il", np.exp(-np.outer(lam, x - s)), sl)
    J = np.einsum("in,nk->ik", np.exp(-np.outer(lam, t - x)), sl)
    diff = x[None, :] - x[:, None]  # xi - r, rows r
    mask = diff > 0
    kern = np.exp(-lam[:, None, None] * np.where(mask, diff, 0.0)) * mask
    A = np.einsum("irx,rk,xl->ikl", kern, sl, sl) + 0.5 * np.einsum("rk,rl->kl", sl, sl)[None]
    assert np.allclose(a.K(s, t), K, atol=2e-5)
    assert np.allclose(a.J(s, t), J, atol=2e-5)
    assert np.allclose(a.A(s, t), A, atol=2e-4)


def test_twisted_chen_off_grid(area_op):
    for s, r, t in [(0.0, 0.3, 1.0), (0.11, 0.5, 0.73), (0.25, 0.25, 0.5)]:
        assert chen_residual("twisted", s, r, t, a=area_op) < 1e-12


def test_oS_kernel_matches_direct_quadrature(op4):
    w = _smooth(TimeGrid(1.0, 8), 4)
    a = AreaOperator(w, op4)
    E = np.random.default_rng(0).standard_normal((4, 4))
    direct = smooth_oS_oracle(a, 1.0, 0.2, 0.7, E)
    via_kernel = np.einsum("ik,ikl->il", E, oS_kernel(a, 1.0, 0.2, 0.7))
    assert np.allclose(direct, via_kernel, atol=1e-10)
    rows = a.oS_rows(1.0, 0.2, [0.45, 0.7])
    assert np.allclose(rows[1], oS_kernel(a, 1.0, 0.2, 0.7), atol=1e-13)
    frac = omega_S_tensor_omega_apply(a, 1.0, 0.2, 0.7, E, method="fractional")
    assert np.allclose(frac, via_kernel, rtol=1e-3, atol=1e-4 * np.abs(via_kernel).max())


def test_w_exact_against_brute_force():
    op = laplacian_operator(2)
    grid = TimeGrid(1.0, 8)
    w = _smooth(grid, 2)
    u = _smooth(grid, 2, shift=1.0)
    a = AreaOperator(w, op)
    Et = np.random.default_rng(1).standard_normal((2, 2, 2))
    t, s, q = 1.0, 0.2, 0.65
    mid, dx, dw = _fine(w, 400)
    m = (mid > s) & (mid < q)
    x = mid[m]
    K = a.K_to(t, x)
    e = np.einsum("ikj,nk,nj->ni", Et, u(x) - u(s), dw[m] * dx[m, None])
    brute = -np.einsum("ni,nil->il", e, K)
    assert np.allclose(w_exact(a, u, Et, t, s, q), brute, atol=1e-5)


def test_w_chen_and_fractional_representation():
    op = laplacian_operator(2)
    grid = TimeGrid(1.0, 8)
    w = _smooth(grid, 2)
    u = _smooth(grid, 2, shift=1.0)
    a = AreaOperator(w, op)
    Et = np.random.default_rng(2).standard_normal((2, 2, 2))
    assert chen_residual("w", 0.125, 0.5, 1.0, a=a, u=u, Etilde=Et, q=0.75) < 1e-13
    exact = w_apply(a, u, None, 1.0, 0.25, 0.75, Et)
    frac = w_apply(a, u, path_area(u, w), 1.0, 0.25, 0.75, Et, method="fractional",
                   quad=QuadratureSpec(32))
    assert np.linalg.norm(frac - exact) / np.linalg.norm(exact) < 5e-3


def test_domain_errors(area_op, fbm_pair):
    omega, u = fbm_pair
    with pytest.raises(WeightedDomainError):
        w_exact(area_op, u, np.zeros((4, 4, 4)), 1.0, 0.0, 0.5)
    with pytest.raises(GridError):
        area_op.J(0.6, 0.2)
    sample = GridPath(omega.grid, omega.values, interpolation="sample-only")
    with pytest.raises(NeedsInterpolationError):
        AreaOperator(sample, area_op.op)


def test_grid_area_storage(fbm_pair, tmp_path):
    omega, u = fbm_pair
    v = path_area(u, omega)
    dense = v.to_dense()
    assert np.allclose(dense.value(3, 17), v.value(3, 17), atol=1e-15)
    bumped = v.perturbed(2, 9, 1e-3)
    assert chen_residual("path", omega.times[2], omega.times[5], omega.times[9],
                         u=u, omega=omega, v=bumped) == pytest.approx(1e-3 * np.sqrt(16))
    z = zero_area(omega.grid, 4)
    assert area_norm(z, 0.36, 0.40) == 0.0
    raw = np.ones((33, 33, 2, 2))
    assert np.all(GridArea(omega.grid, raw).value(4, 4) == 0)
    v.to_csv(tmp_path / "a.csv")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "s,t,frobenius" and len(lines) == 1 + 33 * 32 // 2
