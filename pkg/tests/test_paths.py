import numpy as np
import pytest

from roughevo.paths import (ConfigError, GridError, GridPath, HolderParams, TimeGrid, generate_fbm,
                            holder_exponent_fit, holder_sup, path_norm, refine_dyadic, subsample)
from roughevo.spectral import laplacian_operator


def test_grid_indexing():
    g = TimeGrid(2.0, 8)
    assert g.h == 0.25
    assert g.index(0.75) == 3
    with pytest.raises(GridError):
        g.index(0.3)
    with pytest.raises(GridError):
        TimeGrid(1.0, 1)


def test_fbm_increment_variance_matches_covariance():
    op = laplacian_operator(2)
    grid = TimeGrid(1.0, 16)
    paths = generate_fbm(0.45, op, grid, seed=7, samples=3000)
    vals = np.stack([p.values for p in paths])
    q = op.eigenvalues ** -0.75
    for i, j in [(0, 16), (3, 4), (5, 13)]:
        emp = np.mean((vals[:, j] - vals[:, i]) ** 2, axis=0)
        expected = q**2 * (grid.times[j] - grid.times[i]) ** 0.9
        assert np.allclose(emp, expected, rtol=0.08)


def test_fbm_is_deterministic_in_seed():
    op = laplacian_operator(3)
    a = generate_fbm(0.45, op, TimeGrid(1.0, 16), seed=5)
    b = generate_fbm(0.45, op, TimeGrid(1.0, 16), seed=5)
    assert np.array_equal(a.values, b.values)
    assert np.all(a.values[0] == 0)


def test_refine_dyadic_is_piecewise_linear():
    op = laplacian_operator(2)
    p = generate_fbm(0.45, op, TimeGrid(1.0, 64), seed=1)
    r = refine_dyadic(p, 6, 3)
    assert np.array_equal(r.values[::8], p.values[::8])
    second = r.values[2:] - 2 * r.values[1:-1] + r.values[:-2]
    inside = np.array([k % 8 != 0 for k in range(1, 64)])
    assert np.max(np.abs(second[inside])) < 1e-14
    assert subsample(r, 8).grid.cells == 8


def test_holder_norms_of_linear_path():
    grid = TimeGrid(1.0, 16)
    p = GridPath(grid, grid.times)
    assert holder_sup(p.values, p.times, 0.4, weighted=False) == pytest.approx(1.0)
    sup, semi, full = path_norm(p, 0.4)
    assert sup == 1.0 and full == pytest.approx(1.0 + semi)
    # weighted quotient s^beta (t-s)^(1-beta) never exceeds 1 on [0, 1]
    assert holder_sup(p.values, p.times, 0.4, weighted=True) <= 1.0


def test_empirical_holder_exponent_of_fbm():
    op = laplacian_operator(1)
    p = generate_fbm(0.45, op, TimeGrid(1.0, 512), seed=2)
    assert abs(holder_exponent_fit(p) - 0.45) < 0.15


def test_interpolation_and_csv_roundtrip(tmp_path):
    grid = TimeGrid(1.0, 4)
    p = GridPath(grid, np.stack([grid.times, grid.times**2], axis=1))
    assert np.allclose(p(0.125), [0.125, 0.5 * (0 + 0.0625)])
    p.to_csv(tmp_path / "p.csv")
    back = GridPath.from_csv(tmp_path / "p.csv")
    assert np.array_equal(back.values, p.values) and back.grid == grid


def test_holder_params_constraints():
    p = HolderParams()
    assert p.beta_pp == pytest.approx(0.425)
    assert p.violations() == []
    with pytest.raises(ConfigError):
        HolderParams(beta=0.30)
    with pytest.raises(ConfigError):
        HolderParams(alpha=0.5)
    with pytest.raises(ConfigError):
        HolderParams(beta_p=0.46)
