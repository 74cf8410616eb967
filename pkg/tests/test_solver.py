import numpy as np
import pytest

from roughevo.areas import AreaOperator, path_area
from roughevo.experiments import smooth_driver
from roughevo.nonlinearity import make_example_G, zero_G
from roughevo.paths import TimeGrid, generate_fbm
from roughevo.solver import (DependencyError, NoLocalSolutionError, SolverConfig, apply_T,
                             apply_T1, apply_T2, fixed_point_residual, initial_pair, pair_norm,
                             reference_mild_smooth, solve_fixed_point, truncate, w_distance)
from roughevo.spectral import laplacian_operator


def test_zero_nonlinearity_gives_semigroup_orbit(op4, fbm_pair):
    omega, _ = fbm_pair
    u0 = np.array([1.0, -0.5, 0.25, 2.0])
    Z = zero_G(op4)
    U, hist = solve_fixed_point(omega, AreaOperator(omega, op4), u0, Z)
    assert np.allclose(U.u.values, op4.decay(omega.times) * u0, rtol=0, atol=1e-15)
    assert len(hist.rows) == 1
    assert np.allclose(U.v.lag_values(3), path_area(U.u, omega).lag_values(3))


def test_fixed_point_and_uniqueness(op4, fbm_pair, G4, area_op):
    omega, _ = fbm_pair
    u0 = np.ones(4)
    U, hist = solve_fixed_point(omega, area_op, u0, G4)
    tol = 1e-8 * (1 + pair_norm(U)[2])
    assert fixed_point_residual(U, omega, area_op, u0, G4) <= 10 * tol
    start = initial_pair(omega, 3 * u0, G4)
    U2, _ = solve_fixed_point(omega, area_op, u0, G4, start=start)
    assert w_distance(U, U2) <= 100 * tol
    assert max(hist.ratios_on(1.0)) < 1


def test_no_local_solution_for_large_coefficients(op4, fbm_pair, area_op):
    omega, _ = fbm_pair
    G = make_example_G(op4, amplitude=100.0)
    with pytest.raises(NoLocalSolutionError):
        solve_fixed_point(omega, area_op, np.ones(4), G)


def test_missing_area_operator(op4, fbm_pair, G4):
    omega, _ = fbm_pair
    U = initial_pair(omega, np.ones(4), G4)
    with pytest.raises(DependencyError):
        apply_T2(U, omega, None, np.ones(4), G4)


def test_smooth_driver_matches_exponential_euler():
    op = laplacian_operator(3)
    G = make_example_G(op, seed=4)
    w = smooth_driver(op, 7)
    u0 = np.array([1.0, 0.5, -0.3])
    U, _ = solve_fixed_point(w, AreaOperator(w, op), u0, G)
    ref = reference_mild_smooth(w, u0, G, richardson=True, refine=2)
    assert np.max(np.abs(U.u.values - ref.values)) / np.max(np.abs(ref.values)) < 5e-4


def test_fractional_route_agrees_with_exact_route():
    op = laplacian_operator(2)
    G = make_example_G(op, seed=0)
    w = smooth_driver(op, 4)
    u0 = np.array([1.0, 0.5])
    U, _ = solve_fixed_point(w, AreaOperator(w, op), u0, G)
    exact = apply_T1(U, w, u0, G)
    frac = apply_T1(U, w, u0, G, method="fractional", times=[1.0])
    assert np.allclose(frac.values[-1], exact.values[-1], rtol=1e-3, atol=1e-4)


def test_lipschitz_dependence_on_initial_value(op4, fbm_pair, G4, area_op):
    omega, _ = fbm_pair
    U, _ = solve_fixed_point(omega, area_op, np.ones(4), G4)
    ratios = []
    for d in (1e-2, 1e-3):
        Ud, _ = solve_fixed_point(omega, area_op, np.ones(4) + d * np.eye(4)[1], G4)
        ratios.append(w_distance(U, Ud) / d)
    assert ratios[0] == pytest.approx(ratios[1], rel=0.05)


def test_history_csv_and_truncation(op4, fbm_pair, G4, area_op, tmp_path):
    omega, _ = fbm_pair
    _, hist = solve_fixed_point(omega, area_op, np.ones(4), G4)
    hist.to_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "iter,delta_W,ratio,horizon" and len(lines) == len(hist.rows) + 1
    short = truncate(omega, 8)
    assert short.grid == TimeGrid(0.25, 8)
    U = apply_T(initial_pair(short, np.ones(4), G4), short, AreaOperator(short, op4), np.ones(4), G4)
    assert U.grid == short.grid


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(horizon=0.0)
    with pytest.raises(ValueError):
        SolverConfig(tol=0.0)
