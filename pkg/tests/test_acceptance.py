"""Acceptance criteria 1 to 9; each test prints one PASS/FAIL line."""

import time

import numpy as np
import pytest

from roughevo.experiments import (ExperimentConfig, anchor_suite, byparts_suite, chen_exact_suite,
                                  chen_quadrature_suite, fixed_point_suite, h3_suite,
                                  G_bounds_suite, quadrature_convergence_suite, scaling_suite,
                                  smooth_solver_suite, young_oracle_suite)
from roughevo.paths import TimeGrid, generate_fbm


@pytest.fixture
def report(capsys):
    def _report(number, title, criteria, elapsed, budget):
        ok = all(c.passed for c in criteria) and elapsed <= budget
        detail = "; ".join(f"{c.name}={c.value:.3e} ({'ok' if c.passed else 'FAIL'} vs {c.threshold:g})"
                           for c in criteria)
        with capsys.disabled():
            print(f"\ncriterion {number} {title}: {'PASS' if ok else 'FAIL'} "
                  f"[{elapsed:.1f}s of {budget:g}s] {detail}")
        failed = [c.name for c in criteria if not c.passed]
        assert not failed, f"failed: {failed}"
        assert elapsed <= budget, f"runtime {elapsed:.1f}s exceeds {budget}s"
    return _report


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


@pytest.fixture(scope="module")
def cfg():
    return ExperimentConfig()


def test_criterion_1_young_oracle(report):
    crit, dt = _timed(young_oracle_suite)
    report(1, "Young integral oracle", crit, dt, 10)


def test_criterion_2_sign_anchors(report):
    crit, dt = _timed(anchor_suite)
    report(2, "sign-convention anchors", crit, dt, 60)


def test_criterion_3_chen_suite(report, cfg):
    op = cfg.operator()
    grid = TimeGrid(1.0, 256)

    def run():
        omega = generate_fbm(0.45, op, grid, seed=0)
        u = generate_fbm(0.45, op, grid, seed=1)
        return chen_exact_suite(op, omega, u) + chen_quadrature_suite()

    crit, dt = _timed(run)
    report(3, "Chen residual suite (N=8, M=256)", crit, dt, 60)


def test_criterion_4_smooth_solver(report, cfg):
    op = cfg.operator()
    (crit, _, _), dt = _timed(lambda: smooth_solver_suite(op, cfg.nonlinearity(op),
                                                          cfg.initial_value(op), level=9))
    report(4, "smooth-driver solver equivalence (M=512)", crit, dt, 300)


def test_criterion_5_fixed_point_uniqueness(report, cfg):
    op = cfg.operator()
    omega = cfg.driver(op, 6)
    (crit, _, _), dt = _timed(lambda: fixed_point_suite(op, cfg.nonlinearity(op), omega,
                                                        cfg.initial_value(op),
                                                        cfg.solver_config(omega.grid.horizon),
                                                        cfg.params()))
    report(5, "fixed point and uniqueness (fBm, level 6, N=8)", crit, dt, 300)


def test_criterion_6_scaling_exponents(report, cfg):
    crit, dt = _timed(lambda: scaling_suite(cfg.params()))
    report(6, "scaling-exponent suite", crit, dt, 300)


def test_criterion_7_h3_cauchy(report, cfg):
    (crit, _), dt = _timed(lambda: h3_suite(cfg))
    report(7, "(H3) empirical Cauchy over levels 4..64", crit, dt, 900)


def test_criterion_8_bounds_and_byparts(report, cfg):
    op = cfg.operator()
    crit, dt = _timed(lambda: G_bounds_suite(cfg.nonlinearity(op), samples=500)
                      + byparts_suite(samples=500))
    report(8, "nonlinearity inequalities and integration by parts", crit, dt, 600)


def test_criterion_9_quadrature_convergence(report):
    crit, dt = _timed(quadrature_convergence_suite)
    assert np.all(np.isfinite([c.value for c in crit]))
    report(9, "quadrature convergence under mesh halving", crit, dt, 600)
