from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest

from hilfer_mild.errors import ConfigError, DivergenceError, InvariantViolation
from hilfer_mild.fracops import TimeGrid
from hilfer_mild.harness.scenario import build_problem, load_scenario, sec5_f, sec5_kernel
from hilfer_mild.operators import (
    DiagonalSectorialOperator,
    FracParams,
    SpectralField,
    l2_norm,
    s_alpha_gamma_apply,
)
from hilfer_mild.solver import (
    ProblemSpec,
    SolverConfig,
    SpectralGrid,
    Trajectory,
    b_term,
    contraction_n0,
    convolution_weights,
    equicontinuity_probe,
    linear_errors,
    linear_oracle,
    mnc_contraction_sequence,
    nonlocal_h,
    picard_map,
    random_omega_samples,
    solve,
    volterra_residual,
)
from hilfer_mild.specfun import ml_array

DEMO = FracParams(0.75, 0.5, -0.5, 1.0)
N = 4
OP = DiagonalSectorialOperator(N)


def zero_traj(grid):
    return Trajectory.from_weighted(grid, np.zeros((grid.node_count, N)), DEMO.weight_exponent)


# ------------------------------------------------------------------ config


def test_config_aggregates_problems():
    with pytest.raises(ConfigError) as info:
        SolverConfig(max_iterations=0, tolerance=-1.0, relaxation=1.5, quadrature_order=2)
    assert len(info.value.problems) == 4


def test_problem_rejects_nonlocal_past_horizon():
    with pytest.raises(ConfigError):
        ProblemSpec(DEMO, OP, SpectralField.zeros(N), nonlocal_points=((1.5, 0.1),))
    with pytest.raises(ConfigError):
        ProblemSpec(DEMO, OP, SpectralField.zeros(N), nonlocal_points=((0.0, 0.1),))


def test_trajectory_state_at_singular_origin():
    traj = zero_traj(TimeGrid(1.0, 10, 2.0))
    with pytest.raises(InvariantViolation):
        traj.state(0)
    assert traj.state(3).norm() == 0.0


def test_spectral_grid_round_trip():
    space = SpectralGrid(8)
    c = np.random.default_rng(1).standard_normal((3, 8))
    np.testing.assert_allclose(space.to_modes(space.to_physical(c)), c, atol=1e-14)
    assert space.y.size == 16


# ------------------------------------------------------------------ b_term


def test_b_term_zero_f():
    g = TimeGrid(1.0, 20, 2.0)
    spec = ProblemSpec(DEMO, OP, SpectralField.zeros(N), f=lambda t, y, z: 0.0 * z, kernel_k=sec5_kernel)
    traj = Trajectory(g, np.ones((21, N)), 0.0)
    assert b_term(spec, traj, 5).norm() == 0.0


def test_b_term_exponential_kernel_closed_form():
    g = TimeGrid(1.0, 200, 2.0)
    c = np.array([1.0, 0.0, 0.3, -0.2])
    spec = ProblemSpec(DEMO, OP, SpectralField(c), f=lambda t, y, z: z, kernel_k=sec5_kernel)
    traj = Trajectory(g, np.tile(c, (201, 1)), 0.0)
    for j in (50, 200):
        b = b_term(spec, traj, j).coefficients
        ref = (1.0 - math.exp(-g.nodes[j])) * c
        assert np.abs(b - ref).max() < 1e-5


def test_b_term_sec5_refinement():
    c = np.array([1.0, 0.0, 0.3, 0.0])
    spec = ProblemSpec(DEMO, OP, SpectralField(c), f=sec5_f, kernel_k=sec5_kernel)

    def at_T(M):
        g = TimeGrid(1.0, M, 1.0)
        t = g.nodes
        traj = Trajectory(g, np.outer(1.0 + t + t**2, c), 0.0)
        return b_term(spec, traj, M).coefficients

    assert np.abs(at_T(200) - at_T(2000)).max() <= 1e-6


def test_b_term_index_checked():
    g = TimeGrid(1.0, 10, 2.0)
    spec = ProblemSpec(DEMO, OP, SpectralField.zeros(N), f=sec5_f, kernel_k=sec5_kernel)
    with pytest.raises(ConfigError):
        b_term(spec, zero_traj(g), 0)


# ------------------------------------------------------------- nonlocal_h


def test_nonlocal_empty():
    g = TimeGrid(1.0, 10, 1.0)
    h, snap = nonlocal_h(ProblemSpec(DEMO, OP, SpectralField.zeros(N)), zero_traj(g))
    assert h.norm() == 0.0 and snap == 0.0


def test_nonlocal_single_point_constant():
    g = TimeGrid(1.0, 10, 1.0)
    c = np.array([0.5, -1.0, 0.0, 2.0])
    spec = ProblemSpec(DEMO, OP, SpectralField.zeros(N), nonlocal_points=((0.4, 1.0),))
    h, _ = nonlocal_h(spec, Trajectory(g, np.tile(c, (11, 1)), 0.0))
    np.testing.assert_allclose(h.coefficients, c, rtol=1e-15)


def test_nonlocal_average_of_linear_mode():
    g = TimeGrid(1.0, 10, 1.0)
    t = g.nodes
    spec = ProblemSpec(DEMO, OP, SpectralField.zeros(N), nonlocal_points=((0.3, 0.5), (0.6, 0.5)))
    h, snap = nonlocal_h(spec, Trajectory(g, np.outer(t, [1.0, 2.0, 0.0, 0.0]), 0.0))
    assert snap < 1e-15
    np.testing.assert_allclose(h.coefficients, [0.45, 0.9, 0.0, 0.0], atol=1e-15)


def test_nonlocal_snap_error_reported():
    g = TimeGrid(1.0, 10, 2.0)
    spec = ProblemSpec(DEMO, OP, SpectralField.zeros(N), nonlocal_points=((0.3, 1.0),))
    _, snap = nonlocal_h(spec, zero_traj(g))
    nearest = np.abs(g.nodes - 0.3).min()
    assert snap == pytest.approx(nearest, rel=1e-12)


# -------------------------------------------------------------- picard_map


def test_picard_collapses_without_g_and_h():
    g = TimeGrid(1.0, 40, 2.0)
    u0 = SpectralField([1.0, 0.5, 0.0, -0.25])
    spec = ProblemSpec(DEMO, OP, u0)
    rng = np.random.default_rng(0)
    a = picard_map(spec, Trajectory.from_weighted(g, rng.standard_normal((41, N)), DEMO.weight_exponent))
    b = picard_map(spec, zero_traj(g))
    np.testing.assert_array_equal(a.coeffs, b.coeffs)
    ref = np.array([s_alpha_gamma_apply(DEMO, OP, tj, u0).coefficients for tj in g.nodes[1:]])
    np.testing.assert_allclose(a.coeffs[1:], ref, rtol=1e-14)


def test_picard_zero_data():
    g = TimeGrid(1.0, 40, 2.0)
    spec = ProblemSpec(DEMO, OP, SpectralField.zeros(N), g=lambda t, y, z, bz: np.sin(z) + bz,
                       f=sec5_f, kernel_k=sec5_kernel)
    assert np.abs(picard_map(spec, zero_traj(g)).coeffs).max() == 0.0


def test_picard_constant_forcing_closed_form():
    g = TimeGrid(1.0, 100, 2.0)
    t = g.nodes[1:]
    spec = ProblemSpec(DEMO, OP, SpectralField.zeros(N), g=lambda t, y, z, bz: np.sin(y) + 0.0 * z)
    img = picard_map(spec, zero_traj(g))
    ref = t**0.75 * ml_array(0.75, 1.75, -(t**0.75))
    np.testing.assert_allclose(img.coeffs[1:, 0], ref, atol=1e-14)
    assert np.abs(img.coeffs[1:, 1:]).max() < 1e-15


def test_convolution_weights_against_adaptive_quadrature(references):
    # int_0^1 (1-r)^{a-1} E_{a,a}(-lam (1-r)^a) sin(5r) dr with product weights
    for row in references["convolution_sin5"]:
        errs = []
        for M in (200, 400):
            t = TimeGrid(1.0, M, 1.0).nodes
            W = convolution_weights(0.75, np.array([row["lam"]]), t)
            val = float(W[0, -1] @ np.sin(5.0 * t))
            errs.append(abs(val - row["value"]))
        assert errs[1] < 1e-5
        assert math.log2(errs[0] / errs[1]) > 1.8


# ------------------------------------------------------------------- solve


def test_solve_linear_case(references):
    p = FracParams(0.75, 0.5, -0.5, 1.0)
    g = TimeGrid(1.0, 400, 2.0)
    # one mode per reference eigenvalue: lambda = n^2 for n = 1, 2, 7, 16
    op = DiagonalSectorialOperator(16)
    u0 = np.zeros(16)
    u0[[0, 1, 6, 15]] = 1.0
    spec = ProblemSpec(p, op, SpectralField(u0))
    traj, rep = solve(spec, SolverConfig(), g)
    assert rep.iterations_used == 1 and rep.converged
    col = {1.0: 0, 4.0: 1, 49.0: 6, 256.0: 15}
    w = p.weight_exponent
    for row in references["linear_solution"]:
        tq = row["t"]
        # closed form per mode, compared through the node-exact path
        val = s_alpha_gamma_apply(p, op, tq, SpectralField(u0)).coefficients[col[row["lam"]]]
        assert abs(val - row["value"]) * tq**w <= 1e-10
    nodal, _ = linear_errors(spec, traj)
    assert nodal <= 1e-10


def test_solve_linear_equals_closed_form_nodewise():
    g = TimeGrid(1.0, 100, 2.0)
    u0 = SpectralField([1.0, -0.5, 0.25, 0.1])
    spec = ProblemSpec(DEMO, OP, u0)
    traj, _ = solve(spec, SolverConfig(), g)
    ref = linear_oracle(spec, g.nodes[1:])
    np.testing.assert_allclose(traj.coeffs[1:], ref, rtol=1e-10, atol=0)


def test_solve_sec5():
    spec, cfg, grid = build_problem(load_scenario("example-sec5"))
    traj, rep = solve(spec, cfg, grid)
    assert rep.converged and rep.final_update_norm <= 1e-8
    assert rep.iterations_used <= 50
    assert rep.volterra_residual_weighted <= 1e-3
    assert all(rep.hypothesis_checks.values())
    assert rep.omega_r_max_norm <= cfg.radius_r and rep.omega_r_violations == 0
    # certificate computed independently of the iteration
    fp = float(l2_norm(picard_map(spec, traj).weighted() - traj.weighted()).max())
    assert fp <= 2.0 * cfg.tolerance
    assert volterra_residual(spec, traj) == pytest.approx(rep.volterra_residual_weighted, rel=1e-12)


def test_solve_large_tolerance_stops_after_one_sweep():
    g = TimeGrid(1.0, 50, 2.0)
    spec = ProblemSpec(DEMO, OP, SpectralField.unit(N, 1), g=lambda t, y, z, bz: np.sin(z))
    _, rep = solve(spec, SolverConfig(tolerance=1e3), g)
    assert rep.iterations_used == 1 and rep.converged


def test_solve_divergence_carries_history():
    g = TimeGrid(1.0, 100, 2.0)
    spec = ProblemSpec(DEMO, OP, SpectralField.unit(N, 1), g=lambda t, y, z, bz: 1e4 * z)
    with pytest.raises(DivergenceError) as info:
        solve(spec, SolverConfig(max_iterations=30, relaxation=1.0), g)
    hist = info.value.history
    assert len(hist) >= 6 and hist[-1] >= 10.0 * hist[-6]


def test_solve_nonconvergence_returns_best_iterate():
    g = TimeGrid(1.0, 50, 2.0)
    spec = ProblemSpec(DEMO, OP, SpectralField.unit(N, 1), g=lambda t, y, z, bz: np.sin(z))
    _, rep = solve(spec, SolverConfig(max_iterations=2, tolerance=1e-14), g)
    assert not rep.converged
    assert rep.final_update_norm == min(rep.update_history)
    assert any("no convergence" in w for w in rep.warnings)


def test_solve_records_failing_audit_as_warning():
    g = TimeGrid(1.0, 50, 2.0)
    spec = ProblemSpec(DEMO, OP, SpectralField.unit(N, 1), nonlocal_points=((0.5, 3.0),))
    _, rep = solve(spec, SolverConfig(), g)
    assert rep.hypothesis_checks["H3"] is False
    assert any("H3" in w for w in rep.warnings)


def test_solve_grid_horizon_must_match():
    spec = ProblemSpec(DEMO, OP, SpectralField.unit(N, 1))
    with pytest.raises(ConfigError):
        solve(spec, SolverConfig(), TimeGrid(2.0, 10, 2.0))


# ------------------------------------------------------- volterra residual


def test_volterra_residual_of_exact_homogeneous_solution():
    u0 = SpectralField([1.0, 0.5, 0.0, 0.0])
    spec = ProblemSpec(DEMO, OP, u0)
    for M in (50, 200):
        g = TimeGrid(1.0, M, 2.0)
        exact = np.zeros((M + 1, N))
        exact[1:] = linear_oracle(spec, g.nodes[1:])
        assert volterra_residual(spec, Trajectory(g, exact, DEMO.weight_exponent)) <= 1e-11


def test_volterra_residual_of_exact_forced_solution_converges():
    # g = sin y drives mode 1; u = S u0 + t^a E_{a,a+1}(-t^a) e_1 solves the equation exactly
    u0 = SpectralField([1.0, 0.0, 0.0, 0.0])
    spec = ProblemSpec(DEMO, OP, u0, g=lambda t, y, z, bz: np.sin(y) + 0.0 * z)
    errs = []
    for M in (50, 100, 200, 400):
        g = TimeGrid(1.0, M, 2.0)
        t = g.nodes[1:]
        exact = np.zeros((M + 1, N))
        exact[1:] = linear_oracle(spec, t)
        exact[1:, 0] += t**0.75 * ml_array(0.75, 1.75, -(t**0.75))
        errs.append(volterra_residual(spec, Trajectory(g, exact, DEMO.weight_exponent)))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    assert all(errs[i + 1] < errs[i] for i in range(len(errs) - 1))
    assert min(orders) >= 0.7


def test_volterra_residual_zero():
    g = TimeGrid(1.0, 30, 2.0)
    spec = ProblemSpec(DEMO, OP, SpectralField.zeros(N), g=lambda t, y, z, bz: 0.0 * z)
    assert volterra_residual(spec, zero_traj(g)) == 0.0


# ---------------------------------------------------------- equicontinuity


def sec5_like(u0):
    return ProblemSpec(
        DEMO, OP, u0, g=lambda t, y, z, bz: y * np.cos(z) + bz, f=sec5_f, kernel_k=sec5_kernel,
        nonlocal_points=((0.3, 0.05), (0.6, 0.05)),
    )


def test_equicontinuity_random_samples():
    g = TimeGrid(1.0, 200, 2.0)
    spec = sec5_like(SpectralField.unit(N, 1))
    samples = random_omega_samples(spec, g, 5, 20.0, seed=3)
    assert max(s.weighted_sup() for s in samples) <= 20.0 + 1e-12
    tab = equicontinuity_probe(spec, samples, (0.2, 0.1, 0.05))
    assert tab.gaps == (0.2, 0.1, 0.05)
    assert tab.strictly_decreasing
    # t2 -> 0: the weighted defect against the limit at 0 shrinks
    bd = tab.boundary_defects
    assert all(bd[i + 1] > bd[i] for i in range(len(bd) - 1))
    # the weighted singular term vanishes like t^{w + (a-1)(1-g)}
    slope = np.polyfit(np.log(tab.boundary_t), np.log(bd), 1)[0]
    assert slope >= 0.5 * (DEMO.weight_exponent + DEMO.initial_exponent)


def test_equicontinuity_zero_sample_is_initial_term_alone():
    g = TimeGrid(1.0, 60, 2.0)
    u0 = SpectralField([1.0, 0.3, 0.0, 0.1])
    spec = ProblemSpec(DEMO, OP, u0, g=lambda t, y, z, bz: np.sin(z) + bz, f=sec5_f, kernel_k=sec5_kernel)
    tab = equicontinuity_probe(spec, [zero_traj(g)], (0.2, 0.1, 0.05))
    t = g.nodes
    V = np.zeros((t.size, N))
    V[1:] = linear_oracle(spec, t[1:]) * t[1:, None] ** DEMO.weight_exponent
    for gap, d in zip(tab.gaps, tab.defects):
        ref = max(
            float(l2_norm(V[j] - V[i]))
            for i in range(t.size)
            for j in range(i + 1, t.size)
            if t[j] - t[i] <= gap * (1 + 1e-12)
        )
        assert d == pytest.approx(ref, rel=1e-10)


def test_equicontinuity_needs_samples():
    with pytest.raises(ConfigError):
        equicontinuity_probe(sec5_like(SpectralField.unit(N, 1)), [], (0.1,))


# ----------------------------------------------------- contraction sequence


def _log_a_mp(n, F, a=0.75, b=-0.5, g=0.5, T=1.0):
    with mpmath.workdps(40):
        ab = -a * b
        c = g * (1 + a * b)
        val = (mpmath.mpf(F) ** n * mpmath.mpf(T) ** (ab * n) * mpmath.gamma(ab) ** n
               * mpmath.gamma(ab + c) / mpmath.gamma(ab * (n + 1) + c))
        return float(mpmath.log(val))


def test_contraction_sequence_direct_gamma():
    seq = mnc_contraction_sequence(DEMO, 0.25, 1.0, 120)
    for n in (1, 2, 10, 69, 120):
        assert seq.log_values[n - 1] == pytest.approx(_log_a_mp(n, 1.0), rel=1e-12, abs=1e-12)
    # a_n = Gamma(3/8)^n Gamma(0.6875) / Gamma(0.375 (n+1) + 0.3125)
    a1 = math.gamma(0.375) * math.gamma(0.6875) / math.gamma(0.375 * 2 + 0.3125)
    assert seq.values[0] == pytest.approx(a1, rel=1e-13)
    assert seq.n0 == 69
    assert seq.values[67] >= 1.0 > seq.values[68]


@pytest.mark.parametrize("factor, n0", [(1.0, 69), (10.0, 33604)])
def test_contraction_monotone_past_n0(factor, n0):
    assert contraction_n0(DEMO, factor / 4.0, 1.0) == n0
    seq = mnc_contraction_sequence(DEMO, factor / 4.0, 1.0, n0 + 201)
    assert seq.n0 == n0
    assert seq.monotone_after(n0, 200)
    assert _log_a_mp(n0, factor) < 0.0 <= _log_a_mp(n0 - 1, factor)


def test_contraction_large_factor():
    n0 = contraction_n0(DEMO, 1000.0 / 4.0, 1.0)
    assert n0 is not None and n0 > 10**6
    assert _log_a_mp(n0, 1000.0) < 0.0 <= _log_a_mp(n0 - 1, 1000.0)


def test_contraction_partial_sequence_without_n0():
    seq = mnc_contraction_sequence(DEMO, 0.25, 1.0, 1)
    assert seq.values[0] >= 1.0 and seq.n0 is None
    with pytest.raises(ConfigError):
        seq.monotone_after(seq.n0, 10)


def test_contraction_rejects_bad_constants():
    with pytest.raises(ConfigError):
        mnc_contraction_sequence(DEMO, 0.0, 1.0, 5)
    with pytest.raises(ConfigError):
        mnc_contraction_sequence(DEMO, 1.0, 1.0, 0)
