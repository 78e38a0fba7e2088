"""Property-based checks of the module invariants."""

from __future__ import annotations

import math
import os

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from hilfer_mild import _parallel
from hilfer_mild.fracops import SampledFn, TimeGrid, caputo_derivative, hilfer_derivative, rl_derivative, rl_integral
from hilfer_mild.harness.scenario import dump_scenario, load_scenario, parse_scenario
from hilfer_mild.operators import (
    DiagonalSectorialOperator,
    Family,
    FracParams,
    SpectralField,
    multiplier,
    semigroup_apply,
)
from hilfer_mild.solver import SpectralGrid, Trajectory, contraction_n0, mnc_contraction_sequence
from hilfer_mild.specfun import MLParams, ml_array, mittag_leffler, wright_m_array

FAST = settings(max_examples=40, deadline=None)
alphas = st.floats(0.1, 0.95)


@FAST
@given(alphas, st.lists(st.floats(0.0, 50.0), min_size=1, max_size=20))
def test_wright_nonnegative(alpha, thetas):
    assert wright_m_array(alpha, np.array(thetas)).min() >= -1e-12


@FAST
@given(st.floats(0.25, 0.95), st.floats(0.1, 2.5), st.floats(-30.0, 3.0))
def test_ml_vector_and_scalar_paths_agree(alpha, beta, z):
    v = ml_array(alpha, beta, np.array([z]))[0]
    s = mittag_leffler(MLParams(alpha, beta), z)
    assert abs(v - s) <= 1e-9 * max(abs(s), 1e-300) + 1e-15


@FAST
@given(alphas, st.floats(1e-3, 1.0))
def test_multipliers_completely_monotone_in_lambda(alpha, t):
    lam = np.arange(1, 13, dtype=float) ** 2
    for fam in (Family.S_ALPHA, Family.T_ALPHA):
        m = multiplier(fam, alpha, lam, t)
        assert m.min() > 0.0 and np.all(np.diff(m) < 0.0)


@FAST
@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_semigroup_law_and_contraction(t, s, coeffs):
    op = DiagonalSectorialOperator(6)
    x = SpectralField(coeffs)
    lhs = semigroup_apply(op, t + s, x).coefficients
    rhs = semigroup_apply(op, t, semigroup_apply(op, s, x)).coefficients
    assert np.abs(lhs - rhs).max() <= 1e-14 * (1.0 + np.abs(x.coefficients).max())
    assert semigroup_apply(op, t, x).norm() <= x.norm() * (1.0 + 1e-15)


@FAST
@given(st.floats(0.05, 2.0), st.floats(-3.0, 3.0), st.floats(-3.0, 3.0), st.integers(4, 60))
def test_integral_exact_on_affine_data(order, a, b, M):
    g = TimeGrid(1.0, M, 2.0)
    t = g.nodes
    out = rl_integral(order, SampledFn(g, a + b * t)).values
    ref = a * t**order / math.gamma(order + 1.0) + b * t ** (order + 1.0) / math.gamma(order + 2.0)
    assert np.abs(out - ref).max() <= 1e-12 * (1.0 + abs(a) + abs(b))


@FAST
@given(st.floats(0.1, 0.9), st.floats(-2.0, 2.0), st.floats(0.5, 6.0))
def test_hilfer_endpoints_are_rl_and_caputo(order, shift, freq):
    g = TimeGrid(1.0, 60, 2.0)
    f = SampledFn(g, np.cos(freq * g.nodes) + shift)
    rl = hilfer_derivative(order, 0.0, f).values
    assert np.array_equal(rl[1:], rl_derivative(order, f).values[1:])
    cap = hilfer_derivative(order, 1.0, f).values
    ref = caputo_derivative(order, f).values
    mask = np.isfinite(ref)
    assert np.array_equal(cap[mask], ref[mask])


@FAST
@given(st.integers(1, 24), st.integers(1, 5))
def test_spectral_round_trip(n, rows):
    space = SpectralGrid(n)
    c = np.random.default_rng(n * 7 + rows).standard_normal((rows, n))
    assert np.abs(space.to_modes(space.to_physical(c)) - c).max() <= 1e-13


@FAST
@given(st.floats(0.2, 0.9), st.floats(0.0, 1.0), st.floats(-0.95, -0.05))
def test_weighted_round_trip(alpha, gamma, beta):
    p = FracParams(alpha, gamma, beta)
    g = TimeGrid(1.0, 12, 2.0)
    y = np.random.default_rng(0).standard_normal((13, 3))
    traj = Trajectory.from_weighted(g, y, p.weight_exponent)
    assert np.allclose(traj.weighted(), y, rtol=1e-13, atol=1e-13)


@FAST
@given(st.floats(0.3, 40.0))
def test_contraction_n0_matches_sequence(factor):
    p = FracParams(0.75, 0.5, -0.5, 1.0)
    n0 = contraction_n0(p, factor / 4.0, 1.0)
    assert n0 is not None
    seq = mnc_contraction_sequence(p, factor / 4.0, 1.0, n0 + 20)
    assert seq.n0 == n0 and seq.monotone_after(n0, 19)


@settings(max_examples=25, deadline=None)
@given(
    st.floats(0.05, 0.95), st.floats(0.0, 1.0), st.floats(-0.95, -0.05),
    st.integers(1, 40), st.integers(2, 400), st.floats(1.0, 3.0),
    st.lists(st.tuples(st.floats(0.01, 1.0), st.floats(-1.0, 1.0)), max_size=3),
    st.sampled_from(["sec5", "linear"]),
)
def test_scenario_round_trip(alpha, gamma, beta, modes, M, q, points, kind):
    sc = load_scenario("example-sec5")
    text = dump_scenario(sc)
    text = text.replace("alpha = 0.75", f"alpha = {alpha!r}").replace("gamma = 0.5", f"gamma = {gamma!r}")
    text = text.replace("beta = -0.5", f"beta = {beta!r}").replace("modes = 32", f"modes = {modes}")
    text = text.replace("M = 200", f"M = {M}").replace("grading = 2.0", f"grading = {q!r}")
    ts = ", ".join(repr(t) for t, _ in points)
    cs = ", ".join(repr(c) for _, c in points)
    text = text.replace("t = [0.3, 0.6]", f"t = [{ts}]").replace("c = [0.05, 0.05]", f"c = [{cs}]")
    text = text.replace('kind = "sec5"', f'kind = "{kind}"')
    first = parse_scenario(text)
    assert parse_scenario(dump_scenario(first)) == first


@FAST
@given(st.integers(1, 40), st.integers(1, 8))
def test_parallel_map_order_independent_of_threads(n, threads):
    parts = _parallel.chunks(n)
    old = os.environ.get(_parallel.ENV_THREADS)
    try:
        os.environ[_parallel.ENV_THREADS] = str(threads)
        res = _parallel.map_ordered(lambda sl: list(range(sl.start, sl.stop)), parts)
    finally:
        if old is None:
            os.environ.pop(_parallel.ENV_THREADS, None)
        else:
            os.environ[_parallel.ENV_THREADS] = old
    assert [i for chunk in res for i in chunk] == list(range(n))
