"""Property-based invariants on random chains and family sizes."""

import itertools
import math

import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from conftest import fam, random_reversible
from intertime.chain import check_reversible, evolve, format_chain, parse_chain
from intertime.exact import (
    exact_intersection_curve,
    exact_intersection_expectation,
    hitting_times,
    t_H_bruteforce,
    tv_mixing_time,
)
from intertime.spectral import (
    compute_Q,
    compute_Qt,
    return_sum_Qt,
    spectral_Qt,
    spectrum,
    uniform_mixing_time,
)

FAST = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])

chains = st.builds(
    lambda seed, n, dens: random_reversible(np.random.default_rng(seed), n, dens),
    st.integers(0, 2**32 - 1), st.integers(2, 9), st.floats(0.0, 1.0),
)
tiny_chains = st.builds(
    lambda seed, n, dens: random_reversible(np.random.default_rng(seed), n, dens),
    st.integers(0, 2**32 - 1), st.integers(2, 4), st.floats(0.0, 1.0),
)
transitive = st.one_of(
    st.builds(lambda n: fam("cycle", n=n), st.integers(3, 40)),
    st.builds(lambda n: fam("complete", n=n), st.integers(2, 40)),
    st.builds(lambda d: fam("hypercube", d=d), st.integers(1, 6)),
    st.builds(lambda l: fam("torus", d=2, l=l), st.integers(3, 7)),
    st.builds(lambda l: fam("torus", d=3, l=l), st.integers(3, 4)),
)


@FAST
@given(chains)
def test_stationary_and_reversible(c):
    np.testing.assert_allclose(c.P.T @ c.pi, c.pi, atol=1e-10)
    assert abs(c.pi.sum() - 1) < 1e-12
    ok, viol = check_reversible(c)
    assert ok and viol < 1e-10


@FAST
@given(chains, st.integers(0, 30))
def test_evolve_keeps_mass(c, t):
    mu = np.random.default_rng(t).dirichlet(np.ones(c.n))
    out = evolve(c, mu, t)
    assert abs(out.sum() - 1) < 1e-12 and np.all(out >= -1e-15)


@FAST
@given(chains)
def test_chain_file_roundtrip(c):
    again = parse_chain(format_chain(c))
    np.testing.assert_allclose(again.dense(), c.dense(), rtol=0, atol=1e-15)


@FAST
@given(chains)
def test_hitting_first_step_and_tH(c):
    tab = hitting_times(c)
    assert tab.residual <= 1e-8 * max(1.0, tab.t_hit)
    assert np.all(tab.h >= 0)
    assert t_H_bruteforce(c)[0] <= 2 * tab.t_hit + 1e-9


@FAST
@given(chains, st.floats(0.01, 0.49))
def test_tv_mixing_monotone_in_eps(c, eps):
    assert tv_mixing_time(c, eps) >= tv_mixing_time(c, 0.5)


@settings(max_examples=15, deadline=None)
@given(tiny_chains)
def test_intersection_expectation_properties(c):
    t_hit = hitting_times(c).t_hit
    for x, y in itertools.combinations(range(c.n), 2):
        v = exact_intersection_expectation(c, x, y)
        assert v == exact_intersection_expectation(c, y, x)
        assert 0 < v <= 2 * t_hit + 1e-9  # wait at a fixed state for both chains


@settings(max_examples=15, deadline=None)
@given(tiny_chains, st.integers(1, 30))
def test_intersection_curve_monotone(c, tmax):
    curve = exact_intersection_curve(c, c.pi, c.pi, tmax)
    assert abs(curve[0] - float(c.pi @ c.pi)) < 1e-12
    assert np.all(np.diff(curve) >= -1e-15) and np.all(curve <= 1)


@FAST
@given(transitive)
def test_tunif_below_twice_sqrtQ(c):
    Q, _ = compute_Q(spectrum(c, closed_form=True))
    assert uniform_mixing_time(c) <= 2 * math.sqrt(Q)


@FAST
@given(transitive, st.integers(0, 25))
def test_qt_three_ways(c, t):
    direct = compute_Qt(c, 0, t, check=False)
    assert math.isclose(direct, return_sum_Qt(c, 0, t), rel_tol=1e-8)
    assert math.isclose(direct, spectral_Qt(spectrum(c, closed_form=True), t), rel_tol=1e-8)


@FAST
@given(transitive, st.integers(0, 20))
def test_qt_increasing_and_bounded(c, t):
    a, b = compute_Qt(c, 0, t), compute_Qt(c, 0, t + 1)
    assert b >= a
    assert a <= (t + 1) ** 2 + 1e-9  # g_t(x,.) has mass t+1
    assert a >= (t + 1) ** 2 / c.n - 1e-9  # Cauchy-Schwarz over n states
