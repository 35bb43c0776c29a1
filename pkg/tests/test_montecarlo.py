import json
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import fam, lazy_flip
from intertime import ChainMatrix
from intertime import montecarlo as mc
from intertime.errors import ValidationError
from intertime.exact import exact_intersection_expectation, exact_tI
from intertime.spectral import compute_Qt, spectrum


def within(est, value, k=3.0):
    return abs(est.mean - value) <= k * est.std_error + 1e-12


def test_same_start_is_zero():
    t, tr = mc.sample_tau_I(fam("cycle", n=6), 2, 2, 100)
    assert np.all(t == 0) and not tr.any()


def test_flip_matches_four_thirds():
    est = mc.estimate_tau_I(lazy_flip(), 0, 1, 100_000)
    assert within(est, 4 / 3)
    assert est.samples == 100_000 and est.truncated_fraction == 0


def test_cycle4_antipodal_matches_oracle():
    c = fam("cycle", n=4)
    est = mc.estimate_tau_I(c, 0, 2, 100_000, seed=3)
    assert within(est, exact_intersection_expectation(c, 0, 2))


def test_path_and_complete_pairs_match_oracle():
    for c in (fam("path", n=4), fam("complete", n=4), fam("path", n=5)):
        for x, y in [(0, c.n - 1), (1, 2)]:
            est = mc.estimate_tau_I(c, x, y, 20_000, seed=11)
            assert within(est, exact_intersection_expectation(c, x, y))


def test_standard_error_definition():
    t, tr = mc.sample_tau_I(fam("cycle", n=8), 0, 4, 5000, seed=2)
    est = mc.summarize(t, 2, 0, tr)
    assert est.std_error == pytest.approx(t.std(ddof=1) / np.sqrt(t.size))
    assert est.mean == pytest.approx(t.mean())


def test_truncation_flags_lower_bound():
    est = mc.estimate_tau_I(fam("cycle", n=40), 0, 20, 2000, cap=5)
    assert est.truncated_fraction > 0.5
    assert est.lower_bound
    assert est.mean <= 5
    assert est.to_dict()["lower_bound"] is True


def test_no_truncation_not_lower_bound():
    est = mc.estimate_tau_I(fam("cycle", n=8), 0, 4, 2000)
    assert not est.lower_bound


def test_bad_start_and_cap():
    c = fam("cycle", n=5)
    with pytest.raises(ValidationError):
        mc.sample_tau_I(c, 0, 7, 10)
    with pytest.raises(ValidationError):
        mc.sample_tau_I(c, "mu", 1, 10)
    with pytest.raises(ValidationError):
        mc.sample_tau_I(c, 0, 1, 10, cap=0)


def test_seed_determinism_and_sensitivity():
    c = fam("torus", d=2, l=6)
    a, _ = mc.sample_tau_I(c, 0, 18, 3000, seed=5)
    b, _ = mc.sample_tau_I(c, 0, 18, 3000, seed=5)
    d, _ = mc.sample_tau_I(c, 0, 18, 3000, seed=6)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, d)


def test_prefix_stability():
    # replicate r's stream depends only on (key, r), so more samples extend the same list
    c = fam("cycle", n=12)
    a, _ = mc.sample_tau_I(c, 0, 6, 500, seed=9)
    b, _ = mc.sample_tau_I(c, 0, 6, 2000, seed=9)
    np.testing.assert_array_equal(a, b[:500])


def test_pi_start_marginal():
    # with x0 = pi and y0 = pi, tau_I = 0 happens exactly when the draws coincide
    c = fam("two_cliques", m=5, s=3)
    t, _ = mc.sample_tau_I(c, "pi", "pi", 200_000, seed=4)
    p0 = float(np.sum(c.pi ** 2))
    f = np.mean(t == 0)
    assert abs(f - p0) <= 4 * np.sqrt(p0 * (1 - p0) / t.size)


def test_default_cap_formula():
    c = fam("cycle", n=32)
    trel = 1 / (1 - spectrum(c).lambda2)
    assert mc.default_cap(c) == int(100 * (32 + np.ceil(trel)))


# ---- maxima ----------------------------------------------------------------


def test_tI_single_state():
    est = mc.estimate_tI(ChainMatrix.from_dense([[1.0]]), 100)
    assert est.estimate.mean == 0.0


def test_tI_cycle4_matches_exact_max():
    c = fam("cycle", n=4)
    exact, _ = exact_tI(c)
    m = mc.estimate_tI(c, 50_000, seed=8)
    assert m.mode == "transitive"
    assert within(m.estimate, exact)


def test_tI_path4_exhaustive_matches_exact_max():
    c = fam("path", n=4)
    exact, pair = exact_tI(c)
    m = mc.estimate_tI(c, 50_000, seed=8)
    assert m.mode == "exhaustive" and m.candidates == 6
    assert within(m.estimate, exact)


def test_candidate_modes():
    assert mc.candidate_pairs(fam("cycle", n=40))[2] == "transitive"
    xs, ys, mode = mc.candidate_pairs(fam("path", n=30))
    assert mode == "exhaustive" and xs.size == 30 * 29 // 2 and np.all(xs < ys)
    xs, ys, mode = mc.candidate_pairs(fam("cycle", n=200))
    assert mode == "lower-bound" and np.all(xs == 0)
    assert 100 in ys  # antipode is the farthest state
    xs, ys, mode = mc.candidate_pairs(fam("path", n=100))
    assert mode == "lower-bound"
    assert (0, 99) in set(zip(xs.tolist(), ys.tolist()))


def test_candidate_double_sweep_for_large_nontransitive():
    xs, ys, mode = mc.candidate_pairs(fam("path", n=1500))
    assert mode == "lower-bound"
    pairs = set(zip(xs.tolist(), ys.tolist()))
    assert (0, 1499) in pairs
    assert np.all(xs < ys)


def test_tI_star_single_state():
    assert mc.estimate_tI_star(ChainMatrix.from_dense([[1.0]]), 10).estimate.mean == 0.0


def test_pi_pi_single_state():
    assert mc.estimate_pi_pi_expectation(ChainMatrix.from_dense([[1.0]]), 10).mean == 0.0


def test_transitive_ordering_of_estimates():
    c = fam("torus", d=2, l=8)
    tI = mc.estimate_tI(c, 10_000).estimate
    star = mc.estimate_tI_star(c, 10_000).estimate
    pp = mc.estimate_pi_pi_expectation(c, 10_000)
    assert pp.lower <= star.upper
    assert star.lower <= tI.upper


def test_tI_star_exact_for_path3():
    # E_{x,pi} tau_I = sum_y pi(y) E_{x,y} tau_I; compare the worst x
    c = fam("path", n=3)
    want = max(sum(c.pi[y] * exact_intersection_expectation(c, x, y) for y in range(3))
               for x in range(3))
    m = mc.estimate_tI_star(c, 50_000, seed=12)
    assert m.mode == "exhaustive"
    assert within(m.estimate, want)


def test_pi_pi_exact_for_cycle5():
    c = fam("cycle", n=5)
    want = sum(c.pi[x] * c.pi[y] * exact_intersection_expectation(c, x, y)
               for x in range(5) for y in range(5))
    assert within(mc.estimate_pi_pi_expectation(c, 50_000, seed=2), want)


def test_max_estimate_dict():
    d = mc.estimate_tI(fam("cycle", n=6), 500).to_dict()
    assert {"mean", "std_error", "samples", "seed", "truncation_cap", "truncated_fraction",
            "argmax", "mode", "candidates", "lower_bound"} <= set(d)


# ---- intersection counts and S_t -------------------------------------------


def test_self_loop_counts():
    c = ChainMatrix.from_dense([[1.0]])
    for t in (0, 1, 5):
        assert np.all(mc.count_intersections(c, 0, 0, t, 10) == (t + 1) ** 2)


def test_flip_first_moment():
    m = mc.intersection_moments(lazy_flip(), 0, 1, 100_000)
    assert m.Qt == pytest.approx(2.5)
    assert abs(m.mean.mean - 2.5) <= 3 * m.mean.std_error
    assert m.second.mean <= 4 * 2.5 ** 2 + 3 * m.second.std_error
    assert m.first_ok and m.second_ok


def test_counts_distribution_flip_t1():
    # from (0,0): X_1, Y_1 i.i.d. uniform on {0,1}; I_1 = 1 + [X1=0] + [Y1=0] + [X1=Y1],
    # which is 4 when both stay and 2 in the other three cases
    I = mc.count_intersections(lazy_flip(), 0, 0, 1, 100_000, seed=3)
    vals, counts = np.unique(I, return_counts=True)
    assert set(vals.tolist()) == {2, 4}
    freq = dict(zip(vals.tolist(), counts / I.size))
    for v, p in {4: 0.25, 2: 0.75}.items():
        assert abs(freq.get(v, 0) - p) < 0.01


@pytest.mark.parametrize("family,params", [("cycle", {"n": 16}), ("complete", {"n": 16})])
def test_first_moment_identity(family, params):
    c = fam(family, **params)
    m = mc.intersection_moments(c, 0, 6, 50_000)
    assert m.first_ok, (m.mean.mean, m.Qt)
    assert m.second_ok


def test_negative_horizon_rejected():
    with pytest.raises(ValidationError):
        mc.count_intersections(lazy_flip(), 0, 0, -1, 10)


def test_st_at_zero_is_certain():
    chk = mc.s_t_diagnostic(fam("cycle", n=16), 0, 0, 1000)
    assert chk.Qt == pytest.approx(1.0)
    assert chk.frequency == 1.0 and chk.ok


@pytest.mark.parametrize("family,params,t", [
    ("cycle", {"n": 16}, None), ("complete", {"n": 16}, 4),
])
def test_st_bound(family, params, t):
    c = fam(family, **params)
    if t is None:
        t = int(np.ceil(1 / (1 - spectrum(c).lambda2)))
    chk = mc.s_t_diagnostic(c, 0, t, 10_000)
    assert chk.Qt == pytest.approx(compute_Qt(c, 0, t))
    assert chk.ok


# ---- threads -------------------------------------------------------------


_THREAD_SCRIPT = """
import json, sys
from intertime import montecarlo as mc
from intertime.families import generate, spec
mc.set_threads(int(sys.argv[1]))
c = generate(spec("torus", d=2, l=6))
t, _ = mc.sample_tau_I(c, 0, 21, 4000, seed=17)
I = mc.count_intersections(c, 0, 0, 9, 4000, seed=17)
print(json.dumps([t.tolist(), I.tolist(), mc.estimate_tI(c, 2000).to_dict()]))
"""


def test_thread_count_does_not_change_samples():
    outs = []
    for k in (1, 3):
        env = dict(os.environ, NUMBA_NUM_THREADS="4")
        r = subprocess.run([sys.executable, "-c", _THREAD_SCRIPT, str(k)], env=env,
                           capture_output=True, text=True, check=True, timeout=300)
        outs.append(json.loads(r.stdout))
    assert outs[0] == outs[1]


def test_set_threads_clamps():
    import numba

    limit = numba.config.NUMBA_NUM_THREADS
    assert mc.set_threads(10_000) == limit
    assert mc.set_threads(0) == 1
    assert mc.set_threads(None) == limit
