import numpy as np
import pytest

from intertime import (
    ChainMatrix,
    StructuralError,
    ValidationError,
    check_reversible,
    check_transitive_heuristic,
    evolve,
    make_lazy,
    stationary,
)
from intertime.chain import delta, format_chain, parse_chain, read_chain, write_chain

from conftest import fam, lazy_flip, random_reversible


def test_lazy_identity_chain_is_fixed():
    c = make_lazy(ChainMatrix.from_dense([[1.0]]))
    assert c.dense().tolist() == [[1.0]]
    assert c.lazy and c.n == 1


def test_lazy_flip_arithmetic():
    c = lazy_flip()
    assert np.array_equal(c.dense(), np.full((2, 2), 0.5))
    assert c.lazy and c.reversible


def test_lazy_cycle4_entries():
    srw = ChainMatrix.from_dense(np.array([[0, .5, 0, .5], [.5, 0, .5, 0],
                                           [0, .5, 0, .5], [.5, 0, .5, 0]]))
    c = make_lazy(srw)
    assert np.allclose(np.diag(c.dense()), 0.5)
    assert c.dense()[0, 1] == c.dense()[0, 3] == 0.25
    assert np.array_equal(c.pi, srw.pi)
    assert not srw.lazy and c.lazy


def test_bad_row_named_in_error():
    with pytest.raises(ValidationError, match="row 1"):
        ChainMatrix.from_dense([[0.5, 0.5], [0.3, 0.3]])


def test_probability_out_of_range():
    with pytest.raises(ValidationError):
        ChainMatrix.from_entries(2, [0, 0, 1], [0, 1, 0], [1.5, -0.5, 1.0])


def test_index_out_of_range():
    with pytest.raises(ValidationError):
        ChainMatrix.from_entries(2, [0, 1], [0, 2], [1.0, 1.0])


def test_duplicates_merged_and_rows_sorted():
    c = ChainMatrix.from_entries(2, [0, 0, 0, 1], [1, 0, 1, 0], [0.25, 0.5, 0.25, 1.0])
    assert c.rows() == [[(0, 0.5), (1, 0.5)], [(0, 1.0)]]


def test_cycle8_stationary_exactly_uniform():
    c = fam("cycle", n=8)
    assert np.array_equal(c.pi, np.full(8, 1 / 8))


def test_two_cliques_pi_proportional_to_degree():
    c = fam("two_cliques", m=9, s=3)
    A = (c.dense() > 0).astype(float)
    np.fill_diagonal(A, 0)
    deg = A.sum(axis=1)
    assert np.allclose(c.pi, deg / deg.sum(), atol=1e-12)
    # the bridge endpoints have one extra neighbour
    assert deg[0] == 3 and deg[3] == 9


def test_weighted_tree_pi_by_incident_weight():
    c = fam("weighted_tree", n=30, seed=7)
    w = np.zeros(30)
    for u, v, x in c.meta["edges"]:
        w[u] += x
        w[v] += x
    assert np.allclose(c.pi, w / w.sum(), atol=1e-12)
    assert np.abs(c.PT @ c.pi - c.pi).sum() <= 1e-10


def test_reducible_chain_rejected():
    with pytest.raises(StructuralError):
        ChainMatrix.from_dense(np.eye(2))
    with pytest.raises(StructuralError):
        ChainMatrix.from_dense([[0.5, 0.5, 0], [0.5, 0.5, 0], [0, 0.5, 0.5]])


def test_stationary_nonsymmetric():
    c = ChainMatrix.from_dense([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    assert np.allclose(stationary(c), 1 / 3)
    c = ChainMatrix.from_dense([[0.9, 0.1], [0.3, 0.7]])
    assert np.allclose(c.pi, [0.75, 0.25], atol=1e-12)


def test_evolve_examples(cycle4):
    flip = lazy_flip()
    assert np.array_equal(evolve(flip, delta(2, 0), 0), [1.0, 0.0])
    assert np.allclose(evolve(flip, delta(2, 0), 1), [0.5, 0.5])
    assert np.allclose(evolve(cycle4, delta(4, 0), 2), [3 / 8, 1 / 4, 1 / 8, 1 / 4], atol=1e-15)


def test_evolve_negative_steps():
    with pytest.raises(ValidationError):
        evolve(lazy_flip(), delta(2, 0), -1)


def test_evolve_semigroup_and_stationarity():
    c = fam("weighted_tree", n=12, seed=3)
    mu = np.random.default_rng(0).dirichlet(np.ones(12))
    assert np.allclose(evolve(c, mu, 9), evolve(c, evolve(c, mu, 4), 5), atol=1e-12)
    for t in (1, 10, 100):
        assert np.abs(evolve(c, c.pi, t) - c.pi).sum() <= 1e-9


def test_reversible_symmetric():
    ok, viol = check_reversible(fam("torus", d=2, l=5))
    assert ok and viol == 0.0


def test_reversible_tree():
    assert check_reversible(fam("weighted_tree", n=25, seed=4))[0]


def test_rotation_not_reversible():
    rot = make_lazy(ChainMatrix.from_dense([[0, 1, 0], [0, 0, 1], [1, 0, 0]]))
    ok, viol = check_reversible(rot)
    # pi = 1/3, flow 1/3 * 1/2 one way and 0 back
    assert not ok
    assert viol == pytest.approx(1 / 6, abs=1e-15)


def test_detailed_balance_for_powers():
    c = random_reversible(np.random.default_rng(5), 10)
    M = np.eye(10)
    F = np.diag(c.pi)
    for _ in range(20):
        M = M @ c.dense()
        assert np.allclose(F @ M, (F @ M).T, atol=1e-12)


@pytest.mark.parametrize("family,params,expected", [
    ("torus", {"d": 2, "l": 4}, True),
    ("complete", {"n": 6}, True),
    ("two_cliques", {"m": 9, "s": 3}, False),
    ("path", {"n": 6}, False),
])
def test_transitive_heuristic(family, params, expected):
    assert check_transitive_heuristic(fam(family, **params)) is expected


def test_chain_file_roundtrip(tmp_path):
    c = fam("weighted_tree", n=9, seed=2)
    path = tmp_path / "t.chain"
    write_chain(c, path)
    back = read_chain(path)
    assert back.n == 9
    assert np.array_equal(back.dense(), c.dense())


def test_chain_file_comments_and_header():
    text = "# a comment\nn 2\n0 0 0.5  # inline\n0 1 0.5\n1 0 0.5\n1 1 0.5\n"
    c = parse_chain(text)
    assert np.array_equal(c.dense(), np.full((2, 2), 0.5))


@pytest.mark.parametrize("text", ["0 1 1.0\n", "n 2\n0 1\n", "n x\n", "n 2\n0 5 1.0\n1 0 1.0\n"])
def test_chain_file_malformed(text):
    with pytest.raises(ValidationError):
        parse_chain(text)


def test_format_uses_17_digits():
    c = ChainMatrix.from_dense([[2 / 3, 1 / 3], [1 / 3, 2 / 3]])
    assert "0.66666666666666663" in format_chain(c)


def test_chain_is_immutable():
    c = fam("cycle", n=5)
    with pytest.raises(ValueError):
        c.P.data[0] = 0.3
    with pytest.raises(ValueError):
        c.pi[0] = 0.3
