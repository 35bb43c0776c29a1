import numpy as np
import pytest

from intertime import ChainMatrix, generate, make_lazy
from intertime.families import spec


def lazy_flip() -> ChainMatrix:
    return make_lazy(ChainMatrix.from_dense([[0.0, 1.0], [1.0, 0.0]]))


def fam(family, seed=0, **params) -> ChainMatrix:
    return generate(spec(family, seed=seed, **params))


def random_reversible(rng: np.random.Generator, n: int, density: float = 0.5) -> ChainMatrix:
    """Lazy walk on a random connected weighted graph (a spanning path plus extra edges)."""
    W = np.zeros((n, n))
    perm = rng.permutation(n)
    for a, b in zip(perm, perm[1:]):
        W[a, b] = W[b, a] = rng.uniform(0.5, 3.0)
    extra = np.triu(rng.random((n, n)) < density, 1)
    w = rng.uniform(0.1, 3.0, size=(n, n))
    W = np.where(extra, np.triu(w, 1), 0.0) + W
    W = np.maximum(W, W.T)
    np.fill_diagonal(W, 0.0)
    P = W / W.sum(axis=1, keepdims=True)
    return make_lazy(ChainMatrix.from_dense(P))


def matrix_power_rows(chain: ChainMatrix, t: int) -> np.ndarray:
    return np.linalg.matrix_power(chain.dense(), t)


@pytest.fixture
def flip():
    return lazy_flip()


@pytest.fixture
def cycle4():
    return fam("cycle", n=4)


# ---- acceptance summary --------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, float]] = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    num, title = mark.args
    ok = call.excinfo is None
    _CRITERIA[num] = (title, "PASS" if ok else "FAIL", call.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, verdict, secs = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:>2}: {verdict}  {title}  ({secs:.1f}s)")
