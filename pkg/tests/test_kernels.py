"""The compiled and pure-Python kernels must agree exactly."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from rigidkit import _kernels
from rigidkit.hypergraph import PinnedInstance
from rigidkit.realize import build_construction
from rigidkit.rigidity import PRIME, _packed

py = _kernels.py
cy = _kernels.compiled
needs_compiled = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


def test_use_switches_backend():
    before = _kernels.BACKEND
    try:
        _kernels.use("python")
        assert _kernels.PebbleGame is py.PebbleGame and _kernels.BACKEND == "python"
        with pytest.raises(ValueError):
            _kernels.use("fortran")
    finally:
        _kernels.use(before)


def play(impl, n, k, l, edges):
    g = impl.PebbleGame(n, k, l)
    verdicts = [g.add_edge(e, copies=c) for e, c in edges]
    return verdicts, list(g.pebbles), list(g.tails), g.free_pebbles()


edge_lists = st.integers(1, 7).flatmap(lambda n: st.tuples(
    st.just(n),
    st.integers(1, 3),
    st.integers(0, 3),
    st.lists(st.tuples(st.sets(st.integers(0, n - 1), min_size=1, max_size=3).map(tuple), st.integers(1, 2)),
             max_size=20),
))


@needs_compiled
@given(edge_lists)
def test_pebble_game_agrees(case):
    n, k, l, edges = case
    assert play(py, n, k, l, edges) == play(cy, n, k, l, edges)


@given(edge_lists)
def test_pebble_invariant(case):
    n, k, l, edges = case
    for impl in [py] + ([cy] if cy else []):
        g = impl.PebbleGame(n, k, l)
        for e, c in edges:
            g.add_edge(e, copies=c)
            out = [0] * n
            for t in g.tails:
                out[t] += 1
            assert all(p + o == k for p, o in zip(g.pebbles, out))


@needs_compiled
def test_pebble_copy_is_independent():
    for impl in (py, cy):
        g = impl.PebbleGame(3, 2)
        g.add_edge((0, 1))
        h = g.copy()
        h.add_edge((1, 2), copies=2)
        assert len(g.edges) == 1 and len(h.edges) == 3


@pytest.mark.parametrize("impl", [py, pytest.param(cy, marks=needs_compiled)], ids=["python", "cython"])
def test_pebble_rejects_bad_parameters(impl):
    with pytest.raises(ValueError):
        impl.PebbleGame(3, 0)


@needs_compiled
@given(st.integers(0, 2**32 - 1), st.integers(1, 9), st.integers(1, 9), st.sampled_from([2, 3, 7, PRIME]))
def test_rank_mod_p_agrees(seed, r, c, p):
    rng = np.random.default_rng(seed)
    M = rng.integers(0, p, size=(r, c), dtype=np.uint64)
    if r > 1:
        M[-1] = M[0]
    assert py.rank_mod_p(M, p) == cy.rank_mod_p(M, p)


def test_rank_mod_p_known_values():
    for impl in [py] + ([cy] if cy else []):
        assert impl.rank_mod_p(np.eye(4, dtype=np.uint64), PRIME) == 4
        assert impl.rank_mod_p(np.array([[1, 2], [2, 4]], dtype=np.uint64), PRIME) == 1
        # full rank over the rationals, singular mod 3
        assert impl.rank_mod_p(np.array([[1, 1], [1, 4]], dtype=np.uint64), 3) == 1
        assert impl.rank_mod_p(np.zeros((0, 3), dtype=np.uint64), PRIME) == 0


@needs_compiled
@pytest.mark.parametrize("d,s,m", [(3, 1, 12), (3, 2, 14), (4, 2, 12), (4, 3, 20), (6, 4, 30)])
@pytest.mark.parametrize("jac", [True, False])
def test_incidence_minors_agree(d, s, m, jac):
    h, _ = build_construction(d, s, m)
    rng = np.random.default_rng(m)
    P = rng.normal(size=(h.n, d - 1))
    inst = PinnedInstance(h, tuple(rng.normal(size=(1, d - 1)) for _ in h.edges))
    args = _packed(inst)
    col = np.arange(h.n, dtype=np.int64) - 1  # vertex 0 frozen
    a = py.incidence_minors(P, *args, d, col, (h.n - 1) * (d - 1), jac)
    b = cy.incidence_minors(P, *args, d, col, (h.n - 1) * (d - 1), jac)
    if s <= 2:
        # closed forms on both sides: identical bits
        assert np.array_equal(a[0], b[0])
        assert not jac or np.array_equal(a[1], b[1])
    else:
        # different LU orderings
        assert np.allclose(a[0], b[0], rtol=1e-12, atol=1e-12 * np.abs(a[0]).max())
        assert not jac or np.allclose(a[1], b[1], rtol=1e-12, atol=1e-12 * np.abs(a[1]).max())


@pytest.mark.parametrize("impl", [py, pytest.param(cy, marks=needs_compiled)], ids=["python", "cython"])
def test_incidence_minors_rejects_bad_slots(impl):
    h, _ = build_construction(3, 2, 10)
    P = np.zeros((h.n, 2))
    inst = PinnedInstance(h, tuple(np.ones((1, 2)) for _ in h.edges))
    col = np.arange(h.n, dtype=np.int64)
    with pytest.raises(ValueError):
        impl.incidence_minors(P, *_packed(inst), 3, col, (h.n - 1) * 2, True)
    with pytest.raises(ValueError):
        impl.incidence_minors(P[:2], *_packed(inst), 3, col, h.n * 2, True)
