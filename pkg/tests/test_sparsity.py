import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import random_hypergraph, sparse_by_subsets, tight_sets
from rigidkit.hypergraph import MultiHypergraph, WeightedHypergraph, example_minimal_d3, expand
from rigidkit.sparsity import (
    SparsityError,
    brute_force_sparse,
    check_map_decomposition,
    is_sparse,
    is_tight,
    map_decompose,
    pebble_game,
    sparsity_report,
    tight_subsets,
)


def drop_copy(mh, c):
    return MultiHypergraph(mh.base, mh.copies[:c] + mh.copies[c + 1:])


def test_small_example_tight(backend):
    mh = expand(example_minimal_d3())
    res = pebble_game(mh, 2, 0)
    assert res.sparse and res.free_pebbles == 0
    assert is_tight(mh, 2)
    assert brute_force_sparse(mh, 2)


def test_count_violation_single_vertex(backend):
    h = WeightedHypergraph(3, ("v",), ((0,),), (2,))
    assert not pebble_game(expand(h), 2).sparse


def test_empty_is_sparse(backend):
    h = WeightedHypergraph(3, (), (), ())
    assert pebble_game(expand(h), 2).sparse
    h = WeightedHypergraph(3, ("a", "b"), (), ())
    assert pebble_game(expand(h), 2).sparse


def test_tight_needs_exact_count(backend):
    mh = expand(example_minimal_d3())
    assert not is_tight(drop_copy(mh, len(mh) - 1), 2)
    extra = MultiHypergraph(mh.base, mh.copies + (mh.copies[-1],))
    assert not is_tight(extra, 2)
    assert not is_sparse(extra, 2)


def test_brute_force_examples():
    h = example_minimal_d3()
    sub = WeightedHypergraph(3, ("v3", "v4"), ((0, 1),), (2,))
    assert brute_force_sparse(expand(sub), 2)
    three = WeightedHypergraph(4, ("v",), ((0,),), (1,))
    assert not brute_force_sparse(expand(three), 2)
    assert tight_subsets(expand(h), 2)[-1] == frozenset(range(4))


def test_brute_force_guard():
    h = WeightedHypergraph(3, tuple(f"v{i}" for i in range(21)), (), ())
    with pytest.raises(SparsityError):
        brute_force_sparse(expand(h), 2)


def test_map_decomposition_examples(backend):
    md = map_decompose(expand(example_minimal_d3()), 2)
    assert sorted(len(m) for m in md.maps()) == [4, 4]
    single = WeightedHypergraph(3, ("v",), ((0,),), (1,))
    md = map_decompose(expand(single), 2)
    assert sorted(md.map_index) == [0, 1] and md.tail == (0, 0)


def test_map_decompose_rejects_non_tight(backend):
    mh = expand(example_minimal_d3())
    with pytest.raises(SparsityError):
        map_decompose(drop_copy(mh, 0), 2)


def test_check_map_decomposition_catches_bad_tail():
    mh = expand(example_minimal_d3())
    md = map_decompose(mh, 2)
    bad = type(md)(md.map_index, (3,) + md.tail[1:], md.k)
    with pytest.raises(SparsityError):
        check_map_decomposition(mh, bad)


@given(st.integers(0, 2**32 - 1))
def test_pebble_game_matches_subset_oracle(seed):
    rng = np.random.default_rng(seed)
    h = random_hypergraph(rng, int(rng.integers(3, 6)), int(rng.integers(1, 7)))
    assert pebble_game(expand(h), h.d - 1).sparse == sparse_by_subsets(h)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_general_l_matches_oracle(seed, l):
    rng = np.random.default_rng(seed)
    h = random_hypergraph(rng, 3, int(rng.integers(1, 6)))
    k = 2
    if l >= 2 * k:
        return
    assert pebble_game(expand(h), k, l).sparse == sparse_by_subsets(h, k, l)


@given(st.integers(0, 2**32 - 1))
def test_pebble_state_invariants(seed):
    rng = np.random.default_rng(seed)
    h = random_hypergraph(rng, int(rng.integers(3, 6)), int(rng.integers(1, 7)))
    mh = expand(h)
    k = h.d - 1
    res = pebble_game(mh, k)
    assert all(0 <= p <= k for p in res.state.pebbles)
    placed = sum(res.accepted)
    assert sum(res.state.pebbles) + placed == k * h.n
    for c, tail in enumerate(res.state.orientation):
        assert (tail is None) == (not res.accepted[c])
        if tail is not None:
            assert tail in mh.members(c)


@given(st.integers(0, 2**32 - 1))
def test_decomposition_valid_under_any_order(seed):
    # shuffle the copy order of a tight multi-hypergraph; any result must validate
    rng = np.random.default_rng(seed)
    h = example_minimal_d3()
    for _ in range(50):
        from oracles import random_tight
        g = random_tight(rng, int(rng.integers(3, 5)), int(rng.integers(2, 6)))
        if g is not None and sparse_by_subsets(g):
            h = g
            break
    mh = expand(h)
    order = list(range(len(mh)))
    random.Random(seed).shuffle(order)
    shuffled = MultiHypergraph(mh.base, tuple(mh.copies[i] for i in order))
    md = map_decompose(shuffled, h.d - 1)
    check_map_decomposition(shuffled, md)


@given(st.integers(0, 2**32 - 1))
def test_tight_subsets_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    h = random_hypergraph(rng, 3, int(rng.integers(1, 6)))
    assert set(tight_subsets(expand(h), 2)) == set(tight_sets(h))


def test_report_fields():
    rep = sparsity_report(example_minimal_d3())
    assert rep == {"k": 2, "copies": 8, "capacity": 8, "sparse": True, "tight": True,
                   "free_pebbles": 0, "rejected": []}


@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_library_brute_force_matches_oracle(seed, l):
    rng = np.random.default_rng(seed)
    h = random_hypergraph(rng, 3, int(rng.integers(1, 6)))
    assert brute_force_sparse(expand(h), 2, l) == sparse_by_subsets(h, 2, l)
