import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import exact_rank, planted_framework, random_tight, sparse_by_subsets
from rigidkit.hypergraph import PinnedInstance, WeightedHypergraph, example_minimal_d3, expand
from rigidkit.rigidity import (
    AffineDependenceError,
    Framework,
    FrameworkError,
    OutsideSpanError,
    allowed_map,
    analyze,
    assemble,
    barycentric,
    check_labeling,
    combinatorial_check,
    compatible_labeling,
    constraint_values,
    d_coefficients,
    find_labeling,
    flex_basis,
    generic_rank,
    is_nongeneric,
    matrix_from,
    numeric_rank,
    pure_condition_value,
    raw_jacobian,
    search_labeled_decomposition,
)
from rigidkit.sparsity import MapDecomposition, map_decompose


def framework(h, seed=0):
    P, pins = planted_framework(h, np.random.default_rng(seed))
    return Framework(PinnedInstance(h, pins), P)


def drop_pin(h, k):
    w = list(h.weights)
    w[k] -= 1
    keep = [i for i in range(len(h.edges)) if w[i] > 0]
    return WeightedHypergraph(h.d, h.vertices, tuple(h.edges[i] for i in keep), tuple(w[i] for i in keep))


# hand-built d=4 systems ---------------------------------------------------------

def two_lines_d4():
    # two doubly pinned lines joined by two singly pinned transversals
    return WeightedHypergraph.from_ids(
        4, ["a", "b", "c", "d"],
        [(("a", "b"), 2), (("c", "d"), 2), (("a", "c"), 1), (("b", "d"), 1)],
    )


def coplanar_pins_d4():
    # four pins forced into the plane of three vertices
    return WeightedHypergraph.from_ids(
        4, ["v1", "v2", "v3", "v4"],
        [(("v1",), 1), (("v2",), 1), (("v1", "v3"), 1), (("v2", "v4"), 1), (("v1", "v3", "v4"), 2)],
    )


# barycentric -------------------------------------------------------------------

def test_barycentric_examples():
    assert np.allclose(barycentric([[0, 0], [2, 2]], [1, 1]), [0.5, 0.5])
    assert np.allclose(barycentric([[0, 0], [2, 2]], [0, 0]), [1, 0])
    with pytest.raises(OutsideSpanError):
        barycentric([[0, 0], [1, 0]], [0, 1])
    with pytest.raises(AffineDependenceError):
        barycentric([[1, 1], [1, 1]], [1, 1])


@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_barycentric_property(seed, d):
    rng = np.random.default_rng(seed)
    s = int(rng.integers(1, d))
    P = rng.normal(size=(s, d - 1))
    b = rng.normal(size=s)
    b /= b.sum() if abs(b.sum()) > 0.1 else 1.0
    if abs(b.sum() - 1) > 1e-12:
        b[-1] += 1 - b.sum()
    got = barycentric(P, b @ P)
    assert np.isclose(got.sum(), 1)
    assert np.allclose(got @ P, b @ P, atol=1e-8)


# assembly ----------------------------------------------------------------------

def test_assemble_two_point_row():
    h = WeightedHypergraph(3, ("v1", "v2"), ((0, 1),), (1,))
    fr = Framework(PinnedInstance(h, (np.array([[1.0, 1.0]]),)), np.array([[0.0, 0.0], [2.0, 2.0]]))
    M = assemble(fr).matrix
    assert np.allclose(M, [[1, -1, 1, -1]])
    J = raw_jacobian(fr)
    ratio = J[0] / M[0]
    assert np.allclose(ratio, ratio[0]) and ratio[0] != 0


def test_assemble_double_pin_pattern_d4():
    h = WeightedHypergraph(4, ("v1", "v2"), ((0, 1),), (2,))
    rm = assemble(framework(h, 3))
    assert rm.shape == (4, 6)
    g1, g2 = rm.column_group(1), rm.column_group(2)
    for r, (_, t, _) in enumerate(rm.row_labels):
        zero_group = g2 if t == 0 else g1
        other = g1 if t == 0 else g2
        assert np.all(rm.matrix[r, zero_group] == 0)
        assert np.all(rm.matrix[r, other] != 0)


def test_assemble_single_vertex():
    h = WeightedHypergraph(3, ("v",), ((0,),), (1,))
    fr = Framework(PinnedInstance(h, (np.array([[0.3, -0.2]]),)), np.array([[0.3, -0.2]]))
    M = assemble(fr).matrix
    assert M.shape == (2, 2)
    assert np.count_nonzero(M[0]) == 1 and np.count_nonzero(M[1]) == 1
    assert np.flatnonzero(M[0])[0] != np.flatnonzero(M[1])[0]


@given(st.integers(0, 2**32 - 1))
def test_zero_pattern_property(seed):
    rng = np.random.default_rng(seed)
    h = random_tight(rng, int(rng.integers(3, 6)), int(rng.integers(1, 5)))
    if h is None or any(m > len(e) for e, m in zip(h.edges, h.weights)):
        return
    rm = assemble(framework(h, seed))
    d = h.d
    for r, (k, t, _) in enumerate(rm.row_labels):
        e = h.edges[k]
        for c, (v, j) in enumerate(rm.col_labels):
            structural = v in e and allowed_map(len(e), t, j)
            if not structural:
                assert rm.matrix[r, c] == 0
            else:
                assert rm.matrix[r, c] != 0
    assert rm.shape == (h.total_rows(), (d - 1) * h.n)


@given(st.integers(0, 2**32 - 1), st.integers(3, 6))
def test_last_column_coefficient_equal_across_t(seed, d):
    rng = np.random.default_rng(seed)
    s = int(rng.integers(1, d))
    D = d_coefficients(rng.normal(size=(s, d - 1)), d)
    diag = [D[t, s - 1 + t] for t in range(d - s)]
    assert np.allclose(diag, diag[0])


@given(st.integers(0, 2**32 - 1))
def test_simplified_rows_proportional_to_raw(seed):
    rng = np.random.default_rng(seed)
    h = random_tight(rng, int(rng.integers(3, 6)), int(rng.integers(1, 5)))
    if h is None or any(m > len(e) for e, m in zip(h.edges, h.weights)):
        return
    fr = framework(h, seed)
    M, J = assemble(fr).matrix, raw_jacobian(fr)
    for a, b in zip(M, J):
        scale = (a @ b) / (a @ a)
        assert scale != 0
        assert np.linalg.norm(b - scale * a) <= 1e-8 * np.linalg.norm(b)
    assert numeric_rank(M) == numeric_rank(J)


def test_jacobian_matches_finite_differences(backend):
    rng = np.random.default_rng(4)
    for _ in range(20):
        h = random_tight(rng, int(rng.integers(3, 6)), int(rng.integers(1, 5)))
        if h is None or any(m > len(e) for e, m in zip(h.edges, h.weights)):
            continue
        fr = framework(h, int(rng.integers(1 << 30)))
        F, J = constraint_values(fr)
        step = 1e-6
        fd = np.zeros_like(J)
        for c in range(J.shape[1]):
            P = fr.points.copy().ravel()
            P[c] += step
            Fp, _ = constraint_values(Framework(fr.instance, P.reshape(fr.points.shape)), with_jacobian=False)
            P[c] -= 2 * step
            Fm, _ = constraint_values(Framework(fr.instance, P.reshape(fr.points.shape)), with_jacobian=False)
            fd[:, c] = (Fp - Fm) / (2 * step)
        assert np.linalg.norm(fd - J) <= 1e-6 * max(1.0, np.linalg.norm(J))


def test_constraint_values_vanish_on_framework(backend):
    fr = framework(example_minimal_d3(), 7)
    F, _ = constraint_values(fr, with_jacobian=False)
    assert np.abs(F).max() < 1e-12


# generic rank ------------------------------------------------------------------

@pytest.mark.parametrize("rank_backend", ["prime", "float"])
def test_generic_rank_examples(backend, rank_backend):
    h = example_minimal_d3()
    assert generic_rank(h, backend=rank_backend) == 8
    assert generic_rank(drop_pin(h, 4), backend=rank_backend) == 7
    single = WeightedHypergraph(3, ("v",), ((0,),), (1,))
    assert generic_rank(single, backend=rank_backend) == 2


def test_generic_rank_rejects_bad_arguments():
    with pytest.raises(ValueError):
        generic_rank(example_minimal_d3(), trials=0)
    with pytest.raises(ValueError):
        generic_rank(example_minimal_d3(), backend="complex")


@given(st.integers(0, 2**32 - 1))
def test_prime_rank_kernel_matches_rational_rank(seed):
    from rigidkit import _kernels

    rng = np.random.default_rng(seed)
    r, c = int(rng.integers(1, 7)), int(rng.integers(1, 7))
    M = rng.integers(-3, 4, size=(r, c))
    if r > 1:
        M[-1] = M[0] * 2 - M[-1] * 0  # force some dependence
    p = (1 << 61) - 1
    assert _kernels.py.rank_mod_p(M % p, p) == exact_rank(M.tolist())
    if _kernels.compiled is not None:
        assert _kernels.compiled.rank_mod_p((M % p).astype(np.uint64), p) == exact_rank(M.tolist())


# combinatorial check -------------------------------------------------------------

def test_small_example_minimally_rigid(backend):
    h = example_minimal_d3()
    v = combinatorial_check(h)
    assert v.minimally_rigid and v.conditions_hold
    check_labeling(h, v.labeling)
    assert analyze(h).numeric_rank == 8


def test_count_deficit_is_flexible(backend):
    v = combinatorial_check(drop_pin(example_minimal_d3(), 4))
    assert v.combinatorial == "flexible"


def test_coplanar_pins_flagged():
    h = coplanar_pins_d4()
    v = combinatorial_check(h)
    assert v.conditions_hold
    assert v.combinatorial == "overconstrained"
    assert v.warnings and "v1, v3, v4" in v.warnings[0]
    assert generic_rank(h) < h.dof()


def test_overconstrained_and_mixed():
    h = WeightedHypergraph(3, ("a", "b"), ((0,), (1,), (0, 1)), (1, 1, 1))
    assert combinatorial_check(h).combinatorial == "overconstrained"
    h = WeightedHypergraph(3, ("a", "b"), ((0,),), (2,))
    assert combinatorial_check(h).combinatorial == "mixed"


def test_pigeonhole_labeling_failure():
    h = WeightedHypergraph(4, ("a", "b"), ((0, 1),), (1,))
    md = MapDecomposition((0, 0), (0, 1), 3)
    assert compatible_labeling(md, h) is None


def test_single_vertex_labels_forced():
    h = WeightedHypergraph(3, ("v",), ((0,),), (1,))
    md = map_decompose(expand(h), 2)
    lab = compatible_labeling(md, h)
    for c, (t, _) in lab.items():
        assert t == md.map_index[c]


def test_small_example_labeling_respects_conditions():
    h = example_minimal_d3()
    md = map_decompose(expand(h), 2)
    lab = compatible_labeling(md, h)
    assert lab is not None
    # the two copies of the doubly pinned hyperedge sit in one map with distinct pins
    mh = expand(h)
    last = [c for c, (k, _) in enumerate(mh.copies) if k == 4]
    assert len({md.map_index[c] for c in last}) == 1
    assert {lab[c][1] for c in last} == {0, 1}


@given(st.integers(0, 2**32 - 1))
def test_verdict_matches_generic_rank_sampled(seed):
    rng = np.random.default_rng(seed)
    h = random_tight(rng, int(rng.integers(3, 5)), int(rng.integers(1, 6)))
    if h is None:
        return
    v = combinatorial_check(h)
    assert v.minimally_rigid == (generic_rank(h, 3, seed) == h.dof())
    assert v.sparse == sparse_by_subsets(h)
    if v.labeling is not None:
        check_labeling(h, v.labeling)


@given(st.integers(0, 2**32 - 1))
def test_exhaustive_search_finds_valid_labelings(seed):
    rng = np.random.default_rng(seed)
    h = random_tight(rng, int(rng.integers(3, 5)), int(rng.integers(1, 5)))
    if h is None or not sparse_by_subsets(h):
        return
    ld = search_labeled_decomposition(h)
    if ld is not None:
        check_labeling(h, ld)
    assert (ld is None) == (find_labeling(h) is None)


def test_search_budget_gives_mixed():
    h = example_minimal_d3()
    with pytest.raises(RuntimeError):
        search_labeled_decomposition(h, budget=1)


def test_forced_degeneracy_beyond_count_heuristic():
    # conditions hold and no small subgraph is flagged, yet the pins are
    # forced into special position: the generic rank falls short
    cases = [
        WeightedHypergraph(
            4, tuple(f"v{i}" for i in range(5)),
            ((1, 3, 4), (2, 3, 4), (0, 1, 2), (2, 4), (0, 3, 4), (1, 2, 3), (0, 1, 4)),
            (3, 2, 1, 1, 3, 1, 3),
        ),
        WeightedHypergraph(
            5, tuple(f"v{i}" for i in range(6)),
            ((1, 2), (0, 2, 4, 5), (1, 3, 5), (0, 2, 3), (4,), (0, 1, 4, 5), (0, 1, 2), (0, 1, 3, 4), (0, 4, 5)),
            (1, 2, 2, 1, 1, 2, 2, 1, 1),
        ),
    ]
    for h in cases:
        v = combinatorial_check(h)
        assert v.conditions_hold and not v.warnings
        assert generic_rank(h, trials=3) < h.dof()


def test_verdict_document():
    h = example_minimal_d3()
    doc = analyze(h).to_dict(h)
    assert doc["verdict"] == "minimally-rigid"
    assert doc["numeric_rank"] == 8
    assert len(doc["labeling"]) == 8


# pure condition and flexes -----------------------------------------------------

def test_pure_condition_discriminates_aligned_pins():
    h = two_lines_d4()
    P = np.array([[0.0, 0, 0], [1, 0.2, 0.1], [0.3, 1, -0.5], [-0.6, 0.4, 1.2]])
    u = np.array([1.0, 0.5, 0.25])
    Q = np.array([0 * u, 1 * u, 2.5 * u, -1.5 * u])
    lam = [(0.3, 1.6), (-0.4, 0.7), (0.45,), (1.8,)]

    def pins(X):
        return tuple(np.array([(1 - t) * X[e[0]] + t * X[e[1]] for t in lam[k]]) for k, e in enumerate(h.edges))

    good = Framework(PinnedInstance(h, pins(P)), P)
    bad = Framework(PinnedInstance(h, pins(Q)), Q)
    assert abs(pure_condition_value(good)) > 1e-3
    assert not is_nongeneric(good) and is_nongeneric(bad)
    assert abs(pure_condition_value(bad)) <= 1e-6 * abs(pure_condition_value(good))


def test_repeated_point_gives_zero_determinant():
    h = example_minimal_d3()
    fr = framework(h, 2)
    P = fr.points.copy()
    P[3] = P[2]  # v4 onto v3: the doubly pinned hyperedge collapses
    pins = list(fr.instance.pins)
    pins[4] = np.array([P[2], P[2]])
    pins[3] = np.array([0.5 * (P[1] + P[3])])
    bad = Framework(PinnedInstance(h, tuple(pins)), P)
    assert pure_condition_value(bad) == 0.0


def test_pure_condition_needs_square_matrix():
    with pytest.raises(FrameworkError):
        pure_condition_value(framework(drop_pin(example_minimal_d3(), 4)))


def test_flex_basis_examples():
    h = example_minimal_d3()
    assert flex_basis(framework(h)) == []
    flex = flex_basis(framework(drop_pin(h, 4)))
    assert len(flex) == 1
    M = assemble(framework(drop_pin(h, 4))).matrix
    assert np.linalg.norm(M @ flex[0]) < 1e-9
    empty = WeightedHypergraph(3, ("a", "b"), (), ())
    fr = Framework(PinnedInstance(empty, ()), np.zeros((2, 2)))
    assert len(flex_basis(fr)) == 4


@given(st.integers(0, 2**32 - 1))
def test_pin_removal_never_raises_rank(seed):
    rng = np.random.default_rng(seed)
    h = random_tight(rng, int(rng.integers(3, 5)), int(rng.integers(1, 5)))
    if h is None or any(m > len(e) for e, m in zip(h.edges, h.weights)):
        return
    fr = framework(h, seed)
    full = numeric_rank(assemble(fr).matrix)
    for k in range(len(h.edges)):
        for l in range(h.weights[k]):
            g = drop_pin(h, k)
            pins = list(fr.instance.pins)
            pins[k] = np.delete(pins[k], l, axis=0)
            pins = [p for p in pins if len(p)]
            r = numeric_rank(assemble(Framework(PinnedInstance(g, tuple(pins)), fr.points)).matrix)
            assert r <= full
            if full == h.dof():
                # one pin carries d - |e| rows, all independent here
                assert r == full - (h.d - len(h.edges[k]))


def test_matrix_from_shape():
    h = example_minimal_d3()
    fr = framework(h)
    bary = [fr.bary(k) for k in range(len(h.edges))]
    assert matrix_from(h, fr.points, bary).shape == (8, 8)
