"""Rigidity matrices of pinned subspace-incidence frameworks and the
combinatorial test for generic minimal rigidity.

Coordinates live in the affine chart: a point of projective (d-1)-space is a
vector of length ``d - 1``.  Hyperedge ``e_k`` with ``s = |e_k|`` points and
pin ``x`` contributes ``d - s`` equations, equation ``t`` (0-based) being the
determinant of ``E[:, C(t)]`` with ``E`` the matrix of rows ``p_i - x`` and
``C(t) = {0, .., s-2} + {s-1+t}``.

Indices ``t``, ``l`` (pin) and map/column-group ``j`` are 0-based throughout;
a copy of ``e_k`` placed in map ``j`` may carry row ``t`` only if
``j <= s - 2`` or ``j == s - 1 + t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from . import _kernels
from .hypergraph import MultiHypergraph, PinnedInstance, WeightedHypergraph, expand
from .sparsity import MapDecomposition, SparsityError, check_map_decomposition, map_decompose, pebble_game

PRIME = (1 << 61) - 1
RANK_RTOL = 1e-9
SEARCH_BUDGET = 2_000_000
PURE_RTOL = 1e-9


class FrameworkError(ValueError):
    pass


class AffineDependenceError(FrameworkError):
    pass


class OutsideSpanError(FrameworkError):
    pass


def columns(s: int, t: int) -> list[int]:
    return list(range(s - 1)) + [s - 1 + t]


def allowed_map(s: int, t: int, j: int) -> bool:
    return j <= s - 2 or j == s - 1 + t


def row_labels(h: WeightedHypergraph) -> list[tuple[int, int, int]]:
    """Row order used everywhere: by hyperedge, then equation t, then pin l."""
    out = []
    for k, e in enumerate(h.edges):
        for t in range(h.d - len(e)):
            for l in range(h.weights[k]):
                out.append((k, t, l))
    return out


# -- geometry ---------------------------------------------------------------

def barycentric(points, pin, tol: float = 1e-9, dependent: bool = False) -> np.ndarray:
    """Affine coordinates of ``pin`` with respect to ``points`` (rows).

    With ``dependent=True`` affinely dependent points are accepted and the
    minimum-norm coordinates are returned.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    x = np.asarray(pin, dtype=float)
    s = P.shape[0]
    if s > 1 and not dependent:
        diff = P[1:] - P[0]
        sv = np.linalg.svd(diff, compute_uv=False)
        if sv[-1] <= tol * max(1.0, sv[0]):
            raise AffineDependenceError("points are affinely dependent")
    A = np.vstack([P.T, np.ones(s)])
    rhs = np.append(x, 1.0)
    b = np.linalg.lstsq(A, rhs, rcond=None)[0]
    resid = np.linalg.norm(A @ b - rhs)
    if resid > tol * max(1.0, np.abs(P).max(), np.abs(x).max()):
        raise OutsideSpanError(f"pin lies off the span of its points (residual {resid:.3g})")
    return b


def d_coefficients(P: np.ndarray, d: int) -> np.ndarray:
    """``D[t, j]``: det of ``P[:, C(t)]`` with column ``j`` replaced by ones (0 off ``C(t)``)."""
    s = P.shape[0]
    D = np.zeros((d - s, d - 1))
    for t in range(d - s):
        cols = columns(s, t)
        Vt = P[:, cols]
        for pos, j in enumerate(cols):
            M = Vt.copy()
            M[:, pos] = 1.0
            D[t, j] = _det(M)
    return D


def _det(M: np.ndarray) -> float:
    n = M.shape[0]
    if n == 1:
        return float(M[0, 0])
    if n == 2:
        return float(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])
    return float(np.linalg.det(M))


@dataclass(frozen=True)
class Framework:
    instance: PinnedInstance
    points: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        h = self.instance.hypergraph
        if P.shape != (h.n, h.d - 1):
            raise FrameworkError(f"points must have shape {(h.n, h.d - 1)}, got {P.shape}")
        object.__setattr__(self, "points", P)

    @property
    def hypergraph(self) -> WeightedHypergraph:
        return self.instance.hypergraph

    def check(self, tol: float = 1e-8) -> None:
        """Raise unless every pin sits in the affine span of its hyperedge's points."""
        for k in range(len(self.hypergraph.edges)):
            self.bary(k, tol)

    def bary(self, k: int, tol: float = 1e-8, dependent: bool = False) -> np.ndarray:
        h = self.hypergraph
        if self.instance.pins is None:
            raise FrameworkError("instance has no pins")
        P = self.points[list(h.edges[k])]
        try:
            return np.array([barycentric(P, x, tol, dependent) for x in self.instance.pins[k]])
        except FrameworkError as exc:
            raise type(exc)(f"hyperedge {k}: {exc}") from None


@dataclass
class RigidityMatrix:
    matrix: np.ndarray
    row_labels: list[tuple[int, int, int]]
    col_labels: list[tuple[int, int]]
    d: int

    @property
    def shape(self):
        return self.matrix.shape

    def column_group(self, j: int) -> list[int]:
        return [c for c, (_, jj) in enumerate(self.col_labels) if jj == j]

    def to_dict(self, vertices=None) -> dict:
        names = (lambda v: vertices[v]) if vertices is not None else (lambda v: v)
        return {
            "rows": [list(r) for r in self.row_labels],
            "columns": [[names(v), j] for v, j in self.col_labels],
            "entries": self.matrix.tolist(),
        }


def _col_labels(h: WeightedHypergraph) -> list[tuple[int, int]]:
    return [(v, j) for v in range(h.n) for j in range(h.d - 1)]


def matrix_from(h: WeightedHypergraph, points: np.ndarray, bary: list[np.ndarray]) -> np.ndarray:
    """Simplified rows ``D[t, j] * b[l, i]`` for given points and barycentric weights."""
    d = h.d
    M = np.zeros((h.total_rows(), h.n * (d - 1)))
    r = 0
    for k, e in enumerate(h.edges):
        D = d_coefficients(points[list(e)], d)
        B = bary[k]
        for t in range(d - len(e)):
            for l in range(h.weights[k]):
                for i, v in enumerate(e):
                    M[r, v * (d - 1):(v + 1) * (d - 1)] = D[t] * B[l, i]
                r += 1
    return M


def assemble(fr: Framework, tol: float = 1e-8) -> RigidityMatrix:
    h = fr.hypergraph
    # dependent points give identically zero rows, whatever coordinates are used
    bary = [fr.bary(k, tol, dependent=True) for k in range(len(h.edges))]
    M = matrix_from(h, fr.points, bary)
    return RigidityMatrix(M, row_labels(h), _col_labels(h), h.d)


def _packed(inst: PinnedInstance):
    # flat index layout for the minor kernel, built once per instance
    cached = inst.__dict__.get("_packed")
    if cached is None:
        h = inst.hypergraph
        e_ptr = np.zeros(len(h.edges) + 1, dtype=np.int64)
        x_ptr = np.zeros(len(h.edges) + 1, dtype=np.int64)
        for k, e in enumerate(h.edges):
            e_ptr[k + 1] = e_ptr[k] + len(e)
            x_ptr[k + 1] = x_ptr[k] + len(inst.pins[k])
        e_idx = np.array([v for e in h.edges for v in e], dtype=np.int64)
        X = np.concatenate([np.asarray(g).reshape(-1, h.d - 1) for g in inst.pins]) if h.edges else np.zeros((0, h.d - 1))
        cached = (e_ptr, e_idx, np.ascontiguousarray(X), x_ptr)
        object.__setattr__(inst, "_packed", cached)
    return cached


def constraint_values(fr: Framework, free: list[int] | None = None, with_jacobian: bool = True):
    """All minor values ``det(E[:, C(t)])`` and their exact Jacobian.

    ``free`` restricts Jacobian columns to those vertices (in that order).
    """
    h = fr.hypergraph
    d = h.d
    if fr.instance.pins is None:
        raise FrameworkError("instance has no pins")
    if free is None:
        col_of = np.arange(h.n, dtype=np.int64)
        ncols = h.n * (d - 1)
    else:
        col_of = np.full(h.n, -1, dtype=np.int64)
        col_of[list(free)] = np.arange(len(free))
        ncols = len(free) * (d - 1)
    e_ptr, e_idx, X, x_ptr = _packed(fr.instance)
    P = np.ascontiguousarray(fr.points, dtype=float)
    return _kernels.incidence_minors(P, e_ptr, e_idx, X, x_ptr, d, col_of, ncols, with_jacobian)


def raw_jacobian(fr: Framework) -> np.ndarray:
    """Jacobian of the minor equations with respect to all point coordinates."""
    return constraint_values(fr)[1]


# -- numeric rank ------------------------------------------------------------

def numeric_rank(M: np.ndarray) -> int:
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > sv[0] * RANK_RTOL * max(M.shape)))


def _random_bary(rng, s, m):
    B = rng.normal(size=(m, s))
    B[:, -1] = 1.0 - B[:, :-1].sum(axis=1)
    return B


def _det_int(M: list[list[int]], p: int) -> int:
    n = len(M)
    if n == 1:
        return M[0][0] % p
    if n == 2:
        return (M[0][0] * M[1][1] - M[0][1] * M[1][0]) % p
    total = 0
    for perm in permutations(range(n)):
        sign = 1
        seen = list(perm)
        for i in range(n):
            for j in range(i + 1, n):
                if seen[i] > seen[j]:
                    sign = -sign
        prod = sign
        for i in range(n):
            prod = prod * M[i][perm[i]]
        total += prod
    return total % p


def _matrix_mod_p(h: WeightedHypergraph, rng, p: int):
    d = h.d
    n_rows = h.total_rows()
    pts = [[int(rng.integers(0, p)) for _ in range(d - 1)] for _ in range(h.n)]
    M = [[0] * (h.n * (d - 1)) for _ in range(n_rows)]
    r = 0
    for k, e in enumerate(h.edges):
        s = len(e)
        m = h.weights[k]
        B = []
        for _ in range(m):
            b = [int(rng.integers(0, p)) for _ in range(s - 1)]
            b.append((1 - sum(b)) % p)
            B.append(b)
        for t in range(d - s):
            cols = columns(s, t)
            D = [0] * (d - 1)
            for pos, j in enumerate(cols):
                sub = [[1 if c == pos else pts[v][cols[c]] for c in range(s)] for v in e]
                D[j] = _det_int(sub, p)
            for l in range(m):
                row = M[r]
                for i, v in enumerate(e):
                    for j in range(d - 1):
                        row[v * (d - 1) + j] = (D[j] * B[l][i]) % p
                r += 1
    return np.array(M, dtype=np.uint64).reshape(n_rows, h.n * (d - 1))


def generic_rank(h: WeightedHypergraph, trials: int = 3, seed: int = 0, backend: str = "prime") -> int:
    """Maximum rank of the rigidity matrix over random evaluation points.

    ``backend="prime"`` computes exact ranks over GF(2**61 - 1); ``"float"``
    thresholds singular values.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if h.total_rows() == 0 or h.n == 0:
        return 0
    rng = np.random.default_rng(seed)
    best = 0
    full = min(h.total_rows(), h.dof())
    for _ in range(trials):
        if backend == "prime":
            r = _kernels.rank_mod_p(_matrix_mod_p(h, rng, PRIME), PRIME)
        elif backend == "float":
            pts = rng.normal(size=(h.n, h.d - 1))
            bary = [_random_bary(rng, len(e), h.weights[k]) for k, e in enumerate(h.edges)]
            r = numeric_rank(matrix_from(h, pts, bary))
        else:
            raise ValueError(f"unknown backend {backend!r}")
        best = max(best, r)
        if best == full:
            break
    return best


# -- pure condition and flexes ------------------------------------------------

def pure_condition_value(fr: Framework) -> float:
    M = assemble(fr).matrix
    if M.shape[0] != M.shape[1]:
        raise FrameworkError(f"rigidity matrix is {M.shape[0]}x{M.shape[1]}, not square")
    return float(np.linalg.det(M))


def pure_condition_ratio(fr: Framework) -> float:
    """|det M| over the product of row norms (Hadamard ratio, in [0, 1])."""
    M = assemble(fr).matrix
    if M.shape[0] != M.shape[1]:
        raise FrameworkError(f"rigidity matrix is {M.shape[0]}x{M.shape[1]}, not square")
    norms = np.linalg.norm(M, axis=1)
    if np.any(norms == 0):
        return 0.0
    return float(abs(np.linalg.det(M)) / np.prod(norms))


def is_nongeneric(fr: Framework) -> bool:
    return pure_condition_ratio(fr) < PURE_RTOL


def null_space(M: np.ndarray) -> np.ndarray:
    """Orthonormal kernel basis as rows."""
    ncols = M.shape[1]
    if M.shape[0] == 0 or ncols == 0:
        return np.eye(ncols)
    _, sv, vt = np.linalg.svd(M, full_matrices=True)
    r = 0 if sv[0] == 0 else int(np.sum(sv > sv[0] * RANK_RTOL * max(M.shape)))
    return vt[r:]


def flex_basis(fr: Framework) -> list[np.ndarray]:
    h = fr.hypergraph
    if h.total_rows() == 0:
        return list(np.eye(h.dof()))
    return list(null_space(assemble(fr).matrix))


# -- combinatorial characterisation ----------------------------------------

Labeling = dict  # copy index -> (t, l)


def compatible_labeling(md: MapDecomposition, h: WeightedHypergraph) -> Labeling | None:
    """Assign row labels (t, l) to copies so the decomposition's Laplace term survives.

    Within each hyperedge: copies in the same map get distinct l, copies with
    the same t get distinct tails, and a copy in map ``j >= s - 1`` must take
    ``t = j - s + 1``.  Returns None when no such labeling exists.
    """
    mh = expand(h)
    by_edge: dict[int, list[int]] = {}
    for c, (k, _) in enumerate(mh.copies):
        by_edge.setdefault(k, []).append(c)
    out: Labeling = {}
    for k in sorted(by_edge, key=lambda k: -len(by_edge[k])):
        got = _label_edge(by_edge[k], md, len(h.edges[k]), h.d, h.weights[k])
        if got is None:
            return None
        out.update(got)
    return dict(sorted(out.items()))


def _label_edge(copies, md, s, d, m):
    labels = [(t, l) for t in range(d - s) for l in range(m)]
    maps = [md.map_index[c] for c in copies]
    tails = [md.tail[c] for c in copies]
    # pigeonhole: a map holding more than m copies of this edge repeats some l
    for j in set(maps):
        if maps.count(j) > m:
            return None
    order = sorted(range(len(copies)), key=lambda i: (-(maps[i] >= s - 1), -maps[i], i))
    used = set()
    l_maps: dict[int, set] = {}
    t_tails: dict[int, set] = {}
    assign = {}

    def rec(pos):
        if pos == len(order):
            return True
        i = order[pos]
        j, v = maps[i], tails[i]
        for t, l in labels:
            if (t, l) in used or not allowed_map(s, t, j):
                continue
            if j in l_maps.get(l, ()) or v in t_tails.get(t, ()):
                continue
            used.add((t, l))
            l_maps.setdefault(l, set()).add(j)
            t_tails.setdefault(t, set()).add(v)
            assign[copies[i]] = (t, l)
            if rec(pos + 1):
                return True
            used.discard((t, l))
            l_maps[l].discard(j)
            t_tails[t].discard(v)
            del assign[copies[i]]
        return False

    return dict(assign) if rec(0) else None


@dataclass
class LabeledDecomposition:
    """A map decomposition together with a compatible labeling.

    Copy ``c`` of the expansion has tail ``decomposition.tail[c]``, map
    ``decomposition.map_index[c]`` and row label ``labels[c] = (t, l)``.
    """

    decomposition: MapDecomposition
    labels: Labeling

    def rows(self, h: WeightedHypergraph):
        mh = expand(h)
        return [
            (mh.copies[c][0], *self.labels[c], self.decomposition.tail[c], self.decomposition.map_index[c])
            for c in range(len(mh))
        ]


def _routable(rows, gates_of, cells_of, free_cells, used_gates) -> bool:
    """Route every row through a distinct gate to a distinct free cell.

    Unit-capacity flow rows -> gates -> cells, solved by DFS augmenting paths.
    Gates stand for one side of a labeling condition: ``(k, l, map)`` for 2a,
    ``(k, t, tail)`` for 2b.
    """
    row_gate: dict = {}
    gate_row: dict = {}
    gate_cell: dict = {}
    cell_gate: dict = {}

    def aug_row(r, seen):
        for g in gates_of(r):
            if g in used_gates or g == row_gate.get(r) or ("i", g) in seen:
                continue
            seen.add(("i", g))
            if g in gate_row:
                if aug_row(gate_row[g], seen):
                    gate_row[g] = r
                    row_gate[r] = g
                    return True
            elif aug_gate(g, seen):
                gate_row[g] = r
                row_gate[r] = g
                return True
        return False

    def aug_gate(g, seen):
        # g needs a new cell
        if ("o", g) in seen:
            return False
        seen.add(("o", g))
        for c in cells_of(g):
            if c not in free_cells or c == gate_cell.get(g) or ("c", c) in seen:
                continue
            seen.add(("c", c))
            if c not in cell_gate or aug_gate(cell_gate[c], seen):
                cell_gate[c] = g
                gate_cell[g] = c
                return True
        # or give the gate up entirely and re-route its row
        r = gate_row.get(g)
        if r is not None and ("i", g) not in seen:
            seen.add(("i", g))
            if aug_row(r, seen):
                if gate_row.get(g) == r:
                    del gate_row[g]
                gate_cell.pop(g, None)
                return True
        return False

    for r in rows:
        if not aug_row(r, set()):
            return False
    return True


def search_labeled_decomposition(h: WeightedHypergraph, budget: int = SEARCH_BUDGET) -> LabeledDecomposition | None:
    """Exhaustive search for a map decomposition with a compatible labeling.

    Each row ``(k, t, l)`` is placed on a distinct cell ``(vertex, map)``; the
    tail is the vertex and the map is the column group.  Hyperedges are placed
    one at a time.  Pruning: the unplaced rows must always be routable into
    the free cells under each labeling condition separately, pins of one hyperedge are interchangeable
    (their cell tuples are kept increasing), and dead (hyperedge, free cells)
    states are memoised.  Raises RuntimeError past ``budget`` search nodes.
    """
    d = h.d
    if h.total_rows() != h.dof():
        return None
    order = sorted(range(len(h.edges)), key=lambda k: (-h.rows(k), k))
    rows_of = {}
    adj = {}
    for k in order:
        e = h.edges[k]
        s = len(e)
        T = d - s
        rows_of[k] = [(k, t, l) for l in range(h.weights[k]) for t in range(T)]
        for t in range(T):
            cells = [(v, j) for j in reversed(range(d - 1)) if allowed_map(s, t, j) for v in e]
            for l in range(h.weights[k]):
                adj[(k, t, l)] = cells
    tail_rows = {}
    acc = []
    for idx in reversed(range(len(order))):
        tail_rows[idx] = list(acc)
        acc = rows_of[order[idx]] + acc
    all_rows = acc

    free = {(v, j) for v in range(h.n) for j in range(d - 1)}
    placed: dict = {}
    dead = set()
    counter = [0]

    edge_of = {k: h.edges[k] for k in order}

    def gates_a(row):
        k, t, l = row
        return [(k, l, j) for j in reversed(range(d - 1)) if allowed_map(len(edge_of[k]), t, j)]

    def cells_a(g):
        return [(v, g[2]) for v in edge_of[g[0]]]

    def gates_b(row):
        k, t, _ = row
        return [(k, t, v) for v in edge_of[k]]

    def cells_b(g):
        k, t, v = g
        return [(v, j) for j in reversed(range(d - 1)) if allowed_map(len(edge_of[k]), t, j)]

    def feasible(rows):
        used_a = {(k, l, placed[(k, t, l)][1]) for (k, t, l) in placed}
        used_b = {(k, t, placed[(k, t, l)][0]) for (k, t, l) in placed}
        return (_routable(rows, gates_a, cells_a, free, used_a)
                and _routable(rows, gates_b, cells_b, free, used_b))

    def place_edge(idx):
        if idx == len(order):
            return True
        key = (idx, frozenset(free))
        if key in dead:
            return False
        k = order[idx]
        rows = rows_of[k]
        T = d - len(h.edges[k])
        later = tail_rows[idx]
        l_maps: dict[int, set] = {}
        t_tails: dict[int, set] = {}

        def rec(pos):
            counter[0] += 1
            if counter[0] > budget:
                raise RuntimeError("labeling search budget exhausted")
            if pos == len(rows):
                return place_edge(idx + 1)
            row = rows[pos]
            _, t, l = row
            prev_first = placed[(k, 0, l - 1)] if (l > 0 and t == 0) else None
            for cell in adj[row]:
                if cell not in free:
                    continue
                if prev_first is not None and cell < prev_first:
                    continue
                v, j = cell
                if j in l_maps.get(l, ()) or v in t_tails.get(t, ()):
                    continue
                free.discard(cell)
                l_maps.setdefault(l, set()).add(j)
                t_tails.setdefault(t, set()).add(v)
                placed[row] = cell
                if feasible(rows[pos + 1:] + later) and rec(pos + 1):
                    return True
                free.add(cell)
                l_maps[l].discard(j)
                t_tails[t].discard(v)
                del placed[row]
            return False

        if rec(0):
            return True
        dead.add(key)
        return False

    if not feasible(all_rows):
        return None
    if not place_edge(0):
        return None
    mh = expand(h)
    maps, tails, labels = [], [], {}
    # copy ordinal o of hyperedge k <-> row (k, o // m, o % m)
    for c, (k, o) in enumerate(mh.copies):
        m = h.weights[k]
        row = (k, o // m, o % m)
        v, j = placed[row]
        maps.append(j)
        tails.append(v)
        labels[c] = row[1:]
    return LabeledDecomposition(MapDecomposition(tuple(maps), tuple(tails), d - 1), labels)


def check_labeling(h: WeightedHypergraph, ld: LabeledDecomposition) -> None:
    """Raise ValueError unless ``ld`` satisfies every structural and labeling condition."""
    mh = expand(h)
    check_map_decomposition(mh, ld.decomposition)
    seen = set()
    for c, (k, _) in enumerate(mh.copies):
        t, l = ld.labels[c]
        s = len(h.edges[k])
        if not (0 <= t < h.d - s and 0 <= l < h.weights[k]):
            raise ValueError(f"copy {c}: label {(t, l)} out of range")
        if (k, t, l) in seen:
            raise ValueError(f"copy {c}: label {(t, l)} reused within hyperedge {k}")
        seen.add((k, t, l))
        j = ld.decomposition.map_index[c]
        if not allowed_map(s, t, j):
            raise ValueError(f"copy {c}: row t={t} is zero in column group {j}")
    for c1 in range(len(mh)):
        for c2 in range(c1 + 1, len(mh)):
            if mh.copies[c1][0] != mh.copies[c2][0]:
                continue
            t1, l1 = ld.labels[c1]
            t2, l2 = ld.labels[c2]
            md = ld.decomposition
            if l1 == l2 and md.map_index[c1] == md.map_index[c2]:
                raise ValueError(f"copies {c1},{c2} share pin {l1} and map {md.map_index[c1]}")
            if t1 == t2 and md.tail[c1] == md.tail[c2]:
                raise ValueError(f"copies {c1},{c2} share equation {t1} and tail {md.tail[c1]}")


def general_position_warnings(h: WeightedHypergraph) -> list[str]:
    """Subgraphs on fewer than d vertices carrying more pins than vertices.

    Such subgraphs force their pins into a common flat, so the pins cannot be
    in general position.  Only edge-connected unions need checking.
    """
    d = h.d
    found = set()
    incident: dict[int, list[int]] = {}
    for k, e in enumerate(h.edges):
        for v in e:
            incident.setdefault(v, []).append(k)
    frontier = {frozenset(h.edges[k]) for k in range(len(h.edges))}
    seen = set()
    while frontier:
        nxt = set()
        for vs in frontier:
            if vs in seen:
                continue
            seen.add(vs)
            pins = sum(h.weights[k] for k, e in enumerate(h.edges) if vs.issuperset(e)) \
                if len(vs) < d else 0
            if len(vs) < d and pins > len(vs):
                found.add(vs)
            for v in vs:
                for k in incident[v]:
                    u = vs | set(h.edges[k])
                    if len(u) < d and u not in seen:
                        nxt.add(frozenset(u))
        frontier = nxt
    msgs = []
    for vs in sorted(found, key=lambda s: (len(s), sorted(s))):
        pins = sum(h.weights[k] for k, e in enumerate(h.edges) if vs.issuperset(e))
        names = ", ".join(h.vertices[v] for v in sorted(vs))
        msgs.append(f"{{{names}}}: {pins} pins on {len(vs)} vertices forces pins out of general position")
    return msgs


@dataclass
class RigidityVerdict:
    combinatorial: str
    numeric_rank: int | None
    rows: int
    dof: int
    sparse: bool
    labeling: LabeledDecomposition | None = None
    flex_basis: list | None = None
    warnings: list[str] = field(default_factory=list)
    # count, sparsity and labeling conditions all hold (before the general-position rule)
    conditions_hold: bool = False

    @property
    def minimally_rigid(self) -> bool:
        return self.combinatorial == "minimally-rigid"

    def to_dict(self, h: WeightedHypergraph | None = None) -> dict:
        doc = {
            "verdict": self.combinatorial,
            "rows": self.rows,
            "dof": self.dof,
            "sparse": self.sparse,
            "conditions_hold": self.conditions_hold,
            "numeric_rank": self.numeric_rank,
            "warnings": list(self.warnings),
        }
        if self.labeling is not None and h is not None:
            doc["labeling"] = [
                {
                    "hyperedge": k,
                    "t": t,
                    "l": l,
                    "tail": h.vertices[v],
                    "map": j,
                }
                for k, t, l, v, j in self.labeling.rows(h)
            ]
        if self.flex_basis is not None:
            doc["flex_count"] = len(self.flex_basis)
        return doc


def find_labeling(h: WeightedHypergraph, mh: MultiHypergraph | None = None,
                  budget: int = SEARCH_BUDGET) -> LabeledDecomposition | None:
    """Pebble-game decomposition first; exhaustive search if its labeling fails."""
    mh = expand(h) if mh is None else mh
    try:
        md = map_decompose(mh, h.d - 1)
    except SparsityError:
        return None
    lab = compatible_labeling(md, h)
    if lab is not None:
        return LabeledDecomposition(md, lab)
    return search_labeled_decomposition(h, budget)


def combinatorial_check(h: WeightedHypergraph, budget: int = SEARCH_BUDGET) -> RigidityVerdict:
    """Count, sparsity and labeling conditions, then the general-position rule.

    A hypergraph that meets every condition but contains a small subgraph
    forcing its pins into a lower-dimensional span is reported as
    overconstrained, with ``conditions_hold`` set and the offending subgraph
    listed in ``warnings``.
    """
    mh = expand(h)
    rows, dof = len(mh), h.dof()
    sparse = pebble_game(mh, h.d - 1, 0).sparse
    warnings = general_position_warnings(h)
    lab = None
    ok = False
    if sparse and rows == dof:
        try:
            lab = find_labeling(h, mh, budget)
        except RuntimeError:
            warnings.append(f"labeling search gave up after {budget} nodes")
            verdict = "mixed"
        else:
            ok = lab is not None
            if not ok:
                verdict = "mixed"
            elif warnings:
                verdict = "overconstrained"
            else:
                verdict = "minimally-rigid"
    elif sparse:
        verdict = "flexible"
    elif rows > dof:
        verdict = "overconstrained"
    else:
        verdict = "mixed"
    return RigidityVerdict(verdict, None, rows, dof, sparse, lab, None, warnings, ok)


def analyze(h: WeightedHypergraph, trials: int = 3, seed: int = 0, backend: str = "prime") -> RigidityVerdict:
    """Combinatorial verdict plus the numeric generic-rank cross-check."""
    v = combinatorial_check(h)
    v.numeric_rank = generic_rank(h, trials, seed, backend)
    return v
