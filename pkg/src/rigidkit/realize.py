"""Numeric realization: residuals, a damped Newton / Levenberg-Marquardt
solver, the staged O(m) construction, DR-plans and rigid cores.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from . import _kernels
from .hypergraph import PinnedInstance, WeightedHypergraph, expand, induced_edge_indices
from .rigidity import (
    PRIME,
    Framework,
    FrameworkError,
    _matrix_mod_p,
    combinatorial_check,
    constraint_values,
    generic_rank,
)
from .sparsity import pebble_game


class SolveError(RuntimeError):
    """No real solution was found; this is not a proof that none exists."""

    def __init__(self, msg, best_residual=float("inf"), best=None):
        super().__init__(msg)
        self.best_residual = best_residual
        self.best = best


class StageError(SolveError):
    def __init__(self, msg, block, best_residual=float("inf"), best=None):
        super().__init__(msg, best_residual, best)
        self.block = block


class ConstructionError(ValueError):
    pass


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    tol: float = 1e-9
    max_iter: int = 100
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1 or self.restarts < 1:
            raise ValueError("max_iter and restarts must be >= 1")


COND_LIMIT = 1e8
STALL_WINDOW = 20
POLISH = 1e-4


def residual(fr: Framework) -> float:
    """Root-sum-square of every incidence minor."""
    F, _ = constraint_values(fr, with_jacobian=False)
    return float(np.sqrt(F @ F))


@dataclass
class SolveResult:
    framework: Framework
    residual: float
    restarts_used: int
    iterations: int


def _active_rows(h: WeightedHypergraph, free: set[int]) -> np.ndarray:
    mask = []
    for k, e in enumerate(h.edges):
        hit = any(v in free for v in e)
        mask.extend([hit] * h.rows(k))
    return np.array(mask, dtype=bool)


def _newton_lm(evaluate, x, cfg: SolveConfig):
    """Damped Newton with a Levenberg-Marquardt fallback; returns (x, |F|, iterations)."""
    F, J = evaluate(x)
    f = np.linalg.norm(F)
    lam = None
    it = 0
    history = []
    for it in range(1, cfg.max_iter + 1):
        if f <= cfg.tol:
            if f > POLISH * cfg.tol and J.shape[0] == J.shape[1] and np.linalg.cond(J) < COND_LIMIT:
                # one more Newton step is nearly free this close to a root
                xn = x + np.linalg.solve(J, -F)
                fn = np.linalg.norm(evaluate(xn)[0])
                if fn < f:
                    x, f = xn, fn
            return x, f, it - 1
        history.append(f)
        if len(history) > STALL_WINDOW and f > 0.999 * history[-STALL_WINDOW - 1]:
            break
        moved = False
        if J.shape[0] == J.shape[1] and np.linalg.cond(J) < COND_LIMIT:
            dx = np.linalg.solve(J, -F)
            alpha = 1.0
            while alpha > 1e-4:
                xn = x + alpha * dx
                Fn, Jn = evaluate(xn)
                fn = np.linalg.norm(Fn)
                if np.isfinite(fn) and fn < f:
                    x, F, J, f = xn, Fn, Jn, fn
                    moved = True
                    break
                alpha *= 0.5
        if moved:
            continue
        A = J.T @ J
        g = J.T @ F
        if lam is None:
            lam = 1e-3 * max(float(np.max(np.diag(A))), 1e-12)
        for _ in range(12):
            try:
                dx = np.linalg.solve(A + lam * np.eye(A.shape[0]), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            xn = x + dx
            Fn, Jn = evaluate(xn)
            fn = np.linalg.norm(Fn)
            if np.isfinite(fn) and fn < f:
                x, F, J, f = xn, Fn, Jn, fn
                lam /= 10
                moved = True
                break
            lam *= 10
        if not moved:
            break
    return x, f, it


def solve_report(inst: PinnedInstance, cfg: SolveConfig = SolveConfig(), init=None,
                 frozen=None) -> SolveResult:
    """Like :func:`solve` but also reports restarts and iterations used."""
    h = inst.hypergraph
    if inst.pins is None:
        raise FrameworkError("instance has no pins")
    dim = h.d - 1
    frozen = set() if frozen is None else {h.index(v) if isinstance(v, str) else int(v) for v in frozen}
    if frozen and init is None:
        raise ValueError("frozen vertices need initial positions")
    free = [v for v in range(h.n) if v not in frozen]
    base = np.zeros((h.n, dim)) if init is None else np.array(init, dtype=float).reshape(h.n, dim)
    rows = _active_rows(h, set(free))
    if int(rows.sum()) < len(free) * dim:
        raise ValueError(
            f"free subsystem has {int(rows.sum())} equations for {len(free) * dim} unknowns"
        )
    all_pins = np.vstack([p for p in inst.pins if p.size] or [np.zeros((1, dim))])
    spread = max(float(all_pins.std()), 1e-3)
    incident = {v: [k for k in range(len(h.edges)) if v in h.edges[k] and h.weights[k]] for v in free}

    def start(rng):
        # each free point near a random pin of a random incident hyperedge
        x = np.empty((len(free), dim))
        for i, v in enumerate(free):
            if incident[v]:
                pk = inst.pins[incident[v][rng.integers(len(incident[v]))]]
                x[i] = pk[rng.integers(len(pk))] + 0.3 * spread * rng.normal(size=dim)
            else:
                x[i] = rng.uniform(-1.0, 1.0, size=dim)
        return x.ravel()

    def evaluate(x):
        P = base.copy()
        P[free] = x.reshape(len(free), dim)
        F, J = constraint_values(Framework(inst, P), free)
        return F[rows], J[rows]

    best_f, best_P = float("inf"), None
    total_it = 0
    for r in range(cfg.restarts):
        if r == 0 and init is not None and np.all(np.isfinite(base[free])):
            x0 = base[free].ravel()
        else:
            x0 = start(np.random.default_rng([cfg.seed, r]))
        x, f, it = _newton_lm(evaluate, x0, cfg)
        total_it += it
        P = base.copy()
        P[free] = x.reshape(len(free), dim)
        fr = Framework(inst, P)
        res = residual(fr)
        if res < best_f:
            best_f, best_P = res, P
        if res <= cfg.tol:
            try:
                fr.check(tol=1e-6)
            except FrameworkError:
                continue  # degenerate root: coincident or collinear points
            return SolveResult(fr, res, r + 1, total_it)
    best = None if best_P is None else Framework(inst, best_P)
    raise SolveError(
        f"no real solution found after {cfg.restarts} restarts (best residual {best_f:.3g})",
        best_f,
        best,
    )


def solve(inst: PinnedInstance, cfg: SolveConfig = SolveConfig(), init=None, frozen=None) -> Framework:
    """Find a real framework satisfying every pin incidence.

    ``frozen`` vertices keep their ``init`` positions and their columns are
    removed from the Jacobian.  The first attempt starts from ``init`` when it
    gives finite positions for every free vertex (use NaN rows otherwise).  Raises :class:`SolveError` with the best
    residual seen when every restart fails.
    """
    return solve_report(inst, cfg, init, frozen).framework


# -- staged construction -------------------------------------------------------

def stage1_size(d: int, s: int) -> tuple[int, int, int]:
    """Smallest k with C(k(d-s), s) >= k(d-1); returns (k, |V0|, |E0|)."""
    if not 1 <= s < d:
        raise ValueError(f"need 1 <= s < d, got s={s}, d={d}")
    k = 1
    while comb(k * (d - s), s) < k * (d - 1):
        k += 1
    return k, k * (d - s), k * (d - 1)


@dataclass(frozen=True)
class Block:
    vertices: tuple[int, ...]
    edges: tuple[int, ...]


@dataclass(frozen=True)
class ConstructionTrace:
    d: int
    s: int
    k: int
    v0: tuple[int, ...]
    e0: tuple[int, ...]
    base: tuple[int, ...]
    # E1 vertex sets; entries < |V0| are base vertices, the rest index V1 locally from |V0|
    template: tuple[tuple[int, ...], ...]
    blocks: tuple[Block, ...]
    leftover: int

    @property
    def pins_used(self) -> int:
        return len(self.e0) + sum(len(b.edges) for b in self.blocks)


def _independent(h: WeightedHypergraph, seed: int) -> bool:
    return generic_rank(h, trials=2, seed=seed) == h.total_rows()


def _stage1(d, s, seed, tries=50):
    k, nv, ne = stage1_size(d, s)
    subsets = list(combinations(range(nv), s))
    for attempt in range(tries):
        order = list(subsets)
        if seed is not None or attempt:
            random.Random(f"{seed}:{attempt}").shuffle(order)
        game = _kernels.PebbleGame(nv, d - 1)
        chosen = []
        for e in order:
            if len(chosen) == ne:
                break
            if game.add_edge(e, copies=d - s):
                chosen.append(e)
        if len(chosen) != ne:
            continue
        h = WeightedHypergraph(d, tuple(f"a{i}" for i in range(nv)), tuple(chosen), (1,) * ne)
        if _independent(h, attempt) and combinatorial_check(h).minimally_rigid:
            return k, chosen
    raise ConstructionError(f"no generically rigid stage-1 hypergraph found for d={d}, s={s}")


def _stage2(d, s, nv, e0, seed, tries=200):
    """E1: d-1 hyperedges on V0 + V1, each meeting V1, tight over the frozen base."""
    v1 = list(range(nv, nv + d - s))
    cand = [e for e in combinations(range(nv + d - s), s) if any(v >= nv for v in e)]
    # one V1 vertex and s-1 base vertices first, as few V1 vertices as possible
    cand.sort(key=lambda e: (sum(v >= nv for v in e), e))
    for attempt in range(tries):
        order = list(cand)
        if seed is not None or attempt:
            rnd = random.Random(f"{seed}:s2:{attempt}")
            rnd.shuffle(order)
            if attempt % 2 == 0:
                order.sort(key=lambda e: sum(v >= nv for v in e))
        # base vertices hold no pebbles: only V1 can pay for new copies
        game = _restricted_game(nv, d - s, d - 1)
        chosen = []
        for e in order:
            if len(chosen) == d - 1:
                break
            if game.add_edge(e, copies=d - s):
                chosen.append(e)
        if len(chosen) != d - 1:
            continue
        full = list(e0) + chosen
        h = WeightedHypergraph(d, tuple(f"a{i}" for i in range(nv + d - s)), tuple(full), (1,) * len(full))
        if _block_independent(h, v1, chosen, attempt) and combinatorial_check(h).minimally_rigid:
            return chosen
    raise ConstructionError(f"no rigid stage-2 block found for d={d}, s={s}")


def _restricted_game(nv, n1, k):
    game = _kernels.PebbleGame(0, k)
    for _ in range(nv):
        game.add_vertex(0)
    for _ in range(n1):
        game.add_vertex(k)
    return game


def _block_independent(h, free, block_edges, seed) -> bool:
    """Rows of the block, restricted to its new vertices, have full rank generically."""
    dim = h.d - 1
    rng = np.random.default_rng(seed)
    M = _matrix_mod_p(h, rng, PRIME)
    start = h.total_rows() - len(block_edges) * (h.d - len(block_edges[0]))
    cols = [v * dim + j for v in free for j in range(dim)]
    sub = M[start:][:, cols]
    return _kernels.rank_mod_p(sub, PRIME) == len(cols) == sub.shape[0]


def build_construction(d: int, s: int, m: int, seed: int | None = None):
    """Hypergraph consuming ``m`` pins (one per hyperedge) and its construction trace.

    Stage 1 grows a rigid core H0 by a pebble game that adds ``d - s`` copies of
    an ``s``-subset per move.  Stage 2 appends ``d - s`` vertices and ``d - 1``
    hyperedges over base vertices of H0.  Stage 3 repeats that block with
    fresh vertices until fewer than ``d - 1`` pins remain.  ``seed=None``
    tries candidate hyperedges in lexicographic order.
    """
    k, nv, ne = stage1_size(d, s)
    if m < ne:
        raise ConstructionError(f"m={m} is below the {ne} pins stage 1 needs for d={d}, s={s}")
    k, e0 = _stage1(d, s, seed)
    edges = list(e0)
    nblocks = (m - ne) // (d - 1)
    leftover = (m - ne) % (d - 1)
    blocks = []
    template: tuple = ()
    base: tuple = ()
    n = nv
    if nblocks:
        e1 = _stage2(d, s, nv, e0, seed)
        template = tuple(e1)
        base = tuple(sorted({v for e in e1 for v in e if v < nv}))
        for b in range(nblocks):
            shift = n - nv
            new = tuple(range(n, n + d - s))
            ids = []
            for e in template:
                ids.append(len(edges))
                edges.append(tuple(v if v < nv else v + shift for v in e))
            blocks.append(Block(new, tuple(ids)))
            n += d - s
    h = WeightedHypergraph(d, tuple(f"a{i}" for i in range(n)), tuple(edges), (1,) * len(edges))
    trace = ConstructionTrace(d, s, k, tuple(range(nv)), tuple(range(ne)), base, template,
                              tuple(blocks), leftover)
    return h, trace


def _sub_instance(h, vertices, edge_ids, pins):
    vs = list(vertices)
    pos = {v: i for i, v in enumerate(vs)}
    sub = WeightedHypergraph(
        h.d,
        tuple(h.vertices[v] for v in vs),
        tuple(tuple(pos[v] for v in h.edges[k]) for k in edge_ids),
        tuple(h.weights[k] for k in edge_ids),
    )
    return PinnedInstance(sub, tuple(pins[k] for k in edge_ids))


def incremental_solve(h: WeightedHypergraph, trace: ConstructionTrace, pins, cfg: SolveConfig = SolveConfig(),
                      core=None):
    """Solve H0, then every block with the base vertices frozen.

    ``pins[k]`` is an ``(m_k, d-1)`` array for hyperedge ``k``.  Blocks only
    share frozen vertices, so their order does not matter.  ``core`` gives
    already solved positions of the H0 vertices (in ``trace.v0`` order).
    """
    dim = h.d - 1
    pins = [np.asarray(p, dtype=float).reshape(-1, dim) for p in pins]
    P = np.zeros((h.n, dim))
    if core is not None:
        P[list(trace.v0)] = np.asarray(core, dtype=float).reshape(len(trace.v0), dim)
    else:
        inst0 = _sub_instance(h, trace.v0, trace.e0, pins)
        try:
            fr0 = solve(inst0, cfg)
        except SolveError as exc:
            raise StageError(f"stage 1 core: {exc}", 0, exc.best_residual, exc.best) from None
        P[list(trace.v0)] = fr0.points
    for b, blk in enumerate(trace.blocks, start=1):
        vs = list(trace.base) + list(blk.vertices)
        inst = _sub_instance(h, vs, blk.edges, pins)
        init = np.full((len(vs), dim), np.nan)
        init[: len(trace.base)] = P[list(trace.base)]
        try:
            fr = solve(inst, cfg, init=init, frozen=range(len(trace.base)))
        except SolveError as exc:
            raise StageError(f"block {b}: {exc}", b, exc.best_residual, exc.best) from None
        P[list(blk.vertices)] = fr.points[len(trace.base):]
    used = PinnedInstance(h, tuple(pins))
    return Framework(used, P)


# -- DR-plans ------------------------------------------------------------------

@dataclass
class DRNode:
    vertices: tuple[int, ...]
    edges: tuple[int, ...]
    children: list["DRNode"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def fan_in(self) -> int:
        return len(self.children)

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def to_dict(self, h: WeightedHypergraph) -> dict:
        doc = {
            "vertices": [h.vertices[v] for v in self.vertices],
            "hyperedges": list(self.edges),
            "fan_in": self.fan_in,
        }
        if self.children:
            doc["children"] = [c.to_dict(h) for c in self.children]
        return doc


@dataclass
class DRPlan:
    hypergraph: WeightedHypergraph
    roots: list[DRNode]

    def nodes(self):
        for r in self.roots:
            yield from r.walk()

    @property
    def max_fan_in(self) -> int:
        return max((n.fan_in for n in self.nodes()), default=0)

    def to_dict(self) -> dict:
        return {"max_fan_in": self.max_fan_in, "roots": [r.to_dict(self.hypergraph) for r in self.roots]}


def _components(h, vs, edge_ids):
    """Connected components of the sub-hypergraph (vs, edge_ids)."""
    parent = {v: v for v in vs}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for k in edge_ids:
        e = h.edges[k]
        for v in e[1:]:
            a, b = find(e[0]), find(v)
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict = {}
    for v in sorted(vs):
        groups.setdefault(find(v), []).append(v)
    return [frozenset(g) for g in groups.values()]


def _sccs(nodes, succ):
    """Tarjan's algorithm, iterative.  Returns a list of frozensets."""
    index, low, on, stack, out = {}, {}, set(), [], []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on.add(root)
        while work:
            v, it = work[-1]
            pushed = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on.add(w)
                    work.append((w, iter(succ[w])))
                    pushed = True
                    break
                if w in on:
                    low[v] = min(low[v], index[w])
            if pushed:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                out.append(frozenset(comp))
    return out


def maximal_rigid_proper(h: WeightedHypergraph, succ, S: frozenset) -> list[frozenset]:
    """Vertex-maximal connected tight proper subsets of a tight set ``S``.

    With a tight orientation, tight sets are exactly the sets closed under
    out-arcs.  A maximal proper one is ``S`` minus a source strongly connected
    component, split into its connected pieces.
    """
    sub = {v: [w for w in succ[v] if w in S] for v in S}
    comps = _sccs(sorted(S), sub)
    where = {v: i for i, c in enumerate(comps) for v in c}
    has_in = set()
    for v in S:
        for w in sub[v]:
            if where[w] != where[v]:
                has_in.add(where[w])
    cands = set()
    for i, c in enumerate(comps):
        if i in has_in:
            continue
        T = S - c
        if not T:
            continue
        for piece in _components(h, T, induced_edge_indices(h, T)):
            cands.add(piece)
    maximal = [c for c in cands if not any(c < o for o in cands)]
    return sorted(maximal, key=lambda c: (min(c), -len(c), sorted(c)))


def drplan(h: WeightedHypergraph) -> DRPlan:
    """Recursive decomposition into vertex-maximal rigid proper subgraphs.

    When two of them share a vertex, those two are the only children;
    otherwise every one of them is a child, together with the hyperedges not
    inside any of them as leaves.
    """
    verdict = combinatorial_check(h)
    if not verdict.minimally_rigid:
        raise PlanError(f"drplan needs a minimally rigid system, got {verdict.combinatorial}")
    mh = expand(h)
    game = pebble_game(mh, h.d - 1)
    succ = {v: set() for v in range(h.n)}
    for c, v in enumerate(game.state.orientation):
        for w in mh.members(c):
            if w != v:
                succ[v].add(w)

    def leaf(k):
        return DRNode(h.edges[k], (k,))

    def build(S: frozenset) -> DRNode:
        edges = induced_edge_indices(h, S)
        if len(edges) == 1 and set(h.edges[edges[0]]) == S:
            return leaf(edges[0])
        cands = maximal_rigid_proper(h, succ, S)
        node = DRNode(tuple(sorted(S)), tuple(edges))
        pair = next(((a, b) for a, b in combinations(cands, 2) if a & b), None)
        if pair is not None:
            node.children = [build(pair[0]), build(pair[1])]
            return node
        covered = set()
        for c in cands:
            node.children.append(build(c))
            covered.update(induced_edge_indices(h, c))
        node.children.extend(leaf(k) for k in edges if k not in covered)
        return node

    roots = [build(c) for c in _components(h, range(h.n), range(len(h.edges)))]
    return DRPlan(h, roots)


# -- rigid cores -----------------------------------------------------------------

def pin_slots(h: WeightedHypergraph) -> list[int]:
    """Greedy pebble-game selection of independent pins; kept count per hyperedge."""
    game = _kernels.PebbleGame(h.n, h.d - 1)
    keep = [0] * len(h.edges)
    for k, e in enumerate(h.edges):
        for _ in range(h.weights[k]):
            if keep[k] < len(e) and game.add_edge(e, copies=h.d - len(e)):
                keep[k] += 1
    out = h.with_weights(keep)
    # counts miss degenerate subsets (few vertices, many pins); confirm by rank
    if generic_rank(out) != out.total_rows():
        keep = _rank_slots(h)
    return keep


def _rank_slots(h: WeightedHypergraph, seed: int = 0) -> list[int]:
    # same greedy, but by exact rank over a prime field
    M = _matrix_mod_p(h, np.random.default_rng(seed), PRIME)
    keep = [0] * len(h.edges)
    chosen: list[int] = []
    rank = 0
    r = 0
    for k, e in enumerate(h.edges):
        T = h.d - len(e)
        m = h.weights[k]
        for l in range(m):
            rows = [r + t * m + l for t in range(T)]
            trial = chosen + rows
            new = _kernels.rank_mod_p(M[trial], PRIME)
            if new == rank + T:
                chosen, rank = trial, new
                keep[k] += 1
        r += T * m
    return keep


def max_rigid_subsystem(h: WeightedHypergraph) -> WeightedHypergraph:
    """Maximal independent set of pins; hyperedges left without pins are dropped."""
    return h.with_weights(pin_slots(h))


def realize_by_plan(inst: PinnedInstance, plan: DRPlan, cfg: SolveConfig = SolveConfig(),
                    attempts: int = 3) -> Framework:
    """Solve bottom-up along a DR-plan, freezing vertices already placed by children.

    A child's solution may leave its parent without a real solution; the
    parent then asks its children for other solutions (new seeds), up to
    ``attempts`` times.
    """
    h = inst.hypergraph
    dim = h.d - 1
    pins = list(inst.pins)

    def rigid_leaf(node):
        k = node.edges[0]
        return h.rows(k) == dim * len(node.vertices)

    def place(node, salt) -> dict:
        if node.is_leaf and not rigid_leaf(node):
            return {}
        last = None
        for a in range(attempts):
            sub_cfg = SolveConfig(cfg.tol, cfg.max_iter, cfg.restarts, hash((cfg.seed, salt, a)) & 0x7FFFFFFF)
            known: dict = {}
            kids = [c for c in node.children if not (c.is_leaf and not rigid_leaf(c))]
            if len(kids) == 2 and set(kids[0].vertices) & set(kids[1].vertices):
                # overlapping pair: place one, solve the rest of the parent around it
                kids = kids[:1]
            for i, c in enumerate(kids):
                known.update(place(c, (salt, i, a)))
            vs = list(node.vertices)
            inst_n = _sub_instance(h, vs, node.edges, pins)
            init = np.full((len(vs), dim), np.nan)
            frozen = []
            for i, v in enumerate(vs):
                if v in known:
                    init[i] = known[v]
                    frozen.append(i)
            if len(frozen) == len(vs):
                return known
            try:
                fr = solve(inst_n, sub_cfg, init=init, frozen=frozen or None)
            except SolveError as exc:
                last = exc
                continue
            return {v: fr.points[i] for i, v in enumerate(vs)}
        raise SolveError(f"node on vertices {[h.vertices[v] for v in node.vertices]}: {last}",
                         last.best_residual if last else float("inf"))

    P = np.zeros((h.n, dim))
    for r, root in enumerate(plan.roots):
        for v, p in place(root, r).items():
            P[v] = p
    return Framework(inst, P)
