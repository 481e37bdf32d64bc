"""(k, l)-sparsity of multi-hypergraphs via the pebble game, map decompositions,
and an exhaustive subset-enumeration oracle."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from . import _kernels
from .hypergraph import MultiHypergraph, expand


class SparsityError(ValueError):
    pass


@dataclass(frozen=True)
class PebbleState:
    pebbles: tuple[int, ...]
    # tail vertex per copy, None for rejected copies
    orientation: tuple[int | None, ...]


@dataclass(frozen=True)
class GameResult:
    sparse: bool
    state: PebbleState
    accepted: tuple[bool, ...]

    @property
    def free_pebbles(self) -> int:
        return sum(self.state.pebbles)


@dataclass(frozen=True)
class MapDecomposition:
    map_index: tuple[int, ...]
    tail: tuple[int, ...]
    k: int

    def maps(self) -> list[list[int]]:
        out = [[] for _ in range(self.k)]
        for c, j in enumerate(self.map_index):
            out[j].append(c)
        return out


def pebble_game(mh: MultiHypergraph, k: int, l: int = 0) -> GameResult:
    """Insert every copy in order; the multi-hypergraph is sparse iff none is rejected."""
    game = _kernels.PebbleGame(mh.n, k, l)
    accepted = []
    orient = []
    for c in range(len(mh)):
        ok = game.add_edge(mh.members(c))
        accepted.append(ok)
    tails = game.tails
    it = iter(tails)
    # tails only exist for accepted copies; map them back in insertion order
    for ok in accepted:
        orient.append(next(it) if ok else None)
    state = PebbleState(tuple(game.pebbles), tuple(orient))
    return GameResult(all(accepted), state, tuple(accepted))


def is_sparse(mh: MultiHypergraph, k: int, l: int = 0) -> bool:
    return pebble_game(mh, k, l).sparse


def is_tight(mh: MultiHypergraph, k: int) -> bool:
    if len(mh) != k * mh.n:
        return False
    return pebble_game(mh, k, 0).sparse


def map_decompose(mh: MultiHypergraph, k: int) -> MapDecomposition:
    """Split a (k,0)-tight multi-hypergraph into k map-graphs.

    After the game every vertex has out-degree exactly k; its out-copies are
    dealt to maps 0..k-1 in copy order.
    """
    res = pebble_game(mh, k, 0)
    if not res.sparse or len(mh) != k * mh.n:
        raise SparsityError(
            f"not ({k},0)-tight: {len(mh)} copies for {k * mh.n} slots, sparse={res.sparse}"
        )
    tails = res.state.orientation
    dealt = [0] * mh.n
    maps = []
    for c in range(len(mh)):
        v = tails[c]
        maps.append(dealt[v])
        dealt[v] += 1
    md = MapDecomposition(tuple(maps), tuple(tails), k)
    check_map_decomposition(mh, md)
    return md


def check_map_decomposition(mh: MultiHypergraph, md: MapDecomposition) -> None:
    """Raise SparsityError unless every vertex tails exactly one copy per map."""
    if len(md.map_index) != len(mh) or len(md.tail) != len(mh):
        raise SparsityError("decomposition does not cover every copy")
    count = {}
    for c in range(len(mh)):
        j, v = md.map_index[c], md.tail[c]
        if not 0 <= j < md.k:
            raise SparsityError(f"copy {c} has map index {j} outside [0, {md.k})")
        if v not in mh.members(c):
            raise SparsityError(f"copy {c} has tail {v} outside its hyperedge")
        count[(j, v)] = count.get((j, v), 0) + 1
    for j in range(md.k):
        for v in range(mh.n):
            if count.get((j, v), 0) != 1:
                raise SparsityError(f"vertex {v} tails {count.get((j, v), 0)} copies in map {j}")


BRUTE_FORCE_LIMIT = 20


def brute_force_sparse(mh: MultiHypergraph, k: int, l: int = 0) -> bool:
    """Check ``|E'| <= k|V'| - l`` over every vertex subset spanning a copy."""
    n = mh.n
    if n > BRUTE_FORCE_LIMIT:
        raise SparsityError(f"brute force limited to {BRUTE_FORCE_LIMIT} vertices, got {n}")
    masks = []
    for c in range(len(mh)):
        m = 0
        for v in mh.members(c):
            m |= 1 << v
        masks.append(m)
    for s in range(1, 1 << n):
        inside = sum(1 for m in masks if m & s == m)
        if inside and inside > k * bin(s).count("1") - l:
            return False
    return True


def tight_subsets(mh: MultiHypergraph, k: int):
    """All nonempty vertex subsets (as frozensets) whose induced copy count equals k|V'|."""
    n = mh.n
    if n > BRUTE_FORCE_LIMIT:
        raise SparsityError(f"brute force limited to {BRUTE_FORCE_LIMIT} vertices, got {n}")
    out = []
    for size in range(1, n + 1):
        for vs in combinations(range(n), size):
            s = set(vs)
            inside = sum(1 for c in range(len(mh)) if s.issuperset(mh.members(c)))
            if inside == k * size:
                out.append(frozenset(vs))
    return out


def sparsity_report(h, k: int | None = None) -> dict:
    mh = expand(h)
    k = h.d - 1 if k is None else k
    res = pebble_game(mh, k, 0)
    return {
        "k": k,
        "copies": len(mh),
        "capacity": k * mh.n,
        "sparse": res.sparse,
        "tight": res.sparse and len(mh) == k * mh.n,
        "free_pebbles": res.free_pebbles,
        "rejected": [c for c, ok in enumerate(res.accepted) if not ok],
    }
