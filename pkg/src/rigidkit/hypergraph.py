"""Weighted hypergraphs, their multi-hypergraph expansion, and instance documents.

A weighted hypergraph ``H = (V, E, m)`` in ambient dimension ``d`` carries one
pinning subspace of dimension ``m_k - 1`` (projectively) per hyperedge.  The
expansion replaces hyperedge ``e_k`` by ``m_k * (d - |e_k|)`` copies, one per
scalar incidence equation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class InstanceError(ValueError):
    """Base class for malformed hypergraphs or instance documents."""


class SchemaError(InstanceError):
    pass


class PinCountError(InstanceError):
    pass


class DimensionError(InstanceError):
    pass


class RankBoundError(InstanceError):
    """A hyperedge has ``|e_k| >= d``."""


class WeightError(InstanceError):
    """A pinned hyperedge asks for more pins than its span can hold generically."""


@dataclass(frozen=True)
class WeightedHypergraph:
    d: int
    vertices: tuple[str, ...]
    edges: tuple[tuple[int, ...], ...]
    weights: tuple[int, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 2:
            raise DimensionError(f"ambient dimension must be an integer >= 2, got {self.d!r}")
        if len(set(self.vertices)) != len(self.vertices):
            raise SchemaError("duplicate vertex ids")
        if len(self.edges) != len(self.weights):
            raise SchemaError("edges and weights differ in length")
        n = len(self.vertices)
        seen = set()
        edges = []
        for k, e in enumerate(self.edges):
            e = tuple(sorted(int(v) for v in e))
            if not e:
                raise SchemaError(f"hyperedge {k} is empty")
            if len(set(e)) != len(e):
                raise SchemaError(f"hyperedge {k} repeats a vertex")
            if e[0] < 0 or e[-1] >= n:
                raise SchemaError(f"hyperedge {k} references an unknown vertex")
            if len(e) >= self.d:
                raise RankBoundError(f"hyperedge {k} has {len(e)} vertices; rank must stay below d={self.d}")
            if e in seen:
                raise SchemaError(f"hyperedge {k} duplicates the vertex set of an earlier hyperedge")
            seen.add(e)
            edges.append(e)
        for k, m in enumerate(self.weights):
            if int(m) < 1:
                raise SchemaError(f"hyperedge {k} has weight {m}; weights must be positive")
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "weights", tuple(int(m) for m in self.weights))
        object.__setattr__(self, "vertices", tuple(str(v) for v in self.vertices))
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.vertices)})

    @classmethod
    def from_ids(cls, d: int, vertices: Sequence[str], hyperedges: Iterable[tuple[Sequence[str], int]]):
        """Build from vertex ids, e.g. ``[(("v1", "v3"), 1), ...]``."""
        index = {str(v): i for i, v in enumerate(vertices)}
        edges, weights = [], []
        for ids, m in hyperedges:
            try:
                edges.append(tuple(index[str(v)] for v in ids))
            except KeyError as exc:
                raise SchemaError(f"hyperedge references unknown vertex {exc.args[0]!r}") from None
            weights.append(m)
        return cls(d, tuple(str(v) for v in vertices), tuple(edges), tuple(weights))

    @property
    def n(self) -> int:
        return len(self.vertices)

    def index(self, vid: str) -> int:
        return self._index[vid]

    def rows(self, k: int) -> int:
        """Number of scalar equations contributed by hyperedge ``k``."""
        return self.weights[k] * (self.d - len(self.edges[k]))

    def total_rows(self) -> int:
        return sum(self.rows(k) for k in range(len(self.edges)))

    def dof(self) -> int:
        return (self.d - 1) * self.n

    def with_weights(self, weights: Sequence[int]) -> "WeightedHypergraph":
        """Same vertices; hyperedges with weight 0 are dropped."""
        keep = [k for k, m in enumerate(weights) if m > 0]
        return WeightedHypergraph(
            self.d, self.vertices, tuple(self.edges[k] for k in keep), tuple(weights[k] for k in keep)
        )


@dataclass(frozen=True)
class MultiHypergraph:
    """Expansion of a weighted hypergraph into labelled multi-hyperedge copies.

    ``copies[c] = (k, ordinal)``; copies are ordered by ``k`` then ordinal.
    """

    base: WeightedHypergraph
    copies: tuple[tuple[int, int], ...]

    @property
    def n(self) -> int:
        return self.base.n

    def members(self, c: int) -> tuple[int, ...]:
        return self.base.edges[self.copies[c][0]]

    def __len__(self) -> int:
        return len(self.copies)


def expand(h: WeightedHypergraph) -> MultiHypergraph:
    copies = []
    for k, e in enumerate(h.edges):
        if len(e) >= h.d:
            raise RankBoundError(f"hyperedge {k} violates the rank bound")
        copies.extend((k, o) for o in range(h.rows(k)))
    return MultiHypergraph(h, tuple(copies))


def induced_edge_indices(h: WeightedHypergraph, vs: Iterable[int]) -> list[int]:
    s = set(vs)
    return [k for k, e in enumerate(h.edges) if s.issuperset(e)]


def induced_subgraph(h: WeightedHypergraph, vs: Iterable[str | int]) -> WeightedHypergraph:
    """Vertex-induced subgraph. ``vs`` may hold vertex ids or integer indices."""
    idx = set()
    for v in vs:
        idx.add(h.index(v) if isinstance(v, str) else int(v))
    order = sorted(idx)
    remap = {old: new for new, old in enumerate(order)}
    keep = induced_edge_indices(h, idx)
    return WeightedHypergraph(
        h.d,
        tuple(h.vertices[i] for i in order),
        tuple(tuple(remap[v] for v in h.edges[k]) for k in keep),
        tuple(h.weights[k] for k in keep),
    )


@dataclass(frozen=True)
class PinnedInstance:
    hypergraph: WeightedHypergraph
    pins: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if self.pins is None:
            return
        h = self.hypergraph
        if len(self.pins) != len(h.edges):
            raise PinCountError(f"{len(self.pins)} pin groups for {len(h.edges)} hyperedges")
        fixed = []
        for k, group in enumerate(self.pins):
            arr = np.asarray(group, dtype=float)
            if arr.ndim == 1 and arr.size == 0:
                arr = arr.reshape(0, h.d - 1)
            if arr.ndim != 2:
                raise DimensionError(f"pins of hyperedge {k} are not a list of coordinate vectors")
            if arr.shape[0] != h.weights[k]:
                raise PinCountError(f"hyperedge {k} lists {arr.shape[0]} pins but declares weight {h.weights[k]}")
            if arr.shape[1] != h.d - 1:
                raise DimensionError(f"pins of hyperedge {k} have {arr.shape[1]} coordinates, expected {h.d - 1}")
            if not np.all(np.isfinite(arr)):
                raise DimensionError(f"pins of hyperedge {k} contain non-finite coordinates")
            if h.weights[k] > len(h.edges[k]):
                raise WeightError(
                    f"hyperedge {k} has {h.weights[k]} pins but spans only {len(h.edges[k])} points"
                )
            arr.setflags(write=False)
            fixed.append(arr)
        object.__setattr__(self, "pins", tuple(fixed))

    @property
    def d(self) -> int:
        return self.hypergraph.d


def _minimal_d3() -> WeightedHypergraph:
    return WeightedHypergraph.from_ids(
        3,
        ["v1", "v2", "v3", "v4"],
        [(("v1",), 1), (("v2",), 1), (("v1", "v3"), 1), (("v2", "v4"), 1), (("v3", "v4"), 2)],
    )


def example_minimal_d3() -> WeightedHypergraph:
    """The four-vertex, five-hyperedge minimally rigid system in d=3."""
    return _minimal_d3()


# -- instance documents --------------------------------------------------------

def instance_to_dict(inst: PinnedInstance) -> dict:
    h = inst.hypergraph
    doc = {"d": h.d, "vertices": list(h.vertices), "hyperedges": []}
    for k, e in enumerate(h.edges):
        he = {"vertices": [h.vertices[v] for v in e], "weight": h.weights[k]}
        if inst.pins is not None:
            he["pins"] = [[float(c) for c in row] for row in inst.pins[k]]
        doc["hyperedges"].append(he)
    return doc


def instance_from_dict(doc: dict, *, unique_supports: bool = False) -> PinnedInstance:
    if not isinstance(doc, dict):
        raise SchemaError("instance document must be an object")
    for key in ("d", "vertices", "hyperedges"):
        if key not in doc:
            raise SchemaError(f"missing key {key!r}")
    d = doc["d"]
    if not isinstance(d, int) or isinstance(d, bool):
        raise SchemaError("'d' must be an integer")
    if not isinstance(doc["vertices"], list) or not isinstance(doc["hyperedges"], list):
        raise SchemaError("'vertices' and 'hyperedges' must be lists")
    vertices = [str(v) for v in doc["vertices"]]
    pairs, pins = [], []
    have_pins = None
    for k, he in enumerate(doc["hyperedges"]):
        if not isinstance(he, dict) or "vertices" not in he:
            raise SchemaError(f"hyperedge {k} must be an object with 'vertices'")
        w = he.get("weight", 1)
        if not isinstance(w, int) or isinstance(w, bool):
            raise SchemaError(f"hyperedge {k}: 'weight' must be an integer")
        pairs.append((he["vertices"], w))
        has = "pins" in he
        if have_pins is None:
            have_pins = has
        elif have_pins != has:
            raise SchemaError("pins must be given for every hyperedge or for none")
        if has:
            if not isinstance(he["pins"], list):
                raise SchemaError(f"hyperedge {k}: 'pins' must be a list")
            pins.append(he["pins"])
    if unique_supports:
        sets = [frozenset(map(str, p[0])) for p in pairs]
        if len(set(sets)) != len(sets):
            raise SchemaError("two hyperedges share a vertex set")
    h = WeightedHypergraph.from_ids(d, vertices, pairs)
    if not have_pins:
        return PinnedInstance(h)
    groups = []
    for k, group in enumerate(pins):
        if len(group) != h.weights[k]:
            raise PinCountError(f"hyperedge {k} lists {len(group)} pins but declares weight {h.weights[k]}")
        for row in group:
            if not isinstance(row, list) or len(row) != d - 1:
                raise DimensionError(f"hyperedge {k}: every pin needs {d - 1} coordinates")
        groups.append(np.array(group, dtype=float).reshape(len(group), d - 1))
    return PinnedInstance(h, tuple(groups))


def parse_instance(text: str, *, unique_supports: bool = False) -> PinnedInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from None
    return instance_from_dict(doc, unique_supports=unique_supports)


def serialize_instance(inst: PinnedInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2)
