"""Sparse dictionary learning through pinned subspace-incidence realization.

A data point ``x`` in R^d is a pin: its line through the origin must lie in the
span of the dictionary vectors on its support.  Working in an affine chart,
each point becomes a pin of ``d - 1`` coordinates and each dictionary vector a
vertex, so learning a dictionary is realizing a pinned hypergraph.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from math import ceil

import numpy as np

from . import _kernels
from .hypergraph import InstanceError, PinnedInstance, WeightedHypergraph
from .realize import (
    SolveConfig,
    SolveError,
    StageError,
    _sub_instance,
    build_construction,
    drplan,
    incremental_solve,
    pin_slots,
    realize_by_plan,
    solve,
    stage1_size,
)
from .rigidity import combinatorial_check

COEF_FLOOR = 1e-12
ROTATION_CANDIDATES = 8
CHART_MARGIN = 1e-6


class DataError(ValueError):
    pass


class LearnError(RuntimeError):
    pass


def size_bound(m: int, d: int, s: int) -> int:
    """Fewest dictionary vectors that can represent ``m`` generic points ``s``-sparsely."""
    if not 1 <= s < d:
        raise ValueError(f"need 1 <= s < d, got s={s}, d={d}")
    return ceil((d - s) * m / (d - 1))


@dataclass
class Dataset:
    points: np.ndarray
    # optional support (tuple of atom indices) per point, for fitted learning
    supports: list[tuple[int, ...]] | None = None
    atoms: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.points, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DataError("points must be a non-empty 2-d array, one point per row")
        if not np.all(np.isfinite(X)):
            raise DataError("points contain non-finite values")
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms == 0):
            raise DataError(f"point {int(np.argmin(norms))} is zero")
        self.points = X
        if self.supports is not None:
            if len(self.supports) != X.shape[0]:
                raise DataError(f"{len(self.supports)} supports for {X.shape[0]} points")
            self.supports = [tuple(sorted(int(v) for v in sup)) for sup in self.supports]
            n = 1 + max((max(sup) for sup in self.supports if sup), default=-1)
            if self.atoms is None:
                self.atoms = tuple(f"v{j}" for j in range(n))
            elif len(self.atoms) < n:
                raise DataError("support references an atom beyond the atom list")

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass
class Dictionary:
    vectors: np.ndarray  # d x n, unit columns
    supports: list[tuple[int, ...]]
    coefficients: list[np.ndarray]
    names: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @property
    def d(self) -> int:
        return self.vectors.shape[0]

    def theta(self, i: int) -> np.ndarray:
        out = np.zeros(self.n)
        out[list(self.supports[i])] = self.coefficients[i]
        return out

    def reconstruct(self, i: int) -> np.ndarray:
        return self.vectors[:, list(self.supports[i])] @ self.coefficients[i]

    def to_dict(self) -> dict:
        names = self.names or tuple(f"v{j}" for j in range(self.n))
        return {
            "d": self.d,
            "n": self.n,
            "vectors": {names[j]: [float(c) for c in self.vectors[:, j]] for j in range(self.n)},
            "points": [
                {"support": [names[j] for j in sup], "coefficients": [float(c) for c in coef]}
                for sup, coef in zip(self.supports, self.coefficients)
            ],
        }


@dataclass
class VerifyReport:
    errors: np.ndarray
    support_sizes: np.ndarray
    s: int
    tol: float

    @property
    def failures(self) -> list[int]:
        bad = (self.errors > self.tol) | (self.support_sizes > self.s)
        return [int(i) for i in np.flatnonzero(bad)]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_error": float(self.errors.max()) if self.errors.size else 0.0,
            "max_support": int(self.support_sizes.max()) if self.support_sizes.size else 0,
            "failures": self.failures,
        }


def verify(X, D: Dictionary, s: int, tol: float = 1e-6) -> VerifyReport:
    """Relative reconstruction error and support size of every point."""
    pts = X.points if isinstance(X, Dataset) else np.asarray(X, dtype=float)
    if len(D.supports) != pts.shape[0]:
        raise DataError(f"dictionary has coefficients for {len(D.supports)} points, data has {pts.shape[0]}")
    errs = np.empty(pts.shape[0])
    sizes = np.empty(pts.shape[0], dtype=int)
    for i, x in enumerate(pts):
        errs[i] = np.linalg.norm(x - D.reconstruct(i)) / np.linalg.norm(x)
        sizes[i] = int(np.count_nonzero(D.coefficients[i]))
    return VerifyReport(errs, sizes, s, tol)


# -- chart -------------------------------------------------------------------

def _random_rotation(rng, d):
    Q, R = np.linalg.qr(rng.normal(size=(d, d)))
    return Q * np.sign(np.diag(R))


def choose_rotation(X: np.ndarray, seed: int = 0) -> np.ndarray:
    """Orthogonal ``Q`` keeping every rotated point far from the chart boundary.

    Among a few seeded random rotations, keep the one maximising the smallest
    ``|(Qx)_d| / |x|`` over the data.
    """
    rng = np.random.default_rng([seed, 0xC4A7])
    unit = X / np.linalg.norm(X, axis=1, keepdims=True)
    best, best_q = -1.0, None
    for _ in range(ROTATION_CANDIDATES):
        Q = _random_rotation(rng, X.shape[1])
        score = float(np.min(np.abs(unit @ Q[-1])))
        if score > best:
            best, best_q = score, Q
    return best_q


def to_chart(X: np.ndarray, Q: np.ndarray) -> np.ndarray:
    Y = X @ Q.T
    return Y[:, :-1] / Y[:, -1:]


def lift(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Chart points (rows) to unit ambient vectors (columns), first nonzero entry positive."""
    Y = np.hstack([P, np.ones((P.shape[0], 1))]) @ Q
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    for row in Y:
        nz = np.flatnonzero(np.abs(row) > COEF_FLOOR)
        if nz.size and row[nz[0]] < 0:
            row *= -1
    return Y.T


def _coefficients(X, V, supports):
    coefs = []
    for x, sup in zip(X, supports):
        A = V[:, list(sup)]
        c = np.linalg.lstsq(A, x, rcond=None)[0]
        c[np.abs(c) < COEF_FLOOR] = 0.0
        coefs.append(c)
    return coefs


# -- random data --------------------------------------------------------------

@dataclass
class LearnResult:
    dictionary: Dictionary
    hypergraph: WeightedHypergraph
    assignment: list[int]  # data index of hyperedge k
    unused: list[int]
    trace: object = None
    warnings: list[str] = field(default_factory=list)
    rotation: np.ndarray | None = None


def learn_random(X, s: int, cfg: SolveConfig = SolveConfig(), construction_seed: int | None = None,
                 core_attempts: int = 8) -> LearnResult:
    """Dictionary of size ``(d-s)/(d-1) * m`` for generic data, in O(m) time.

    Points are consumed in order, one per hyperedge of the staged
    construction; points beyond the last full stage are reported in
    ``unused``.  When the core has no real solution, or a block has none over
    the core solution found, another batch of points (or, once batches run
    out, a reshuffle of them over the core hyperedges) is tried with a fresh
    solver seed, up to ``core_attempts`` times.
    """
    data = X if isinstance(X, Dataset) else Dataset(X)
    pts, d, m = data.points, data.d, data.m
    if not 1 <= s < d:
        raise ValueError(f"need 1 <= s < d, got s={s}, d={d}")
    _, _, ne = stage1_size(d, s)
    h, trace = build_construction(d, s, m, construction_seed)
    used = trace.pins_used
    Q = choose_rotation(pts, cfg.seed)
    chart = to_chart(pts, Q)
    last = None
    batches = used // ne
    rng = np.random.default_rng([cfg.seed, 5])
    for a in range(core_attempts):
        b = a % batches
        core = list(range(b * ne, (b + 1) * ne))
        if a >= batches:
            # same points, different hyperedges: a different system
            core = [core[i] for i in rng.permutation(ne)]
        order = core + [i for i in range(used) if not b * ne <= i < (b + 1) * ne]
        pins = [chart[i:i + 1] for i in order]
        # the core gets a chart of its own, so its solve does not depend on the rest of the data
        Q0 = choose_rotation(pts[core], cfg.seed)
        own = to_chart(pts[[order[k] for k in trace.e0]], Q0)
        inst0 = _sub_instance(h, trace.v0, trace.e0, {k: own[j:j + 1] for j, k in enumerate(trace.e0)})
        sub = cfg if a == 0 else SolveConfig(cfg.tol, cfg.max_iter, cfg.restarts, cfg.seed + 7919 * a)
        try:
            fr0 = solve(inst0, sub)
        except SolveError as exc:
            last = StageError(f"stage 1 core: {exc}", 0, exc.best_residual, exc.best)
            continue
        V0 = lift(fr0.points, Q0)
        if np.min(np.abs(Q[-1] @ V0)) < CHART_MARGIN:
            last = StageError("stage 1 core: a core vector lies on the chart boundary", 0, 0.0, fr0)
            continue
        try:
            fr = incremental_solve(h, trace, pins, cfg, core=to_chart(V0.T, Q))
        except StageError as exc:
            # a block may have only degenerate solutions over this core root
            last = exc
            continue
        V = lift(fr.points, Q)
        supports = [h.edges[k] for k in range(len(order))]
        sel = pts[order]
        coefs = _coefficients(sel, V, supports)
        # report coefficients in data order
        inv = {i: k for k, i in enumerate(order)}
        sup_d = [supports[inv[i]] for i in range(used)]
        coef_d = [coefs[inv[i]] for i in range(used)]
        D = Dictionary(V, sup_d, coef_d, h.vertices)
        warnings = []
        if used < m:
            warnings.append(f"{m - used} points beyond the last full stage were not used")
        return LearnResult(D, h, order, list(range(used, m)), trace, warnings, Q)
    raise LearnError(f"construction could not be realized: {last}")


# -- fitted --------------------------------------------------------------------

@dataclass
class FittedResult:
    dictionary: Dictionary
    core: WeightedHypergraph
    plan: object
    core_points: list[int]
    validation_points: list[int]
    validation_errors: np.ndarray
    warnings: list[str] = field(default_factory=list)


def support_hypergraph(data: Dataset) -> tuple[WeightedHypergraph, list[list[int]]]:
    """Group points by support; weight = number of points sharing it."""
    if data.supports is None:
        raise DataError("fitted learning needs a support per point")
    groups: dict[tuple[int, ...], list[int]] = {}
    for i, sup in enumerate(data.supports):
        groups.setdefault(sup, []).append(i)
    edges = list(groups)
    h = WeightedHypergraph(data.d, tuple(data.atoms), tuple(edges), tuple(len(groups[e]) for e in edges))
    return h, [groups[e] for e in edges]


def learn_fitted(data: Dataset, cfg: SolveConfig = SolveConfig(), tol: float = 1e-6,
                 attempts: int = 4) -> FittedResult:
    """Dictionary for data with known supports, realized along a DR-plan.

    Pins beyond a maximal independent set are held out and checked against
    the recovered dictionary.  The core may have several real solutions, so
    when held-out points miss, the core is realized again from other seeds
    (``attempts`` in all) and the best fit is kept.  A remaining miss means
    the data is not in general position or not consistent.
    """
    h, members = support_hypergraph(data)
    keep = pin_slots(h)
    core = h.with_weights(keep)
    verdict = combinatorial_check(core)
    if not verdict.minimally_rigid:
        raise LearnError(
            f"the independent core is {verdict.combinatorial}, not minimally rigid; "
            f"{core.total_rows()} equations for {core.dof()} unknowns"
        )
    Q = choose_rotation(data.points, cfg.seed)
    chart = to_chart(data.points, Q)
    core_idx, val_idx, pins = [], [], []
    for k, idx in enumerate(members):
        core_idx.extend(idx[: keep[k]])
        val_idx.extend(idx[keep[k]:])
        if keep[k]:
            pins.append(chart[idx[: keep[k]]])
    inst = PinnedInstance(core, tuple(pins))
    plan = drplan(core)
    best = None
    last = None
    for a in range(attempts if val_idx else 1):
        sub = SolveConfig(cfg.tol, cfg.max_iter, cfg.restarts, cfg.seed + 7919 * a)
        try:
            fr = realize_by_plan(inst, plan, sub)
        except SolveError as exc:
            last = exc
            continue
        V = lift(fr.points, Q)
        coefs = _coefficients(data.points, V, data.supports)
        D = Dictionary(V, list(data.supports), coefs, core.vertices)
        val_err = np.array([np.linalg.norm(data.points[i] - D.reconstruct(i)) / np.linalg.norm(data.points[i])
                            for i in val_idx])
        worst = float(val_err.max()) if val_err.size else 0.0
        if best is None or worst < best[0]:
            best = (worst, D, val_err)
        if worst <= tol:
            break
    if best is None:
        raise LearnError(f"core realization failed: {last}")
    _, D, val_err = best
    warnings = []
    breach = [val_idx[j] for j in np.flatnonzero(val_err > tol)]
    if breach:
        warnings.append(
            f"{len(breach)} held-out points miss their support span by more than {tol:g}: "
            "data is not generic or not consistent"
        )
    return FittedResult(D, core, plan, core_idx, val_idx, val_err, warnings)


# -- planted generators ------------------------------------------------------------

def planted_random(d: int, s: int, m: int, seed: int = 0):
    """Points each drawn from the span of ``s`` columns of a hidden Gaussian dictionary.

    Supports follow the staged construction, so the planted dictionary has
    the size the bound asks for.  Returns ``(X, D_hidden, supports)``.
    """
    rng = np.random.default_rng([seed, 1])
    h, trace = build_construction(d, s, m)
    D = rng.normal(size=(d, h.n))
    X, sups = [], []
    for e in h.edges:
        c = rng.normal(size=len(e))
        X.append(D[:, list(e)] @ c)
        sups.append(e)
    return np.array(X), D, sups


def uniform_points(d: int, m: int, seed: int = 0) -> np.ndarray:
    """Points uniform on the unit sphere."""
    rng = np.random.default_rng([seed, 2])
    X = rng.normal(size=(m, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def random_tight_supports(d: int, s: int, n: int, seed: int = 0, tries: int = 100):
    """Random ``s``-sets on ``n`` atoms, one pin each, forming a minimally rigid system."""
    rng = np.random.default_rng([seed, 3])
    cand = list(combinations(range(n), s))
    need = (d - 1) * n
    if need % (d - s):
        raise ValueError(f"(d-1)n = {need} is not a multiple of d-s = {d - s}")
    for _ in range(tries):
        order = [cand[i] for i in rng.permutation(len(cand))]
        game = _kernels.PebbleGame(n, d - 1)
        chosen = [e for e in order if game.add_edge(e, copies=d - s)]
        if len(chosen) * (d - s) != need:
            continue
        h = WeightedHypergraph(d, tuple(f"v{j}" for j in range(n)), tuple(chosen), (1,) * len(chosen))
        if combinatorial_check(h).minimally_rigid:
            return chosen
    raise InstanceError(f"no minimally rigid support set found for d={d}, s={s}, n={n}")


def planted_fitted(d: int, s: int, n: int, seed: int = 0, extra: int = 0) -> tuple[Dataset, np.ndarray]:
    """Points on the supports of a random minimally rigid system, plus ``extra``
    consistent held-out points on randomly chosen supports."""
    rng = np.random.default_rng([seed, 4])
    sups = random_tight_supports(d, s, n, seed)
    D = rng.normal(size=(d, n))
    D /= np.linalg.norm(D, axis=0)
    sups = list(sups) + [sups[int(i)] for i in rng.integers(len(sups), size=extra)]
    X = np.array([D[:, list(e)] @ rng.normal(size=len(e)) for e in sups])
    return Dataset(X, sups), D


# -- dataset documents ---------------------------------------------------------

def dataset_to_dict(data: Dataset) -> dict:
    doc = {"d": data.d, "points": [[float(c) for c in x] for x in data.points]}
    if data.supports is not None:
        doc["atoms"] = list(data.atoms)
        doc["supports"] = [[data.atoms[j] for j in sup] for sup in data.supports]
    return doc


def dataset_from_dict(doc: dict) -> Dataset:
    if not isinstance(doc, dict) or "points" not in doc:
        raise DataError("dataset document must be an object with 'points'")
    try:
        X = np.array(doc["points"], dtype=float)
    except (TypeError, ValueError):
        raise DataError("'points' must be a list of equal-length number lists") from None
    if X.ndim != 2:
        raise DataError("'points' must be a list of equal-length number lists")
    if "d" in doc and doc["d"] != X.shape[1]:
        raise DataError(f"'d' is {doc['d']} but points have {X.shape[1]} coordinates")
    if "supports" not in doc:
        return Dataset(X)
    atoms = [str(a) for a in doc.get("atoms", [])]
    if not atoms:
        atoms = sorted({str(a) for sup in doc["supports"] for a in sup})
    index = {a: j for j, a in enumerate(atoms)}
    sups = []
    for i, sup in enumerate(doc["supports"]):
        try:
            sups.append(tuple(index[str(a)] for a in sup))
        except KeyError as exc:
            raise DataError(f"support of point {i} names unknown atom {exc.args[0]!r}") from None
    return Dataset(X, sups, tuple(atoms))


def parse_dataset(text: str) -> Dataset:
    """A JSON dataset document, or delimited text with one point per row."""
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"not valid JSON: {exc}") from None
        return dataset_from_dict(doc)
    rows = []
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(c) for c in line.replace(",", " ").split()])
        except ValueError:
            raise DataError(f"line {ln}: not a row of numbers") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise DataError("rows must be non-empty and have equal length")
    return Dataset(np.array(rows))
