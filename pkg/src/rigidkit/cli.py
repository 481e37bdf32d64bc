"""Command-line front end: ``rigidkit <command> ...``.

Exit codes: 0 success, 1 negative verdict or failed verification, 2 bad
input, 3 solver did not converge.
"""
from __future__ import annotations

import argparse
import json
import sys
import zlib

import numpy as np

from . import _kernels
from .dictlearn import (
    DataError,
    LearnError,
    Dataset,
    dataset_to_dict,
    learn_fitted,
    learn_random,
    parse_dataset,
    planted_random,
    uniform_points,
    verify,
)
from .hypergraph import InstanceError, PinnedInstance, expand, instance_from_dict
from .realize import (
    ConstructionError,
    PlanError,
    SolveConfig,
    SolveError,
    drplan,
    solve_report,
    stage1_size,
)
from .rigidity import (
    Framework,
    FrameworkError,
    analyze,
    find_labeling,
    flex_basis,
    pure_condition_value,
)
from .sparsity import SparsityError, map_decompose, pebble_game, sparsity_report

OK, NEGATIVE, BAD_INPUT, NO_CONVERGENCE = 0, 1, 2, 3
DEFAULT_SEED = 20240101


class InputError(Exception):
    pass


def substream(seed: int, name: str) -> int:
    """Independent 31-bit seed for one named consumer of randomness."""
    ss = np.random.SeedSequence([seed, zlib.crc32(name.encode())])
    return int(ss.generate_state(1)[0] & 0x7FFFFFFF)


def _read(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load_instance(path: str):
    text = _read(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON: {exc}") from None
    try:
        inst = instance_from_dict(doc)
    except (InstanceError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None
    return inst, doc


def _points(doc: dict, inst: PinnedInstance):
    # optional "points": {vertex id: coordinates}
    raw = doc.get("points")
    if raw is None:
        return None
    h = inst.hypergraph
    if not isinstance(raw, dict) or set(raw) != set(h.vertices):
        raise InputError("'points' must map every vertex id to its coordinates")
    P = np.array([raw[v] for v in h.vertices], dtype=float)
    if P.shape != (h.n, h.d - 1):
        raise InputError(f"every point needs {h.d - 1} coordinates")
    return P


def _config(args, name: str) -> SolveConfig:
    return SolveConfig(tol=args.tol, max_iter=args.max_iter, restarts=args.restarts,
                       seed=substream(args.seed, name))


def _emit(args, doc: dict, text_lines) -> None:
    if args.json:
        out = json.dumps(doc, indent=2) + "\n"
    else:
        out = "\n".join(text_lines) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)


def _kv(doc: dict, keys) -> list[str]:
    return [f"{k}: {doc[k]}" for k in keys if k in doc]


# -- commands --------------------------------------------------------------------

def cmd_check(args) -> int:
    inst, doc = _load_instance(args.instance)
    h = inst.hypergraph
    v = analyze(h, trials=args.trials, seed=substream(args.seed, "rank"), backend=args.backend)
    out = v.to_dict(h)
    out["flex_count"] = h.dof() - v.numeric_rank
    P = _points(doc, inst)
    if P is not None:
        if inst.pins is None:
            raise InputError("'points' need pins on every hyperedge")
        fr = Framework(inst, P)
        try:
            out["flex_count"] = len(flex_basis(fr))
            if v.rows == v.dof:
                out["pure_condition"] = pure_condition_value(fr)
        except FrameworkError as exc:
            raise InputError(str(exc)) from None
    agree = v.minimally_rigid == (v.numeric_rank == v.dof)
    out["oracles_agree"] = agree
    lines = [f"verdict: {v.combinatorial}", f"rank: {v.numeric_rank}/{v.dof}"]
    lines += _kv(out, ["rows", "sparse", "flex_count", "pure_condition", "oracles_agree"])
    if "labeling" in out:
        lines.append("labeling:")
        lines += [f"  e{r['hyperedge']} t={r['t']} l={r['l']} tail={r['tail']} map={r['map']}"
                  for r in out["labeling"]]
    lines += [f"warning: {w}" for w in v.warnings]
    _emit(args, out, lines)
    return OK if agree and v.minimally_rigid else NEGATIVE


def cmd_sparsity(args) -> int:
    inst, _ = _load_instance(args.instance)
    h = inst.hypergraph
    k = h.d - 1 if args.k is None else args.k
    rep = sparsity_report(h, k)
    if args.l:
        res = pebble_game(expand(h), k, args.l)
        rep.update(l=args.l, sparse=res.sparse, free_pebbles=res.free_pebbles,
                   tight=res.sparse and rep["copies"] == k * h.n - args.l,
                   rejected=[c for c, ok in enumerate(res.accepted) if not ok])
    rep.setdefault("l", 0)
    _emit(args, rep, _kv(rep, ["k", "l", "copies", "capacity", "sparse", "tight", "free_pebbles", "rejected"]))
    return OK if rep["sparse"] else NEGATIVE


def cmd_decompose(args) -> int:
    inst, _ = _load_instance(args.instance)
    h = inst.hypergraph
    mh = expand(h)
    try:
        md = map_decompose(mh, h.d - 1)
    except SparsityError as exc:
        sys.stderr.write(f"rigidkit: {exc}\n")
        return NEGATIVE
    copies = []
    for c in range(len(mh)):
        copies.append({
            "copy": c,
            "hyperedge": mh.copies[c][0],
            "vertices": [h.vertices[u] for u in mh.members(c)],
            "map": md.map_index[c],
            "tail": h.vertices[md.tail[c]],
        })
    ld = find_labeling(h, mh)
    doc = {"k": md.k, "copies": copies, "labeling_found": ld is not None}
    lines = [f"k: {md.k}"]
    for j, members in enumerate(md.maps()):
        lines.append(f"map {j}: " + ", ".join(
            f"e{mh.copies[c][0]}->{h.vertices[md.tail[c]]}" for c in members))
    lines.append(f"labeling_found: {ld is not None}")
    _emit(args, doc, lines)
    return OK


def _plan_lines(node, h, depth=0):
    yield "  " * depth + f"[{', '.join(h.vertices[v] for v in node.vertices)}] fan-in {node.fan_in}"
    for c in node.children:
        yield from _plan_lines(c, h, depth + 1)


def cmd_drplan(args) -> int:
    inst, _ = _load_instance(args.instance)
    h = inst.hypergraph
    try:
        plan = drplan(h)
    except PlanError as exc:
        sys.stderr.write(f"rigidkit: {exc}\n")
        return NEGATIVE
    lines = [f"max_fan_in: {plan.max_fan_in}"]
    for r in plan.roots:
        lines += list(_plan_lines(r, h))
    _emit(args, plan.to_dict(), lines)
    return OK


def cmd_solve(args) -> int:
    inst, _ = _load_instance(args.instance)
    if inst.pins is None:
        raise InputError("solve needs pins on every hyperedge")
    h = inst.hypergraph
    try:
        res = solve_report(inst, _config(args, "initialization"))
    except SolveError as exc:
        sys.stderr.write(f"rigidkit: {exc}\n")
        return NO_CONVERGENCE
    except ValueError as exc:
        raise InputError(str(exc)) from None
    pts = {h.vertices[v]: [float(c) for c in res.framework.points[v]] for v in range(h.n)}
    doc = {"residual": res.residual, "restarts_used": res.restarts_used,
           "iterations": res.iterations, "points": pts}
    lines = _kv(doc, ["residual", "restarts_used", "iterations"])
    lines += [f"{v}: " + " ".join(f"{c:.12g}" for c in p) for v, p in pts.items()]
    _emit(args, doc, lines)
    return OK


def cmd_learn(args) -> int:
    try:
        data = parse_dataset(_read(args.data))
    except DataError as exc:
        raise InputError(f"{args.data}: {exc}") from None
    s = args.s
    if args.mode == "random":
        if s is None or not 1 <= s < data.d:
            raise InputError(f"random mode needs 1 <= s < d = {data.d}")
        try:
            res = learn_random(data, s, _config(args, "initialization"),
                               construction_seed=None if args.lex else substream(args.seed, "construction"))
        except ConstructionError as exc:
            raise InputError(str(exc)) from None
        except (LearnError, SolveError) as exc:
            sys.stderr.write(f"rigidkit: {exc}\n")
            return NO_CONVERGENCE
        D, warnings = res.dictionary, res.warnings
        X = data.points[res.assignment]
        extra = {"unused_points": res.unused, "assignment": [int(i) for i in res.assignment]}
    else:
        if data.supports is None:
            raise InputError("fitted mode needs a dataset document with 'supports'")
        s = max(len(sup) for sup in data.supports) if s is None else s
        try:
            res = learn_fitted(data, _config(args, "initialization"), tol=args.verify_tol)
        except (LearnError, SolveError) as exc:
            sys.stderr.write(f"rigidkit: {exc}\n")
            return NO_CONVERGENCE
        D, warnings, X = res.dictionary, res.warnings, data.points
        extra = {
            "validation_points": res.validation_points,
            "validation_errors": [float(e) for e in res.validation_errors],
        }
    rep = verify(X, D, s, args.verify_tol)
    doc = {"dictionary": D.to_dict(), "verification": rep.to_dict(), "warnings": warnings, **extra}
    lines = [f"n: {D.n}", f"points: {len(D.supports)}",
             f"verification: {'pass' if rep.passed else 'fail'}",
             f"max_error: {rep.to_dict()['max_error']:.3g}"]
    names = D.names or tuple(f"v{j}" for j in range(D.n))
    lines += [f"{names[j]}: " + " ".join(f"{c:.12g}" for c in D.vectors[:, j]) for j in range(D.n)]
    lines += [f"warning: {w}" for w in warnings]
    _emit(args, doc, lines)
    return OK if rep.passed else NEGATIVE


def cmd_gen(args) -> int:
    d, s, m = args.d, args.s, args.m
    if not 1 <= s < d:
        raise InputError(f"need 1 <= s < d, got s={s}, d={d}")
    _, _, need = stage1_size(d, s)
    if m < need:
        raise InputError(f"m={m} is below the stage-1 minimum of {need} points for d={d}, s={s}")
    seed = substream(args.seed, "data")
    hidden = None
    if args.kind == "planted":
        X, D, sups = planted_random(d, s, m, seed)
        D = D / np.linalg.norm(D, axis=0)
        data = Dataset(X, [tuple(e) for e in sups])
        hidden = {"vectors": {data.atoms[j]: [float(c) for c in D[:, j]] for j in range(D.shape[1])}}
    else:
        data = Dataset(uniform_points(d, m, seed))
    doc = dataset_to_dict(data)
    if hidden is not None and args.hidden:
        with open(args.hidden, "w") as fh:
            fh.write(json.dumps(hidden, indent=2) + "\n")
    if args.json:
        _emit(args, doc, [])
    else:
        _emit(args, doc, [" ".join(repr(float(c)) for c in x) for x in data.points])
    return OK


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rigidkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version="%(prog)s " + _version())
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, solver=False):
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--json", action="store_true", help="emit the structured document")
        sp.add_argument("-o", "--output", help="write to this file instead of stdout")
        sp.add_argument("--backend", choices=["cython", "python"],
                        help="kernel implementation (default: compiled when available)")
        if solver:
            sp.add_argument("--tol", type=float, default=1e-9)
            sp.add_argument("--max-iter", type=int, default=100)
            sp.add_argument("--restarts", type=int, default=8)

    sp = sub.add_parser("check", help="combinatorial verdict and generic-rank cross-check")
    sp.add_argument("instance")
    sp.add_argument("--trials", type=int, default=3)
    sp.add_argument("--rank-backend", dest="backend_rank", choices=["prime", "float"], default="prime")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("sparsity", help="(k,l) pebble game report")
    sp.add_argument("instance")
    sp.add_argument("-k", type=int)
    sp.add_argument("-l", type=int, default=0)
    common(sp)
    sp.set_defaults(func=cmd_sparsity)

    sp = sub.add_parser("decompose", help="map decomposition of a tight instance")
    sp.add_argument("instance")
    common(sp)
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("drplan", help="decomposition-recombination plan")
    sp.add_argument("instance")
    common(sp)
    sp.set_defaults(func=cmd_drplan)

    sp = sub.add_parser("solve", help="realize a pinned instance")
    sp.add_argument("instance")
    common(sp, solver=True)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("learn", help="learn a sparse dictionary")
    sp.add_argument("data", help="dataset document or delimited text, '-' for stdin")
    sp.add_argument("-s", type=int, help="sparsity (required in random mode)")
    sp.add_argument("--mode", choices=["random", "fitted"], default="random")
    sp.add_argument("--verify-tol", type=float, default=1e-6)
    sp.add_argument("--lex", action="store_true", help="deterministic lexicographic construction")
    common(sp, solver=True)
    sp.set_defaults(func=cmd_learn)

    sp = sub.add_parser("gen", help="generate a seeded dataset")
    sp.add_argument("-d", type=int, required=True)
    sp.add_argument("-s", type=int, required=True)
    sp.add_argument("-m", type=int, required=True)
    sp.add_argument("--kind", choices=["planted", "uniform"], default="uniform")
    sp.add_argument("--hidden", help="planted kind: write the hidden dictionary here")
    common(sp)
    sp.set_defaults(func=cmd_gen)
    return p


def _version() -> str:
    from . import __version__

    return __version__


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return BAD_INPUT if exc.code else OK
    if args.backend:
        try:
            _kernels.use(args.backend)
        except ImportError as exc:
            sys.stderr.write(f"rigidkit: {exc}\n")
            return BAD_INPUT
    if args.command == "check":
        args.backend = args.backend_rank
    try:
        return args.func(args)
    except InputError as exc:
        sys.stderr.write(f"rigidkit: {exc}\n")
        return BAD_INPUT
    except (InstanceError, DataError) as exc:
        sys.stderr.write(f"rigidkit: {exc}\n")
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
