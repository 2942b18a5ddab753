"""Command line entry point: ``qig learn|facets|vertices|verify|simulate|score``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from pathlib import Path

import numpy as np

from .gaussian_score import DataError, bic_direct, load_manifest, random_params, save_dataset, simulate, truth_json
from .graphs import Dag, GraphError, UndirectedTree, graph_from_json
from .imsets import subset_key
from .learn import RunConfig, fmt, qig_learn
from .polytope import (
    DEFAULT_SUBTREE_CAP,
    DEFAULT_VERTEX_EDGE_CAP,
    GluingTree,
    PolytopeError,
    h_representation,
    vertex_table,
)
from .solver import RATIONAL_BITS, ReconstructionError, SolverError
from .verify import SUITES, random_dag, random_tree, run_suites

EXIT_OK, EXIT_DATA, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4

log = logging.getLogger("qigtree")


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    return int(raw) if raw else default


def _split(text: str | None) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()] if text else []


def _load_tree(args) -> tuple[UndirectedTree, list[str]]:
    """Tree from a JSON file or from ``--edges a-b,b-c``; targets from either source."""
    targets: list[str] = []
    if args.edges:
        tree = UndirectedTree.from_edges(e.split("-") for e in _split(args.edges))
    elif args.tree:
        g, targets = graph_from_json(Path(args.tree).read_text())
        if isinstance(g, Dag):
            g = UndirectedTree(g.nodes, g.arcs)
        if not isinstance(g, UndirectedTree):
            raise GraphError("input graph is not a tree")
        tree = g
        targets = list(targets)
    else:
        raise GraphError("give a tree JSON file or --edges")
    if args.targets is not None:
        targets = _split(args.targets)
    return tree, targets


def _gluing_tree(args) -> GluingTree:
    tree, targets = _load_tree(args)
    return GluingTree(tree, targets, _split(args.J))


# --- subcommands -----------------------------------------------------------

def cmd_learn(args) -> int:
    cfg = RunConfig(
        manifest=Path(args.manifest),
        mi_pool=args.mi_pool,
        center=args.center,
        subtree_cap=args.subtree_cap,
        vertex_cap=args.vertex_cap,
        bits=args.bits,
        out_json=Path(args.out_json) if args.out_json else None,
        out_dot=Path(args.out_dot) if args.out_dot else None,
    )
    report = qig_learn(cfg)
    if args.out_json is None:
        sys.stdout.write(report.to_json())
    else:
        print(f"skeleton: {' '.join(f'{u}-{v}' for u, v in report.skeleton.sorted_edges())}")
        print(f"targets: {','.join(report.targets) or '-'}")
        ess = report.essential
        print(f"essential: {' '.join(f'{t}->{h}' for t, h in sorted(ess.arcs))} "
              f"{' '.join(f'{u}-{v}' for u, v in sorted(ess.edges))}".rstrip())
        print(f"score: {fmt(report.score):.12g}")
    return EXIT_OK


def cmd_facets(args) -> int:
    gt = _gluing_tree(args)
    hrep = h_representation(gt, args.subtree_cap)
    rows = list(hrep.inequalities) + list(hrep.equalities)
    if args.json:
        print(json.dumps([c.to_json_obj() for c in rows], indent=2))
    else:
        for c in rows:
            print(f"{c.label}: {c.text(hrep.coords)}")
    return EXIT_OK


def cmd_vertices(args) -> int:
    gt = _gluing_tree(args)
    vt = vertex_table(gt, args.vertex_cap)
    if args.json:
        out = [{"imset": [subset_key(s) for s in sorted(vt.imset(r).ones)],
                "dag": [list(a) for a in vt.dag(r, gt.tree.nodes).sorted_arcs()]}
               for r in range(len(vt.matrix))]
        print(json.dumps(out, indent=2))
    else:
        print(f"{len(vt.matrix)} vertices")
        for r in range(len(vt.matrix)):
            ones = [s for s in vt.coords.subsets if vt.imset(r)[s]]
            print(" ".join(subset_key(s) for s in ones) or "(all zero)")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = args.suite or list(SUITES)
    results = run_suites(names, seed=args.seed, workers=args.workers)
    print("suite\tcheck\tstatus\tseconds\tdetail")
    for r in results:
        if args.verbose or not r.passed:
            print(r.row())
    failed = [r for r in results if not r.passed]
    print(f"# {len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_simulate(args) -> int:
    rng = random.Random(args.seed)
    nrng = np.random.default_rng(args.seed)
    if args.dag:
        dag, targets = graph_from_json(Path(args.dag).read_text())
        if not isinstance(dag, Dag):
            raise GraphError("--dag must describe a DAG")
        targets = list(targets)
    else:
        tree = random_tree(rng, args.random)
        dag = random_dag(rng, tree)
        targets = tree.leaves() if args.targets == "leaves" else []
    if args.targets and args.targets != "leaves":
        targets = _split(args.targets)
    sizes = [int(x) for x in _split(args.sizes)] if args.sizes else [args.n] * (len(targets) + 1)
    params = random_params(dag, targets, nrng)
    ds = simulate(dag, targets, params, sizes, nrng)
    out = Path(args.out)
    man = save_dataset(ds, out)
    (out / "truth.json").write_text(json.dumps(truth_json(dag, targets), indent=2) + "\n")
    print(f"wrote {man}")
    return EXIT_OK


def cmd_score(args) -> int:
    ds = load_manifest(args.manifest)
    if args.center:
        ds = ds.centered()
    dag, targets = graph_from_json(Path(args.dag).read_text())
    if not isinstance(dag, Dag):
        raise GraphError("score needs a DAG")
    if targets and list(targets) != ds.targets:
        raise DataError("DAG targets differ from the manifest")
    print(f"{bic_direct(dag, ds):.12g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    subtree_cap = _env_int("QIGTREE_SUBTREE_CAP", DEFAULT_SUBTREE_CAP)
    vertex_cap = _env_int("QIGTREE_VERTEX_CAP", DEFAULT_VERTEX_EDGE_CAP)
    p = argparse.ArgumentParser(prog="qig", description=__doc__)
    p.add_argument("-v", "--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    def caps(sp):
        sp.add_argument("--subtree-cap", type=int, default=subtree_cap)
        sp.add_argument("--vertex-cap", type=int, default=vertex_cap)

    def tree_args(sp):
        sp.add_argument("tree", nargs="?", help="graph JSON with nodes and edges")
        sp.add_argument("--edges", help="inline tree such as a-c,b-c,c-d")
        sp.add_argument("--targets", help="comma-separated leaf targets")
        sp.add_argument("--J", default="", help="comma-separated degree-two targets")
        sp.add_argument("--json", action="store_true")
        caps(sp)

    sp = sub.add_parser("learn", help="learn an interventional equivalence class from data")
    sp.add_argument("manifest")
    sp.add_argument("--mi-pool", action="store_true", help="pool all contexts for the skeleton")
    sp.add_argument("--center", action="store_true", help="center columns before scoring")
    sp.add_argument("--bits", type=int, default=RATIONAL_BITS, help="objective rounding precision")
    sp.add_argument("--out-json")
    sp.add_argument("--out-dot")
    caps(sp)
    sp.set_defaults(func=cmd_learn)

    sp = sub.add_parser("facets", help="print the inequality description")
    tree_args(sp)
    sp.set_defaults(func=cmd_facets)

    sp = sub.add_parser("vertices", help="enumerate polytope vertices")
    tree_args(sp)
    sp.set_defaults(func=cmd_vertices)

    sp = sub.add_parser("verify", help="run invariant suites")
    sp.add_argument("--suite", action="append", choices=sorted(SUITES))
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--verbose", action="store_true", help="list passing checks too")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("simulate", help="write a synthetic interventional dataset")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--dag", help="ground-truth DAG JSON")
    src.add_argument("--random", type=int, metavar="P", help="random polytree on P nodes")
    sp.add_argument("--targets", default="leaves", help="'leaves' or comma-separated labels")
    sp.add_argument("--n", type=int, default=1000, help="samples per context")
    sp.add_argument("--sizes", help="comma-separated samples per context")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("score", help="BIC of a DAG on a dataset")
    sp.add_argument("manifest")
    sp.add_argument("dag")
    sp.add_argument("--center", action="store_true")
    sp.set_defaults(func=cmd_score)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SolverError, ReconstructionError) as exc:
        print(f"solver anomaly: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DataError, GraphError, PolytopeError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
