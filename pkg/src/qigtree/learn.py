"""Tree-skeleton structure learning from observational and leaf-interventional data."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gaussian_score import (
    InterventionalDataset,
    bic_direct,
    kruskal_mst,
    load_manifest,
    mi_weights,
    objective_vector,
)
from .graphs import Dag, IDag, Pdag, UndirectedTree, enumerate_orientations, essential_graph, graph_to_json_obj, to_dot
from .imsets import CharImset, char_imset, subset_key
from .polytope import DEFAULT_SUBTREE_CAP, DEFAULT_VERTEX_EDGE_CAP, GluingTree, h_representation
from .solver import RATIONAL_BITS, SolverError, reconstruct_dag, solve

log = logging.getLogger(__name__)


def fmt(x: float) -> float:
    """Round to 12 significant digits for reporting."""
    return float(f"{x:.12g}")


@dataclass(frozen=True)
class RunConfig:
    manifest: Path
    mi_pool: bool = False
    center: bool = False
    subtree_cap: int = DEFAULT_SUBTREE_CAP
    vertex_cap: int = DEFAULT_VERTEX_EDGE_CAP
    bits: int = RATIONAL_BITS
    out_json: Path | None = None
    out_dot: Path | None = None

    def __post_init__(self):
        if self.subtree_cap <= 0 or self.vertex_cap <= 0 or self.bits <= 0:
            raise ValueError("caps and precision must be positive")


@dataclass
class LearnReport:
    skeleton: UndirectedTree
    targets: list[str]
    discarded: list[tuple[int, str]]
    imset: CharImset
    dag: Dag
    essential: Pdag
    score: float
    method: str
    timing: dict[str, float] = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "skeleton": [list(e) for e in self.skeleton.sorted_edges()],
            "targets": list(self.targets),
            "discarded_contexts": [{"context": k, "target": t} for k, t in self.discarded],
            "imset": sorted(subset_key(s) for s in self.imset.ones if len(s) >= 3),
            "dag": graph_to_json_obj(self.dag, self.targets),
            "essential_graph": graph_to_json_obj(self.essential, self.targets),
            "score": fmt(self.score),
            "method": self.method,
            "timing": {k: fmt(v) for k, v in self.timing.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True) + "\n"


def _best_by_enumeration(tree: UndirectedTree, ds: InterventionalDataset, cap: int) -> Dag:
    best, best_val = None, -np.inf
    for d in enumerate_orientations(tree, cap=cap):
        v = bic_direct(d, ds)
        if v > best_val:
            best, best_val = d, v
    return best


def learn(ds: InterventionalDataset, mi_pool: bool = False, subtree_cap: int = DEFAULT_SUBTREE_CAP,
          bits: int = RATIONAL_BITS, vertex_cap: int = DEFAULT_VERTEX_EDGE_CAP) -> LearnReport:
    """Chow-Liu skeleton, leaf-target filtering, then the LP over the imset polytope."""
    if ds.p < 2:
        raise ValueError("need at least two variables")
    timing = {}
    t0 = time.perf_counter()
    tree = kruskal_mst(mi_weights(ds, pool=mi_pool), ds.variables)
    timing["skeleton"] = time.perf_counter() - t0

    leaves = set(tree.leaves())
    keep, discarded = [], []
    for k, t in enumerate(ds.targets, start=1):
        (keep if t in leaves else discarded).append((k, t))
    if discarded:
        log.warning("dropping contexts whose target is not a leaf: %s",
                    ", ".join(f"{k}:{t}" for k, t in discarded))
    data = ds.subset_contexts([k for k, _ in keep])
    targets = data.targets

    t0 = time.perf_counter()
    gt = GluingTree(tree, targets, ()) if ds.p > 2 else None
    if gt is not None and gt.internal_black():
        obj = objective_vector(tree, data)
        hrep = h_representation(gt, subtree_cap)
        sol = solve(hrep, obj.dense(hrep.coords), bits)
        if not sol.vertex_flag:
            raise SolverError("LP optimum is fractional; the inequality description is incomplete")
        dag = reconstruct_dag(sol.imset(hrep.coords), tree, targets)
        method = "lp"
    else:
        dag = _best_by_enumeration(tree, data, vertex_cap)
        method = "enumeration"
    timing["optimize"] = time.perf_counter() - t0

    imset = char_imset(IDag(dag, targets))
    return LearnReport(
        skeleton=tree,
        targets=list(targets),
        discarded=discarded,
        imset=imset,
        dag=dag,
        essential=essential_graph(dag, targets),
        score=bic_direct(dag, data),
        method=method,
        timing=timing,
    )


def qig_learn(config: RunConfig) -> LearnReport:
    ds = load_manifest(config.manifest)
    if config.center:
        ds = ds.centered()
    report = learn(ds, mi_pool=config.mi_pool, subtree_cap=config.subtree_cap, bits=config.bits,
                   vertex_cap=config.vertex_cap)
    if config.out_json is not None:
        Path(config.out_json).write_text(report.to_json())
    if config.out_dot is not None:
        Path(config.out_dot).write_text(to_dot(report.essential, report.targets, name="essential"))
    return report
