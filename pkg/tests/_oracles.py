"""Brute-force reference implementations used only by the tests.

Everything here follows the textbook definitions directly and avoids the
package's own helpers, except for plain containers (Dag, UndirectedTree).
"""
from __future__ import annotations

import itertools
import math
import random

import numpy as np

from qigtree.graphs import Dag, UndirectedTree

Z = "_z"


def parents_of(nodes, arcs):
    pa = {v: set() for v in nodes}
    for t, h in arcs:
        pa[h].add(t)
    return pa


def realized_arcs(dag: Dag, targets):
    return list(dag.arcs) + [(t + Z, t) for t in targets]


def naive_char_imset(dag: Dag, targets=()) -> frozenset:
    """Every S (|S| >= 2) of the realized node set with some i in S, S - i inside pa(i)."""
    nodes = list(dag.nodes) + [t + Z for t in targets]
    pa = parents_of(nodes, realized_arcs(dag, targets))
    ones = set()
    for r in range(2, len(nodes) + 1):
        for s in itertools.combinations(sorted(nodes), r):
            if any(set(s) - {i} <= pa[i] for i in s):
                ones.add(tuple(sorted(s)))
    return frozenset(ones)


def naive_v_structures(dag: Dag) -> set:
    pa = parents_of(dag.nodes, dag.arcs)
    adj = {frozenset(a) for a in dag.arcs}
    out = set()
    for j in dag.nodes:
        for i in dag.nodes:
            for k in dag.nodes:
                if i < k and i in pa[j] and k in pa[j] and frozenset((i, k)) not in adj:
                    out.add((i, j, k))
    return out


def all_orientations(tree: UndirectedTree):
    edges = sorted(tuple(sorted(e)) for e in tree.edges)
    for bits in itertools.product((0, 1), repeat=len(edges)):
        yield Dag(tree.nodes, [(u, v) if b == 0 else (v, u) for (u, v), b in zip(edges, bits)])


def j_admissible(dag: Dag, tree: UndirectedTree, J) -> bool:
    for j in J:
        i, k = sorted(tree.neighbors(j))
        if not ((i, j) in dag.arcs and (j, k) in dag.arcs or (k, j) in dag.arcs and (j, i) in dag.arcs):
            return False
    return True


def naive_vertices(tree: UndirectedTree, I=(), J=(), coords=None):
    """Distinct imsets (projected to ``coords`` if given) of admissible orientations."""
    white = sorted(set(I) | set(J))
    seen, out = set(), []
    for d in all_orientations(tree):
        if not j_admissible(d, tree, J):
            continue
        c = naive_char_imset(d, white)
        key = tuple(1 if s in c else 0 for s in coords) if coords is not None else c
        if key not in seen:
            seen.add(key)
            out.append((key, d))
    return out


def imec_classes(tree: UndirectedTree, targets=()):
    groups: dict = {}
    for d in all_orientations(tree):
        groups.setdefault(naive_char_imset(d, targets), []).append(d)
    return groups


def essential_by_enumeration(dag: Dag, tree: UndirectedTree, targets=()):
    """(arcs shared by all I-equivalent DAGs, remaining skeleton edges)."""
    members = imec_classes(tree, targets)[naive_char_imset(dag, targets)]
    common = set.intersection(*(set(d.arcs) for d in members))
    undirected = {tuple(sorted(e)) for e in tree.edges} - {tuple(sorted(a)) for a in common}
    return common, undirected


def random_tree(rng: random.Random, p: int) -> UndirectedTree:
    nodes = [str(i) for i in range(1, p + 1)]
    return UndirectedTree(nodes, [(nodes[rng.randrange(i)], nodes[i]) for i in range(1, p)])


def random_orientation(rng: random.Random, tree: UndirectedTree) -> Dag:
    return Dag(tree.nodes, [(u, v) if rng.random() < 0.5 else (v, u) for u, v in sorted(tree.edges)])


# --- Gaussian oracles --------------------------------------------------------

def contexts_for(ds, v):
    """Indices of the contexts that target v."""
    return [k for k in range(1, len(ds.contexts)) if ds.contexts[k].target == v]


def loop_moment(rows):
    """Uncentered second moment by explicit summation over samples."""
    p = len(rows[0])
    S = np.zeros((p, p))
    for x in rows:
        S += np.outer(x, x)
    return S / len(rows)


def naive_alpha(ds, A, Zset) -> float:
    """The alpha coordinate evaluated sample by sample."""
    A = list(A)
    if not A:
        return 0.0
    idx = [ds.variables.index(a) for a in A]
    n = sum(c.data.shape[0] for c in ds.contexts)
    total = 0.0
    outside = [k for k in range(len(ds.contexts)) if k not in Zset]
    if outside:
        rows = [x[idx] for k in outside for x in ds.contexts[k].data]
        P = np.linalg.inv(loop_moment(rows))
        logdet = math.log(np.linalg.det(loop_moment(rows)))
        for k in outside:
            for x in ds.contexts[k].data:
                total -= 0.5 * x[idx] @ P @ x[idx]
            total -= 0.5 * ds.contexts[k].data.shape[0] * logdet
    for k in sorted(Zset):
        rows = [x[idx] for x in ds.contexts[k].data]
        S = loop_moment(rows)
        P = np.linalg.inv(S)
        for x in rows:
            total -= 0.5 * x @ P @ x
        total -= 0.5 * len(rows) * math.log(np.linalg.det(S))
    total -= 0.5 * math.log(n) * math.comb(len(A), 2) * (1 + len(Zset))
    return total


def regression_covariances(dag: Dag, ds):
    """Per-context covariance assembled from node-wise least squares fits."""
    p = len(ds.variables)
    pos = {v: i for i, v in enumerate(ds.variables)}
    pa = parents_of(dag.nodes, dag.arcs)
    out = []
    for k in range(len(ds.contexts)):
        B = np.zeros((p, p))
        w = np.zeros(p)
        for v in dag.nodes:
            tk = contexts_for(ds, v)
            ks = [k] if k in tk else [j for j in range(len(ds.contexts)) if j not in tk]
            X = np.vstack([ds.contexts[j].data for j in ks])
            y = X[:, pos[v]]
            cols = sorted(pos[u] for u in pa[v])
            if cols:
                coef, *_ = np.linalg.lstsq(X[:, cols], y, rcond=None)
                B[pos[v], cols] = coef
                resid = y - X[:, cols] @ coef
            else:
                resid = y
            w[pos[v]] = resid @ resid / len(y)
        M = np.linalg.inv(np.eye(p) - B)
        out.append(M @ np.diag(w) @ M.T)
    return out


def naive_bic(dag: Dag, ds) -> float:
    """Sum of per-sample Gaussian log densities at the regression MLE, minus the penalty."""
    covs = regression_covariances(dag, ds)
    ll = 0.0
    p = len(ds.variables)
    for k, ctx in enumerate(ds.contexts):
        inv = np.linalg.inv(covs[k])
        logdet = math.log(np.linalg.det(covs[k]))
        for x in ctx.data:
            ll += -0.5 * (p * math.log(2 * math.pi) + logdet + x @ inv @ x)
    pa = parents_of(dag.nodes, dag.arcs)
    k_params = p + len(dag.arcs) + sum(1 + len(pa[c.target]) for c in ds.contexts[1:])
    n = sum(c.data.shape[0] for c in ds.contexts)
    return ll - 0.5 * math.log(n) * k_params
