"""Exact linear programming over H-representations, plus brute-force oracles.

The simplex works on an integer tableau with a common denominator
(fraction-free pivoting), so every intermediate value is exact. Entering and
leaving variables follow Bland's rule.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exact import affine_rank
from .graphs import Dag, IDag, UndirectedTree, _close_under_r1, edge_key, intervention_node
from .imsets import CharImset, CoordinateSystem, Subset, char_imset, realized_tree, subset
from .polytope import GluingTree, HRepresentation, LinearConstraint, coordinate_requirements, vertex_table
from . import _kernels

log = logging.getLogger(__name__)

RATIONAL_BITS = 40
_INT64_SAFE = 1 << 62


class SolverError(RuntimeError):
    """Unbounded or otherwise anomalous linear program."""


class ReconstructionError(ValueError):
    """The imset does not come from an orientation of the tree."""


def rationalize(value, bits: int = RATIONAL_BITS) -> Fraction:
    """Exact inputs pass through; floats snap to the grid with denominator 2**bits."""
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, np.integer):
        return Fraction(int(value))
    v = float(value)
    if not np.isfinite(v):
        raise SolverError(f"objective entry {value!r} is not finite")
    return Fraction(round(v * (1 << bits)), 1 << bits)


@dataclass(frozen=True)
class LpProblem:
    hrep: HRepresentation
    objective: tuple[Fraction, ...]

    @classmethod
    def build(cls, hrep: HRepresentation, objective, bits: int = RATIONAL_BITS) -> "LpProblem":
        coords = hrep.coords
        if isinstance(objective, Mapping):
            vec = [Fraction(0)] * len(coords)
            for k, v in objective.items():
                vec[coords.index[subset(k)]] = rationalize(v, bits)
        else:
            vec = [rationalize(v, bits) for v in objective]
        if len(vec) != len(coords):
            raise SolverError(f"objective has {len(vec)} entries for {len(coords)} coordinates")
        return cls(hrep, tuple(vec))


@dataclass(frozen=True)
class LpSolution:
    point: tuple[Fraction, ...]
    value: Fraction
    basis: tuple[int, ...]
    vertex_flag: bool
    pivots: int

    def imset(self, coords: CoordinateSystem) -> CharImset:
        if not self.vertex_flag:
            raise SolverError("solution is not a 0/1 point")
        return CharImset(frozenset(s for s, x in zip(coords.subsets, self.point) if x == 1))


# --- reduced system --------------------------------------------------------

@dataclass
class _Reduced:
    """Inequality system after eliminating the degree-two target equalities."""

    free: list[int]                 # coordinate indices kept as variables
    A: np.ndarray                   # m x d integer
    b: np.ndarray                   # m integer
    rows: list[int]                 # original inequality index for each row
    lift: list[tuple[int, int, int]]  # (coord, source free position or -1, sign/const) encoding

    def expand(self, y: Sequence[Fraction], n: int) -> list[Fraction]:
        x = [Fraction(0)] * n
        for pos, ci in enumerate(self.free):
            x[ci] = y[pos]
        for ci, src, mode in self.lift:
            x[ci] = Fraction(0) if src < 0 else 1 - x[self.free[src]]
        return x


def _reduce(hrep: HRepresentation) -> _Reduced:
    coords = hrep.coords
    A, b = hrep.leq_system()
    A = A.copy()
    b = b.copy()
    n = len(coords)
    dropped: dict[int, tuple[int, int]] = {}  # coord -> (partner coord or -1)
    for eq in hrep.equalities:
        keys = list(eq.coeffs)
        if len(keys) == 1 and eq.rhs == 0:
            dropped[coords.index[keys[0]]] = (-1, 0)
        elif len(keys) == 2 and eq.rhs == 1 and all(v == 1 for v in eq.coeffs.values()):
            i1, i2 = sorted(coords.index[k] for k in keys)
            dropped[i2] = (i1, 1)  # x[i2] = 1 - x[i1]
        else:
            raise SolverError(f"unsupported equality {eq.label}")
    for ci, (partner, _) in dropped.items():
        col = A[:, ci].copy()
        if partner >= 0:
            A[:, partner] -= col
            b -= col
        A[:, ci] = 0
    free = [i for i in range(n) if i not in dropped]
    A = A[:, free]
    keep = [r for r in range(A.shape[0]) if A[r].any()]
    for r in range(A.shape[0]):
        if r not in keep and b[r] < 0:
            raise SolverError("constraint system is infeasible")
    pos = {ci: p for p, ci in enumerate(free)}
    lift = [(ci, pos[p] if p >= 0 else -1, m) for ci, (p, m) in sorted(dropped.items())]
    return _Reduced(free, A[keep], b[keep], keep, lift)


# --- tableau ---------------------------------------------------------------

@dataclass
class _Tableau:
    T: np.ndarray          # rows x (cols + 1), last column = rhs
    D: int                 # common positive denominator
    row_var: np.ndarray    # >= 0: slack index; < 0: -(k+1) for free variable y_k
    col_var: np.ndarray    # slack index of each nonbasic column
    origin: list[Fraction]  # starting vertex in reduced coordinates

    def copy(self) -> "_Tableau":
        return _Tableau(self.T.copy(), self.D, self.row_var.copy(), self.col_var.copy(), self.origin)


def _pivot(tab: _Tableau, r: int, k: int, z: np.ndarray | None = None) -> np.ndarray | None:
    T, D = tab.T, tab.D
    p = T[r, k]
    if T.dtype != object:
        big = int(np.abs(T).max())
        if big and big * big >= _INT64_SAFE // 2:
            T = T.astype(object)
            p = T[r, k]
    prow = T[r].copy()
    col = T[:, k].copy()
    newT = (T * p - np.outer(col, prow)) // D
    newT[:, k] = -col
    newT[r] = prow
    newT[r, k] = D
    if z is not None:
        zk = z[k]
        z = (z * int(p) - zk * prow.astype(object)) // D
        z[k] = -zk
    newD = int(p)
    if newD < 0:
        newT = -newT
        newD = -newD
        if z is not None:
            z = -z
    tab.T, tab.D = newT, newD
    tab.row_var[r], tab.col_var[k] = tab.col_var[k], tab.row_var[r]
    return z


def _start_vertex(hrep: HRepresentation, gt_edges, red: _Reduced) -> list[int]:
    """Imset of an outward orientation from the first node, in reduced coordinates."""
    coords = hrep.coords
    ce, cb = coordinate_requirements(coords, gt_edges["edges"])
    mat = _kernels.imsets_from_masks(np.array([gt_edges["mask"]], dtype=np.int64), ce, cb)[0]
    return [int(mat[ci]) for ci in red.free]


def _rooted_mask(tree: UndirectedTree) -> tuple[tuple[tuple[str, str], ...], int]:
    edges = tuple(tree.sorted_edges())
    root = tree.nodes[0]
    seen, stack, arcs = {root}, [root], set()
    while stack:
        u = stack.pop()
        for w in tree.neighbors(u):
            if w not in seen:
                seen.add(w)
                arcs.add((u, w))
                stack.append(w)
    mask = 0
    for b, (u, v) in enumerate(edges):
        if (v, u) in arcs:
            mask |= 1 << b
    return edges, mask


def _initial_tableau(hrep: HRepresentation) -> tuple[_Reduced, _Tableau]:
    cache = hrep._cache
    if "tableau" in cache:
        red, tab = cache["tableau"]
        return red, tab.copy()
    gt = hrep.gluing_tree
    if gt is None:
        raise SolverError("H-representation was not built from a gluing tree")
    red = _reduce(hrep)
    edges, mask = _rooted_mask(gt.tree)
    v0 = _start_vertex(hrep, {"edges": edges, "mask": mask}, red)
    A, b = red.A, red.b
    m, d = A.shape
    s0 = b - A @ np.array(v0, dtype=np.int64)
    if (s0 < 0).any():
        raise SolverError("starting orientation violates the H-representation")
    T = np.concatenate([A, s0[:, None]], axis=1).astype(np.int64)
    tab = _Tableau(T, 1, np.arange(m), -(np.arange(d) + 1), [Fraction(v) for v in v0])
    used = set()
    for k in range(d):
        cands = [r for r in range(m) if s0[r] == 0 and r not in used and tab.T[r, k] != 0]
        if not cands:
            raise SolverError("H-representation does not bound the polytope (rank deficient)")
        r = cands[0]
        used.add(r)
        _pivot(tab, r, k)
    cache["tableau"] = (red, tab)
    return red, tab.copy()


def _bland_min_ratio(tab: _Tableau, k: int) -> int | None:
    T = tab.T
    col = T[:, k]
    rhs = T[:, -1]
    mask = (tab.row_var >= 0) & (col > 0)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return None
    best = None
    for i in idx:
        if best is None:
            best = i
            continue
        lhs = int(rhs[i]) * int(col[best])
        rhs_b = int(rhs[best]) * int(col[i])
        if lhs < rhs_b or (lhs == rhs_b and tab.row_var[i] < tab.row_var[best]):
            best = i
    return int(best)


def lp_maximize(problem: LpProblem, max_pivots: int = 100000) -> LpSolution:
    """Maximize ``objective . x`` over the H-representation (exact, Bland's rule)."""
    hrep = problem.hrep
    red, tab = _initial_tableau(hrep)
    n = len(hrep.coords)
    c_full = list(problem.objective)
    c_red = [Fraction(0)] * len(red.free)
    const = Fraction(0)
    pos = {ci: p for p, ci in enumerate(red.free)}
    for ci, c in enumerate(c_full):
        if ci in pos:
            c_red[pos[ci]] += c
    for ci, src, _ in red.lift:
        c = c_full[ci]
        if src >= 0 and c:
            c_red[src] -= c
            const += c
    Q = lcm(*(c.denominator for c in c_red)) if c_red else 1
    ci_int = [int(c * Q) for c in c_red]
    yrows = {int(-v - 1): i for i, v in enumerate(tab.row_var) if v < 0}
    z = np.zeros(tab.T.shape[1], dtype=object)
    for k, w in enumerate(ci_int):
        if w:
            z = z + w * tab.T[yrows[k]].astype(object)
    pivots = 0
    while True:
        neg = np.flatnonzero(z[:-1] < 0)
        if neg.size == 0:
            break
        k = int(neg[np.argmin(tab.col_var[neg])])
        r = _bland_min_ratio(tab, k)
        if r is None:
            raise SolverError("linear program is unbounded; the H-representation is incomplete")
        z = _pivot(tab, r, k, z)
        pivots += 1
        if pivots > max_pivots:
            raise SolverError("pivot limit exceeded")
    y = [Fraction(0)] * len(red.free)
    for i, v in enumerate(tab.row_var):
        if v < 0:
            k = int(-v - 1)
            y[k] = tab.origin[k] + Fraction(int(tab.T[i, -1]), tab.D)
    x = red.expand(y, n)
    value = sum((c * xi for c, xi in zip(c_full, x)), Fraction(0))
    basis = tuple(sorted(red.rows[int(v)] for v in tab.col_var))
    flag = all(xi in (0, 1) for xi in x)
    if not flag:
        log.warning("LP optimum is not a 0/1 point; value %s", value)
    return LpSolution(tuple(x), value, basis, flag, pivots)


def solve(hrep: HRepresentation, objective, bits: int = RATIONAL_BITS) -> LpSolution:
    return lp_maximize(LpProblem.build(hrep, objective, bits))


# --- brute force and geometry ---------------------------------------------

def _int_objective(objective: Sequence) -> tuple[list[int], int]:
    fr = [rationalize(c) for c in objective]
    Q = lcm(*(f.denominator for f in fr)) if fr else 1
    return [int(f * Q) for f in fr], Q


def vertex_values(vertices: np.ndarray, objective: Sequence) -> tuple[np.ndarray, int]:
    """Exact integer values ``Q * (objective . v)`` for each row, and ``Q``."""
    ints, Q = _int_objective(objective)
    V = np.asarray(vertices)
    big = max((abs(v) for v in ints), default=0) * max(V.shape[1], 1)
    if big < _INT64_SAFE:
        return V.astype(np.int64) @ np.array(ints, dtype=np.int64), Q
    return V.astype(object) @ np.array(ints, dtype=object), Q


def brute_force_optimum(vertices: Sequence[CharImset] | np.ndarray, objective: Sequence,
                        coords: CoordinateSystem | None = None) -> tuple[int, Fraction]:
    """Index of the first maximizer in list order, and the exact maximum."""
    if isinstance(vertices, np.ndarray):
        V = vertices
    else:
        if coords is None:
            raise ValueError("coords are required for CharImset vertices")
        V = np.array([v.vector(coords) for v in vertices], dtype=np.int64)
    if V.shape[0] == 0:
        raise ValueError("empty vertex list")
    vals, Q = vertex_values(V, objective)
    best = int(np.argmax(vals)) if vals.dtype != object else max(range(len(vals)), key=lambda i: (vals[i], -i))
    return best, Fraction(int(vals[best]), Q)


def affine_dim(points: Sequence[Sequence[int]] | np.ndarray) -> int:
    pts = np.asarray(points)
    if pts.shape[0] == 0:
        raise ValueError("affine dimension of an empty set is undefined")
    return affine_rank(pts.astype(object).tolist())


def facet_check(vertices: np.ndarray, coords: CoordinateSystem, ineq: LinearConstraint,
                dim: int | None = None) -> dict:
    """Validity, dimension of the tight face, and whether it is a facet."""
    V = np.asarray(vertices)
    coeffs, rhs = ineq.as_leq()
    den = lcm(*(c.denominator for c in list(coeffs.values()) + [rhs]))
    row = np.zeros(len(coords), dtype=object)
    for k, v in coeffs.items():
        row[coords.index[k]] = int(v * den)
    vals = V.astype(object) @ row
    bound = int(rhs * den)
    if ineq.sense == "=":
        valid = bool(all(v == bound for v in vals))
    else:
        valid = bool(all(v <= bound for v in vals))
    tight = V[[v == bound for v in vals]]
    tight_dim = affine_rank(tight.astype(object).tolist()) if len(tight) else -1
    if dim is None:
        dim = affine_dim(V)
    return {"valid": valid, "tight_dim": tight_dim, "facet": valid and tight_dim == dim - 1,
            "slack": int(sum(1 for v in vals if v != bound))}


# --- reconstruction -------------------------------------------------------

def reconstruct_dag(c: CharImset, tree: UndirectedTree, targets: Iterable[str] = ()) -> Dag:
    """A DAG on ``tree`` whose realized imset restricted to star subsets equals ``c``."""
    targets = tuple(targets)
    for t in targets:
        if tree.degree(t) != 1:
            raise ReconstructionError(f"target {t} is not a leaf")
    arcs: set[tuple[str, str]] = set()

    def add(u: str, v: str) -> None:
        if (v, u) in arcs:
            raise ReconstructionError(f"imset orients {u}-{v} both ways")
        arcs.add((u, v))

    for s in c.ones:
        if len(s) < 3:
            continue
        centers = [
            v for v in s
            if v in tree.nodes and set(s) <= tree.closed_neighborhood(v) | {intervention_node(v)}
        ]
        if len(centers) != 1:
            raise ReconstructionError(f"subset {s} is not a star subset")
        v = centers[0]
        if v in targets:
            continue
        for u in s:
            if u != v:
                add(u, v)
    for t in targets:
        (u,) = tree.neighbors(t)
        if c[(u, t, intervention_node(t))]:
            add(u, t)
        else:
            add(t, u)
    real = realized_tree(tree, targets)
    adj = {n: real.neighbors(n) for n in real.nodes}
    all_arcs = set(arcs) | {(intervention_node(t), t) for t in targets}
    undirected = {e for e in tree.edges if e not in arcs and (e[1], e[0]) not in arcs}
    _close_under_r1(adj, all_arcs, undirected)
    # orient what remains outward from the smallest node of each component
    remaining = {n: set() for n in tree.nodes}
    for u, v in undirected:
        remaining[u].add(v)
        remaining[v].add(u)
    done = set()
    for root in tree.nodes:
        if root in done or not remaining[root]:
            continue
        stack = [root]
        done.add(root)
        while stack:
            u = stack.pop()
            for w in sorted(remaining[u]):
                if w not in done:
                    done.add(w)
                    all_arcs.add((u, w))
                    stack.append(w)
    base_arcs = [a for a in all_arcs if a[0] in tree.nodes and a[1] in tree.nodes]
    d = Dag(tree.nodes, base_arcs)
    got = char_imset(IDag(d, targets))
    stars = {s for s in got.ones if len(s) >= 3}
    want = {s for s in c.ones if len(s) >= 3}
    if stars != want:
        raise ReconstructionError("imset is not realized by any orientation of the tree")
    return d
