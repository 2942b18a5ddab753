"""Gluing trees, facet families, H-representations and vertex enumeration."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import _kernels
from .graphs import Dag, GraphError, UndirectedTree, edge_key, intervention_node
from .imsets import (
    CharImset,
    CoordinateSystem,
    Subset,
    coordinate_system,
    nonempty_subsets,
    render_subset,
    subset,
)

DEFAULT_SUBTREE_CAP = 10**6
DEFAULT_VERTEX_EDGE_CAP = 22


class PolytopeError(ValueError):
    """Invalid gluing tree, cap overflow, or malformed constraint."""


# --- gluing trees ----------------------------------------------------------

@dataclass(frozen=True)
class GluingTree:
    """A tree whose white nodes are leaf targets ``I`` and degree-two targets ``J``."""

    tree: UndirectedTree
    I: frozenset[str]
    J: frozenset[str]

    def __init__(self, tree: UndirectedTree, I: Iterable[str] = (), J: Iterable[str] = ()):
        I, J = frozenset(map(str, I)), frozenset(map(str, J))
        if I & J:
            raise PolytopeError("I and J must be disjoint")
        for i in I:
            if i not in tree.nodes or tree.degree(i) != 1:
                raise PolytopeError(f"node {i!r} in I is not a leaf")
        for j in J:
            if j not in tree.nodes or tree.degree(j) != 2:
                raise PolytopeError(f"node {j!r} in J does not have degree two")
        white = I | J
        for u, v in tree.edges:
            if u in white and v in white:
                raise PolytopeError(f"white nodes {u} and {v} are adjacent")
        object.__setattr__(self, "tree", tree)
        object.__setattr__(self, "I", I)
        object.__setattr__(self, "J", J)

    @property
    def white(self) -> frozenset[str]:
        return self.I | self.J

    def is_black(self, v: str) -> bool:
        return v not in self.I and v not in self.J

    def internal_black(self) -> list[str]:
        return [v for v in self.tree.nodes if self.is_black(v) and self.tree.degree(v) >= 2]

    def realized_degree(self, v: str) -> int:
        return self.tree.degree(v) + (1 if v in self.I or v in self.J else 0)

    def coords(self) -> CoordinateSystem:
        return coordinate_system(self)


# --- sparse functionals ----------------------------------------------------

Functional = dict[Subset, int]


def _add(f: Functional, s: Iterable[str], coef: int) -> None:
    k = subset(s)
    v = f.get(k, 0) + coef
    if v:
        f[k] = v
    else:
        f.pop(k, None)


def _combine(*parts: tuple[int, Mapping[Subset, int]]) -> Functional:
    out: Functional = {}
    for scale, f in parts:
        for k, v in f.items():
            _add(out, k, scale * v)
    return out


@dataclass(frozen=True)
class LinearConstraint:
    """``sum coeffs[S] * x_S  (sense)  rhs`` with exact rationals."""

    coeffs: Mapping[Subset, Fraction]
    sense: str
    rhs: Fraction
    tag: str
    label: str = ""

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "="):
            raise PolytopeError(f"unknown sense {self.sense!r}")
        object.__setattr__(self, "coeffs", {subset(k): Fraction(v) for k, v in self.coeffs.items() if v})
        object.__setattr__(self, "rhs", Fraction(self.rhs))

    def evaluate(self, point: Mapping[Subset, int] | CharImset) -> Fraction:
        if isinstance(point, CharImset):
            return sum((c for s, c in self.coeffs.items() if s in point.ones), Fraction(0))
        return sum((c * point.get(s, 0) for s, c in self.coeffs.items()), Fraction(0))

    def satisfied_by(self, point) -> bool:
        lhs = self.evaluate(point)
        if self.sense == "<=":
            return lhs <= self.rhs
        if self.sense == ">=":
            return lhs >= self.rhs
        return lhs == self.rhs

    def as_leq(self) -> tuple[dict[Subset, Fraction], Fraction]:
        if self.sense == ">=":
            return {k: -v for k, v in self.coeffs.items()}, -self.rhs
        return dict(self.coeffs), self.rhs

    def to_json_obj(self) -> dict:
        return {
            "coeffs": {"|".join(k): str(v) for k, v in sorted(self.coeffs.items(), key=lambda kv: (len(kv[0]), kv[0]))},
            "sense": self.sense,
            "rhs": str(self.rhs),
            "tag": self.tag,
            "label": self.label,
        }

    def text(self, coords: CoordinateSystem | None = None) -> str:
        """Human-readable form in x_{abc} notation."""
        keys = list(self.coeffs)
        if coords is not None:
            keys.sort(key=lambda k: coords.index.get(k, len(coords)))
        else:
            keys.sort(key=lambda k: (len(k), k))
        parts = []
        for k in keys:
            c = self.coeffs[k]
            mag = abs(c)
            term = ("" if mag == 1 else f"{mag}") + f"x_{{{render_subset(k)}}}"
            parts.append(("- " if c < 0 else "+ ") + term)
        lhs = " ".join(parts) if parts else "0"
        if lhs.startswith("+ "):
            lhs = lhs[2:]
        elif lhs.startswith("- "):
            lhs = "-" + lhs[2:]
        return f"{lhs} {self.sense} {self.rhs}"


def _constraint(f: Functional, sense: str, rhs: int, tag: str, label: str) -> LinearConstraint:
    return LinearConstraint({k: Fraction(v) for k, v in f.items()}, sense, Fraction(rhs), tag, label)


# --- functionals -----------------------------------------------------------

def indicator_v(u: str, v: str, gt: GluingTree) -> Functional:
    """The functional that is 1 exactly when v <- u sits in a v-structure."""
    if not gt.tree.adjacent(u, v):
        raise PolytopeError(f"{u}-{v} is not an edge")
    if v in gt.I or v in gt.J:
        return {subset((u, v, intervention_node(v))): 1}
    if gt.tree.degree(v) < 2:
        raise PolytopeError(f"{v} is an untargeted leaf")
    f: Functional = {}
    for a in nonempty_subsets(gt.tree.neighbors(v) - {u}):
        _add(f, a + (u, v), (-1) ** (len(a) + 1))
    return f


def forced_out_functional(c: str, L: Iterable[str], gt: GluingTree) -> Functional:
    """Functional that is 1 iff c has at least two parents and none of them in L."""
    L = set(L)
    nbrs = gt.tree.neighbors(c)
    if not gt.is_black(c) or len(nbrs) < 2:
        raise PolytopeError(f"{c} is not an internal black node")
    if not L <= nbrs:
        raise PolytopeError(f"{sorted(L)} are not all neighbours of {c}")
    f: Functional = {}
    for a in nonempty_subsets(nbrs - L, 2):
        for b in nonempty_subsets(L, 0):
            s = a + b + (c,)
            _add(f, s, (-1) ** (len(s) - 1) * (len(a) + 1 - 2))
    return f


def hash_functional(c: str, nodes: Iterable[str], gt: GluingTree) -> Functional:
    """Number of parents of c inside ``nodes``, minus one (floored at zero)."""
    inside = gt.tree.neighbors(c) & set(nodes)
    f: Functional = {}
    for a in nonempty_subsets(inside, 2):
        _add(f, a + (c,), (-1) ** len(a))
    return f


# --- inequality families ---------------------------------------------------

def star_inequalities(gt: GluingTree) -> list[LinearConstraint]:
    out = []
    for ell in sorted(gt.internal_black()):
        nbrs = sorted(gt.tree.neighbors(ell))
        for q in nonempty_subsets(nbrs, 2):
            rest = [w for w in nbrs if w not in q]
            f: Functional = {}
            for extra in nonempty_subsets(rest, 0):
                _add(f, q + extra + (ell,), (-1) ** len(extra))
            out.append(_constraint(f, ">=", 0, "star", f"star {ell}:{','.join(q)}"))
    return out


def internal_edges(gt: GluingTree) -> list[tuple[str, str]]:
    return [e for e in gt.tree.sorted_edges() if all(gt.realized_degree(x) >= 2 for x in e)]


def bidirected_edge_inequalities(gt: GluingTree) -> list[LinearConstraint]:
    out = []
    for u, v in internal_edges(gt):
        f = _combine((1, indicator_v(u, v, gt)), (1, indicator_v(v, u, gt)))
        out.append(_constraint(f, "<=", 1, "bidirected", f"bidirected {u}-{v}"))
    return out


@dataclass(frozen=True)
class ForkedSubtree:
    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]
    leaves: frozenset[str]
    interior: frozenset[str]
    F: frozenset[str]
    L: tuple[tuple[str, str], ...]


def _subtree_info(gt: GluingTree, nodes: frozenset[str]) -> ForkedSubtree:
    t = gt.tree
    deg = {v: len(t.neighbors(v) & nodes) for v in nodes}
    edges = frozenset(e for e in t.edges if e[0] in nodes and e[1] in nodes)
    leaves = frozenset(v for v in nodes if deg[v] <= 1)
    interior = frozenset(nodes - leaves)
    F = frozenset(v for v in nodes if t.degree(v) - deg[v] >= 2)
    L = tuple(sorted(
        (c, next(iter(t.neighbors(c) & nodes)))
        for c in nodes if c in gt.white and deg[c] == 1
    ))
    return ForkedSubtree(nodes, edges, leaves, interior, F, L)


def connected_subtrees(tree: UndirectedTree, cap: int = DEFAULT_SUBTREE_CAP) -> Iterator[frozenset[str]]:
    """Every connected node set, each exactly once."""
    order = {v: i for i, v in enumerate(tree.nodes)}
    count = 0

    def grow(current: frozenset[str], ext: list[str], banned: frozenset[str], root: int):
        nonlocal count
        count += 1
        if count > cap:
            raise PolytopeError(f"subtree enumeration exceeded the cap {cap}")
        yield current
        ext = list(ext)
        while ext:
            v = ext.pop()
            grown = current | {v}
            new_ext = ext + [
                w for w in sorted(tree.neighbors(v), key=order.get)
                if order[w] > root and w not in grown and w not in banned and w not in ext
            ]
            yield from grow(grown, new_ext, banned, root)
            banned = banned | {v}

    for r in tree.nodes:
        ri = order[r]
        ext = [w for w in sorted(tree.neighbors(r), key=order.get) if order[w] > ri]
        yield from grow(frozenset([r]), ext, frozenset(), ri)


def _forked_shape(gt: GluingTree, nodes: frozenset[str]) -> bool:
    """Placement of white nodes and untargeted leaves, shared by both rules."""
    t = gt.tree
    white = gt.white
    if len(nodes) == 1 and next(iter(nodes)) in white:
        return False
    for v in nodes:
        if v not in white and t.degree(v) <= 1:
            return False
    for u in white:
        if u not in nodes and (t.neighbors(u) | {u}) & nodes:
            return False
    for u in white & nodes:
        if len(t.neighbors(u) & nodes) > 1:
            return False
    return True


def _black_leaves_fork(gt: GluingTree, nodes: frozenset[str]) -> bool:
    t = gt.tree
    for u in nodes - gt.white:
        d_sub = len(t.neighbors(u) & nodes)
        if d_sub <= 1 and t.degree(u) - d_sub < 2:
            return False
    return True


def is_forked(gt: GluingTree, nodes: frozenset[str]) -> bool:
    """Membership test for the forked-subtree family.

    Black leaves of the subtree must miss at least two tree neighbours, with
    one exception: a white target together with a black neighbour of tree
    degree two. That pair gives the facet ``x_{cc'u} >= 0``, which the strict
    rule (``forked_rule_literal``) leaves out.
    """
    if not _forked_shape(gt, nodes):
        return False
    if _black_leaves_fork(gt, nodes):
        return True
    if len(nodes) == 2:
        c, u = sorted(nodes, key=lambda v: v not in gt.white)
        return c in gt.white and u not in gt.white and gt.tree.degree(u) == 2
    return False


def forked_rule_literal(gt: GluingTree, nodes: frozenset[str]) -> bool:
    """Strict variant: every black leaf of the subtree misses two tree neighbours."""
    return _forked_shape(gt, nodes) and _black_leaves_fork(gt, nodes)


def enumerate_forked_subtrees(gt: GluingTree, cap: int = DEFAULT_SUBTREE_CAP, rule=is_forked) -> list[ForkedSubtree]:
    found = [_subtree_info(gt, s) for s in connected_subtrees(gt.tree, cap) if rule(gt, s)]
    order = {v: i for i, v in enumerate(gt.tree.nodes)}
    found.sort(key=lambda f: (len(f.nodes), sorted(order[v] for v in f.nodes)))
    return found


def forked_tree_inequality(ft: ForkedSubtree | Iterable[str], gt: GluingTree) -> LinearConstraint:
    if not isinstance(ft, ForkedSubtree):
        ft = _subtree_info(gt, frozenset(ft))
    t = gt.tree
    parts: list[tuple[int, Mapping[Subset, int]]] = []
    for c in sorted(ft.F):
        parts.append((1, forced_out_functional(c, t.neighbors(c) & ft.nodes, gt)))
    for c, d in ft.L:
        parts.append((-1, {subset((c, intervention_node(c), d)): 1}))
    for c in sorted(ft.interior):
        parts.append((-1, hash_functional(c, ft.nodes, gt)))
    f = _combine(*parts)
    rhs = 1 - len(ft.L)
    order = {v: i for i, v in enumerate(t.nodes)}
    name = ",".join(sorted(ft.nodes, key=order.get))
    return _constraint(f, "<=", rhs, "forked", f"forked {{{name}}}")


def j_equalities(gt: GluingTree) -> list[LinearConstraint]:
    out = []
    for j in sorted(gt.J):
        i, k = sorted(gt.tree.neighbors(j))
        z = intervention_node(j)
        out.append(_constraint({subset((i, j, k)): 1}, "=", 0, "affine-span", f"zero {i},{j},{k}"))
        out.append(_constraint({subset((i, j, k, z)): 1}, "=", 0, "affine-span", f"zero {i},{j},{j}',{k}"))
        out.append(_constraint({subset((i, j, z)): 1, subset((j, z, k)): 1}, "=", 1, "affine-span", f"hyperplane at {j}"))
    return out


@dataclass(frozen=True)
class HRepresentation:
    coords: CoordinateSystem
    inequalities: tuple[LinearConstraint, ...]
    equalities: tuple[LinearConstraint, ...]
    gluing_tree: GluingTree | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def leq_system(self) -> tuple[np.ndarray, np.ndarray, int]:
        """Integer (A, b, scale) with every inequality in ``<=`` form."""
        if "leq" not in self._cache:
            rows, rhs = [], []
            for c in self.inequalities:
                coeffs, r = c.as_leq()
                row = [Fraction(0)] * len(self.coords)
                for k, v in coeffs.items():
                    row[self.coords.index[k]] = v
                den = 1
                for v in row + [r]:
                    den = den * v.denominator // np.gcd(den, v.denominator)
                rows.append([int(v * den) for v in row])
                rhs.append(int(r * den))
            A = np.array(rows, dtype=np.int64).reshape(len(rows), len(self.coords))
            self._cache["leq"] = (A, np.array(rhs, dtype=np.int64))
        return self._cache["leq"]

    def check_point(self, point: CharImset) -> list[LinearConstraint]:
        """Constraints violated by ``point``."""
        return [c for c in self.inequalities + self.equalities if not c.satisfied_by(point)]


def h_representation(gt: GluingTree, cap: int = DEFAULT_SUBTREE_CAP) -> HRepresentation:
    if not gt.internal_black():
        raise PolytopeError("gluing tree has no internal black node; no star to anchor the description")
    coords = coordinate_system(gt)
    ineqs = star_inequalities(gt) + bidirected_edge_inequalities(gt)
    ineqs += [forked_tree_inequality(f, gt) for f in enumerate_forked_subtrees(gt, cap)]
    for c in ineqs:
        missing = [k for k in c.coeffs if k not in coords]
        if missing:
            raise PolytopeError(f"{c.label} uses coordinates outside the system: {missing}")
    return HRepresentation(coords, tuple(ineqs), tuple(j_equalities(gt)), gt)


# --- vertices --------------------------------------------------------------

@dataclass(frozen=True)
class VertexTable:
    """Dense vertex data: one row per distinct imset, with a representative mask."""

    coords: CoordinateSystem
    edges: tuple[tuple[str, str], ...]
    matrix: np.ndarray
    masks: np.ndarray

    def dag(self, row: int, tree_nodes: Sequence[str]) -> Dag:
        return mask_to_dag(int(self.masks[row]), self.edges, tree_nodes)

    def imset(self, row: int) -> CharImset:
        subs = self.coords.subsets
        return CharImset(frozenset(subs[s] for s in np.flatnonzero(self.matrix[row])))


def mask_to_dag(mask: int, edges: Sequence[tuple[str, str]], nodes: Sequence[str]) -> Dag:
    arcs = [(v, u) if mask >> b & 1 else (u, v) for b, (u, v) in enumerate(edges)]
    return Dag(nodes, arcs)


def dag_to_mask(d: Dag, edges: Sequence[tuple[str, str]]) -> int:
    mask = 0
    for b, (u, v) in enumerate(edges):
        if (v, u) in d.arcs:
            mask |= 1 << b
        elif (u, v) not in d.arcs:
            raise GraphError(f"edge {u}-{v} is missing from the DAG")
    return mask


def coordinate_requirements(coords: CoordinateSystem, edges: Sequence[tuple[str, str]]):
    """Padded (edge index, required bit) arrays describing each coordinate."""
    pos = {e: i for i, e in enumerate(edges)}
    width = max((len(s) - 1 for s in coords.subsets), default=1)
    ce = -np.ones((len(coords), max(width, 1)), dtype=np.int64)
    cb = -np.ones_like(ce)
    for s_idx, (s, v) in enumerate(zip(coords.subsets, coords.centers)):
        w_i = 0
        for w in s:
            if w == v or w == intervention_node(v):
                continue
            k = edge_key(w, v)
            ce[s_idx, w_i] = pos[k]
            cb[s_idx, w_i] = 0 if k[0] == w else 1  # bit 0 orients k[0] -> k[1]
            w_i += 1
    return ce, cb


def _j_mask_filter(masks: np.ndarray, gt: GluingTree, edges: Sequence[tuple[str, str]]) -> np.ndarray:
    pos = {e: i for i, e in enumerate(edges)}
    keep = np.ones(masks.shape[0], dtype=bool)
    for j in gt.J:
        into = []
        for n in sorted(gt.tree.neighbors(j)):
            k = edge_key(n, j)
            bit = (masks >> pos[k]) & 1
            into.append(bit == (0 if k[1] == j else 1))
        keep &= into[0] != into[1]
    return keep


def vertex_table(gt: GluingTree, cap: int = DEFAULT_VERTEX_EDGE_CAP) -> VertexTable:
    edges = tuple(gt.tree.sorted_edges())
    if len(edges) > cap:
        raise PolytopeError(f"{len(edges)} edges exceed the vertex enumeration cap {cap}")
    coords = coordinate_system(gt)
    masks = np.arange(1 << len(edges), dtype=np.int64)
    masks = masks[_j_mask_filter(masks, gt, edges)]
    ce, cb = coordinate_requirements(coords, edges)
    mat = _kernels.imsets_from_masks(masks, ce, cb)
    _, first = np.unique(mat, axis=0, return_index=True)
    first.sort()
    return VertexTable(coords, edges, mat[first], masks[first])


def enumerate_vertices(gt: GluingTree, cap: int = DEFAULT_VERTEX_EDGE_CAP) -> list[tuple[CharImset, Dag]]:
    """Distinct imsets of admissible orientations, each with one representative DAG."""
    vt = vertex_table(gt, cap)
    return [(vt.imset(r), vt.dag(r, gt.tree.nodes)) for r in range(vt.matrix.shape[0])]


# --- partings and gluing ---------------------------------------------------

def _component(tree: UndirectedTree, start: str, cut: tuple[str, str]) -> set[str]:
    seen, stack = {start}, [start]
    cut_k = edge_key(*cut)
    while stack:
        u = stack.pop()
        for w in tree.neighbors(u):
            if w not in seen and edge_key(u, w) != cut_k:
                seen.add(w)
                stack.append(w)
    return seen


def interventional_parting(gt: GluingTree, j: str) -> tuple[GluingTree, GluingTree]:
    if j not in gt.J:
        raise PolytopeError(f"{j!r} is not a degree-two target")
    i, k = sorted(gt.tree.neighbors(j))
    parts = []
    for side, other in ((i, k), (k, i)):
        nodes = _component(gt.tree, side, (j, other))
        sub = UndirectedTree(
            [v for v in gt.tree.nodes if v in nodes],
            [e for e in gt.tree.sorted_edges() if e[0] in nodes and e[1] in nodes],
        )
        parts.append(GluingTree(sub, (gt.I | {j}) & nodes, (gt.J - {j}) & nodes))
    return parts[0], parts[1]


def tfp_glue(
    verts1: Sequence[CharImset],
    verts2: Sequence[CharImset],
    match1: Iterable[str],
    match2: Iterable[str],
) -> list[CharImset]:
    """Pairs (v, w) with v[match1] == 1 - w[match2], glued by union of supports."""
    m1, m2 = subset(match1), subset(match2)
    out = []
    for v in verts1:
        a = v[m1]
        for w in verts2:
            b = w[m2]
            if a not in (0, 1) or b not in (0, 1):
                raise PolytopeError("matching coordinate is not 0/1")
            if a == 1 - b:
                out.append(CharImset(v.ones | w.ones))
    return out


def glue_at(gt: GluingTree, j: str) -> list[CharImset]:
    """Vertex set rebuilt from the interventional parting at ``j``."""
    left, right = interventional_parting(gt, j)
    i, k = sorted(gt.tree.neighbors(j))
    z = intervention_node(j)
    v1 = [c for c, _ in enumerate_vertices(left)]
    v2 = [c for c, _ in enumerate_vertices(right)]
    return tfp_glue(v1, v2, (i, j, z), (j, z, k))
