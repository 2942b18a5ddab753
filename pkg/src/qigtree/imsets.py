"""Standard and characteristic imsets and the star-subset coordinate system."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .graphs import Dag, IDag, UndirectedGraph, intervention_node, is_intervention_node, INTERVENTION_SUFFIX

Subset = tuple[str, ...]


def subset(labels: Iterable[str]) -> Subset:
    """Canonical sorted, duplicate-free tuple of labels."""
    return tuple(sorted(set(labels)))


def subset_key(labels: Iterable[str]) -> str:
    return "|".join(subset(labels))


def parse_key(key: str) -> Subset:
    return tuple(key.split("|")) if key else ()


def render_label(label: str) -> str:
    return label[: -len(INTERVENTION_SUFFIX)] + "'" if is_intervention_node(label) else label


def render_subset(s: Iterable[str]) -> str:
    """Compact rendering such as ``aa'c``; comma separated for long labels."""
    parts = [render_label(x) for x in s]
    if all(len(p.rstrip("'")) == 1 for p in parts):
        return "".join(parts)
    return ",".join(parts)


def nonempty_subsets(items: Iterable[str], min_size: int = 1) -> Iterator[Subset]:
    items = sorted(items)
    for r in range(min_size, len(items) + 1):
        yield from itertools.combinations(items, r)


def _as_dag(d: Dag | IDag) -> Dag:
    return d.realized() if isinstance(d, IDag) else d


def standard_imset(d: Dag | IDag) -> dict[Subset, int]:
    """u = delta_N - delta_empty + sum_i (delta_pa(i) - delta_fa(i)), zeros dropped."""
    g = _as_dag(d)
    u: dict[Subset, int] = {}

    def bump(s: Iterable[str], by: int) -> None:
        k = subset(s)
        u[k] = u.get(k, 0) + by

    bump(g.nodes, 1)
    bump((), -1)
    for i in g.nodes:
        bump(g.parents(i), 1)
        bump(g.family(i), -1)
    return {k: v for k, v in u.items() if v}


@dataclass(frozen=True)
class CharImset:
    """Sparse 0/1 vector: ``ones`` holds the subsets (size >= 2) with value 1."""

    ones: frozenset[Subset]

    def __getitem__(self, s: Iterable[str]) -> int:
        return 1 if subset(s) in self.ones else 0

    def vector(self, coords: "CoordinateSystem") -> list[int]:
        return [1 if s in self.ones else 0 for s in coords.subsets]

    def restrict(self, coords: "CoordinateSystem") -> "CharImset":
        keep = set(coords.subsets)
        return CharImset(frozenset(s for s in self.ones if s in keep))

    def to_json_obj(self, coords: "CoordinateSystem | None" = None) -> dict[str, int]:
        if coords is None:
            return {"|".join(s): 1 for s in sorted(self.ones, key=_order)}
        return {k: (1 if s in self.ones else 0) for s, k in zip(coords.subsets, coords.keys)}

    def to_json(self, coords: "CoordinateSystem | None" = None) -> str:
        return json.dumps(self.to_json_obj(coords))

    @classmethod
    def from_json_obj(cls, obj: Mapping[str, int]) -> "CharImset":
        return cls(frozenset(parse_key(k) for k, v in obj.items() if int(v) == 1))


def char_imset(d: Dag | IDag) -> CharImset:
    """c(S) = 1 iff some i in S has S minus i inside pa(i), for |S| >= 2."""
    g = _as_dag(d)
    ones = set()
    for i in g.nodes:
        for t in nonempty_subsets(g.parents(i)):
            ones.add(subset(t + (i,)))
    return CharImset(frozenset(ones))


def char_from_standard(u: Mapping[Subset, int], nodes: Iterable[str] | None = None) -> CharImset:
    """c(S) = 1 - sum over supersets T of S of u(T), evaluated for every |S| >= 2."""
    if nodes is None:
        nodes = set().union(*[set(k) for k in u]) if u else set()
    ones = set()
    for s in nonempty_subsets(nodes, 2):
        ss = set(s)
        total = sum(v for t, v in u.items() if ss.issubset(t))
        val = 1 - total
        if val not in (0, 1):
            raise ValueError(f"input is not a standard imset (value {val} at {s})")
        if val:
            ones.add(s)
    return CharImset(frozenset(ones))


def _order(s: Subset):
    return (len(s), s)


@dataclass(frozen=True)
class CoordinateSystem:
    """Ordered star subsets of the realized tree, with centers and zero flags."""

    subsets: tuple[Subset, ...]
    centers: tuple[str, ...]
    zero: frozenset[Subset] = frozenset()
    index: Mapping[Subset, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {s: i for i, s in enumerate(self.subsets)})

    @property
    def keys(self) -> list[str]:
        return ["|".join(s) for s in self.subsets]

    def __len__(self) -> int:
        return len(self.subsets)

    def __contains__(self, s) -> bool:
        return subset(s) in self.index


def realized_tree(tree: UndirectedGraph, white: Iterable[str]) -> UndirectedGraph:
    """The tree with an extra leaf ``w_z`` hanging from every white node ``w``."""
    white = sorted(white)
    nodes = list(tree.nodes) + [intervention_node(w) for w in white]
    edges = list(tree.edges) + [(w, intervention_node(w)) for w in white]
    return UndirectedGraph(nodes, edges)


def coordinate_system(gt) -> CoordinateSystem:
    """All S with |S| >= 3 and v in S inside N[v] for some v of T^{I+J}."""
    white = set(gt.I) | set(gt.J)
    real = realized_tree(gt.tree, white)
    found: dict[Subset, str] = {}
    for v in real.nodes:
        nbrs = sorted(real.neighbors(v))
        for q in nonempty_subsets(nbrs, 2):
            found[subset(q + (v,))] = v
    zero = set()
    for j in gt.J:
        i, k = sorted(gt.tree.neighbors(j))
        zero.add(subset((i, j, k)))
        zero.add(subset((i, j, k, intervention_node(j))))
    ordered = sorted(found, key=_order)
    return CoordinateSystem(tuple(ordered), tuple(found[s] for s in ordered), frozenset(zero))
