"""Node-labeled trees, DAGs, interventional DAGs and essential graphs.

Nodes are strings. The interventional node attached to a target ``i`` is
labelled ``i + INTERVENTION_SUFFIX`` so it never collides with a variable.
"""
from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

INTERVENTION_SUFFIX = "_z"
DEFAULT_ORIENTATION_CAP = 22


class GraphError(ValueError):
    """Raised for malformed graphs or invalid graph operations."""


def intervention_node(label: str) -> str:
    return label + INTERVENTION_SUFFIX


def is_intervention_node(label: str) -> bool:
    return label.endswith(INTERVENTION_SUFFIX)


def edge_key(u: str, v: str) -> tuple[str, str]:
    """Canonical (sorted) form of an undirected edge."""
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class UndirectedGraph:
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    _adj: Mapping[str, frozenset[str]] = field(init=False, repr=False, compare=False)

    def __init__(self, nodes: Iterable[str], edges: Iterable[Iterable[str]] = ()):
        nodes = tuple(str(n) for n in nodes)
        if len(set(nodes)) != len(nodes):
            raise GraphError("duplicate node labels")
        known = set(nodes)
        es = set()
        for e in edges:
            u, v = (str(x) for x in e)
            if u == v:
                raise GraphError(f"self-loop at {u!r}")
            if u not in known or v not in known:
                raise GraphError(f"edge {u}-{v} uses an unknown node")
            k = edge_key(u, v)
            if k in es:
                raise GraphError(f"duplicate edge {u}-{v}")
            es.add(k)
        adj: dict[str, set[str]] = {n: set() for n in nodes}
        for u, v in es:
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", frozenset(es))
        object.__setattr__(self, "_adj", {n: frozenset(s) for n, s in adj.items()})

    def neighbors(self, v: str) -> frozenset[str]:
        return self._adj[v]

    def degree(self, v: str) -> int:
        return len(self._adj[v])

    def closed_neighborhood(self, v: str) -> frozenset[str]:
        return self._adj[v] | {v}

    def adjacent(self, u: str, v: str) -> bool:
        return v in self._adj[u]

    def sorted_edges(self) -> list[tuple[str, str]]:
        return sorted(self.edges)

    def leaves(self) -> list[str]:
        return [v for v in self.nodes if len(self._adj[v]) == 1]

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        seen = {self.nodes[0]}
        queue = deque(seen)
        while queue:
            u = queue.popleft()
            for w in self._adj[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == len(self.nodes)

    def is_tree(self) -> bool:
        return len(self.edges) == len(self.nodes) - 1 and self.is_connected()


class UndirectedTree(UndirectedGraph):
    """A connected acyclic undirected graph."""

    def __init__(self, nodes: Iterable[str], edges: Iterable[Iterable[str]] = ()):
        super().__init__(nodes, edges)
        if not self.nodes:
            raise GraphError("a tree needs at least one node")
        if not self.is_tree():
            raise GraphError("graph is not a tree")

    @classmethod
    def from_edges(cls, edges: Iterable[Iterable[str]]) -> "UndirectedTree":
        edges = [tuple(str(x) for x in e) for e in edges]
        nodes: list[str] = []
        for e in edges:
            for x in e:
                if x not in nodes:
                    nodes.append(x)
        return cls(nodes, edges)

    def internal_nodes(self) -> list[str]:
        return [v for v in self.nodes if self.degree(v) >= 2]


@dataclass(frozen=True)
class Dag:
    nodes: tuple[str, ...]
    arcs: frozenset[tuple[str, str]]
    _pa: Mapping[str, frozenset[str]] = field(init=False, repr=False, compare=False)
    _ch: Mapping[str, frozenset[str]] = field(init=False, repr=False, compare=False)

    def __init__(self, nodes: Iterable[str], arcs: Iterable[Iterable[str]] = ()):
        nodes = tuple(str(n) for n in nodes)
        if len(set(nodes)) != len(nodes):
            raise GraphError("duplicate node labels")
        known = set(nodes)
        pa: dict[str, set[str]] = {n: set() for n in nodes}
        ch: dict[str, set[str]] = {n: set() for n in nodes}
        arc_set = set()
        for a in arcs:
            t, h = (str(x) for x in a)
            if t == h:
                raise GraphError(f"self-loop at {t!r}")
            if t not in known or h not in known:
                raise GraphError(f"arc {t}->{h} uses an unknown node")
            if (h, t) in arc_set:
                raise GraphError(f"arcs {t}->{h} and {h}->{t} both present")
            arc_set.add((t, h))
            pa[h].add(t)
            ch[t].add(h)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "arcs", frozenset(arc_set))
        object.__setattr__(self, "_pa", {n: frozenset(s) for n, s in pa.items()})
        object.__setattr__(self, "_ch", {n: frozenset(s) for n, s in ch.items()})
        self.topological_order()  # raises on cycles

    def parents(self, v: str) -> frozenset[str]:
        return self._pa[v]

    def children(self, v: str) -> frozenset[str]:
        return self._ch[v]

    def family(self, v: str) -> frozenset[str]:
        return self._pa[v] | {v}

    def topological_order(self) -> list[str]:
        indeg = {n: len(self._pa[n]) for n in self.nodes}
        queue = deque(n for n in self.nodes if indeg[n] == 0)
        order = []
        while queue:
            u = queue.popleft()
            order.append(u)
            for w in sorted(self._ch[u]):
                indeg[w] -= 1
                if indeg[w] == 0:
                    queue.append(w)
        if len(order) != len(self.nodes):
            raise GraphError("graph contains a directed cycle")
        return order

    def sorted_arcs(self) -> list[tuple[str, str]]:
        return sorted(self.arcs)


@dataclass(frozen=True)
class IDag:
    """A DAG together with singleton intervention targets."""

    base: Dag
    targets: tuple[str, ...]

    def __init__(self, base: Dag, targets: Iterable[str] = ()):
        targets = tuple(str(t) for t in targets)
        if len(set(targets)) != len(targets):
            raise GraphError("intervention targets must be distinct")
        for t in targets:
            if t not in base.nodes:
                raise GraphError(f"target {t!r} is not a node of the DAG")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "targets", targets)

    def realized(self) -> Dag:
        """The DAG with an extra source ``i_z -> i`` for every target ``i``."""
        extra = [intervention_node(t) for t in self.targets]
        for z in extra:
            if z in self.base.nodes:
                raise GraphError(f"label {z!r} clashes with the intervention node label")
        arcs = list(self.base.arcs) + [(intervention_node(t), t) for t in self.targets]
        return Dag(self.base.nodes + tuple(extra), arcs)


@dataclass(frozen=True)
class Pdag:
    """Partially directed graph: each adjacent pair is one arc or one edge."""

    nodes: tuple[str, ...]
    arcs: frozenset[tuple[str, str]]
    edges: frozenset[tuple[str, str]]
    targets: tuple[str, ...] = ()

    def __init__(self, nodes, arcs=(), edges=(), targets=()):
        nodes = tuple(nodes)
        arcs = frozenset(tuple(a) for a in arcs)
        edges = frozenset(edge_key(*e) for e in edges)
        seen = set()
        for t, h in arcs:
            k = edge_key(t, h)
            if k in seen:
                raise GraphError(f"pair {t},{h} appears twice")
            seen.add(k)
        for k in edges:
            if k in seen:
                raise GraphError(f"pair {k} is both an arc and an edge")
            seen.add(k)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "arcs", arcs)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "targets", tuple(targets))


def skeleton(d: Dag) -> UndirectedGraph:
    g = UndirectedGraph(d.nodes, d.arcs)
    if g.is_tree():
        return UndirectedTree(d.nodes, d.arcs)
    return g


def v_structures(d: Dag) -> set[tuple[str, str, str]]:
    """Triples (i, j, k) with i < k, i -> j <- k and i, k nonadjacent."""
    adjacent = {edge_key(t, h) for t, h in d.arcs}
    out = set()
    for j in d.nodes:
        for i, k in itertools.combinations(sorted(d.parents(j)), 2):
            if edge_key(i, k) not in adjacent:
                out.add((i, j, k))
    return out


def _check_same_nodes(d1: Dag, d2: Dag) -> None:
    if set(d1.nodes) != set(d2.nodes):
        raise GraphError("DAGs are defined on different node sets")


def markov_equivalent(d1: Dag, d2: Dag) -> bool:
    _check_same_nodes(d1, d2)
    same_skel = {edge_key(*a) for a in d1.arcs} == {edge_key(*a) for a in d2.arcs}
    return same_skel and v_structures(d1) == v_structures(d2)


def i_markov_equivalent(d1: Dag, d2: Dag, targets: Iterable[str]) -> bool:
    _check_same_nodes(d1, d2)
    targets = tuple(targets)
    return markov_equivalent(IDag(d1, targets).realized(), IDag(d2, targets).realized())


def _orient(edge: tuple[str, str], flip: bool) -> tuple[str, str]:
    return (edge[1], edge[0]) if flip else edge


def enumerate_orientations(
    tree: UndirectedGraph,
    constraints: Mapping[tuple[str, str], tuple[str, str]] | None = None,
    cap: int = DEFAULT_ORIENTATION_CAP,
) -> Iterator[Dag]:
    """Stream every orientation of ``tree``.

    ``constraints`` maps an edge (either order) to the required arc. Bit ``e``
    of the orientation index refers to the ``e``-th free sorted edge; a zero
    bit orients it from the smaller to the larger label.
    """
    if not tree.is_tree():
        raise GraphError("orientation enumeration requires a tree")
    fixed: dict[tuple[str, str], tuple[str, str]] = {}
    for e, arc in (constraints or {}).items():
        k = edge_key(*e)
        if k not in tree.edges or edge_key(*arc) != k:
            raise GraphError(f"constraint {e} -> {arc} does not match a tree edge")
        fixed[k] = tuple(arc)
    free = [e for e in tree.sorted_edges() if e not in fixed]
    if len(free) > cap:
        raise GraphError(f"{len(free)} free edges exceed the orientation cap {cap}")
    fixed_arcs = list(fixed.values())
    for idx in range(1 << len(free)):
        arcs = fixed_arcs + [_orient(e, bool(idx >> b & 1)) for b, e in enumerate(free)]
        yield Dag(tree.nodes, arcs)


def _close_under_r1(adj: Mapping[str, frozenset[str]], arcs: set, undirected: set) -> None:
    """Orient u - v as u -> v whenever some w -> u has w, v nonadjacent."""
    queue = deque(sorted(arcs))
    while queue:
        w, u = queue.popleft()
        for v in sorted(adj[u]):
            k = edge_key(u, v)
            if k in undirected and v != w and v not in adj[w]:
                undirected.discard(k)
                arcs.add((u, v))
                queue.append((u, v))


def essential_graph(d: Dag, targets: Iterable[str] = ()) -> Pdag:
    """The interventional essential graph of ``d`` (tree skeletons only)."""
    targets = tuple(targets)
    if not UndirectedGraph(d.nodes, d.arcs).is_tree():
        raise GraphError("essential graphs are only supported for tree skeletons")
    real = IDag(d, targets).realized()
    adj = {n: real.parents(n) | real.children(n) for n in real.nodes}
    # intervention arcs are shared by every member of the class
    arcs: set[tuple[str, str]] = {(intervention_node(t), t) for t in targets}
    for i, j, k in v_structures(real):
        arcs.add((i, j))
        arcs.add((k, j))
    undirected = {edge_key(*a) for a in real.arcs} - {edge_key(*a) for a in arcs}
    _close_under_r1(adj, arcs, undirected)
    base = set(d.nodes)
    return Pdag(
        d.nodes,
        [a for a in arcs if a[0] in base and a[1] in base],
        [e for e in undirected if e[0] in base and e[1] in base],
        targets,
    )


# --- serialization ---------------------------------------------------------

def graph_to_json_obj(g, targets: Iterable[str] = ()) -> dict:
    obj = {"nodes": list(g.nodes), "arcs": [], "edges": [], "targets": list(targets)}
    if isinstance(g, Dag):
        obj["arcs"] = [list(a) for a in g.sorted_arcs()]
    elif isinstance(g, Pdag):
        obj["arcs"] = [list(a) for a in sorted(g.arcs)]
        obj["edges"] = [list(e) for e in sorted(g.edges)]
        obj["targets"] = list(g.targets or targets)
    else:
        obj["edges"] = [list(e) for e in g.sorted_edges()]
    return obj


def graph_to_json(g, targets: Iterable[str] = ()) -> str:
    return json.dumps(graph_to_json_obj(g, targets), sort_keys=True)


def graph_from_json_obj(obj: Mapping):
    """Return (graph, targets); the graph type follows the populated fields."""
    nodes = [str(n) for n in obj.get("nodes", [])]
    arcs = [tuple(a) for a in obj.get("arcs", [])]
    edges = [tuple(e) for e in obj.get("edges", [])]
    targets = tuple(str(t) for t in obj.get("targets", []))
    if arcs and edges:
        return Pdag(nodes, arcs, edges, targets), targets
    if arcs or not edges:
        return Dag(nodes, arcs), targets
    g = UndirectedGraph(nodes, edges)
    return (UndirectedTree(nodes, edges) if g.is_tree() else g), targets


def graph_from_json(text: str):
    return graph_from_json_obj(json.loads(text))


def to_dot(g, targets: Iterable[str] = (), name: str = "G") -> str:
    """DOT export; interventional nodes are drawn as boxes."""
    targets = list(targets) or list(getattr(g, "targets", ()))
    lines = [f"digraph {name} {{"]
    for n in g.nodes:
        lines.append(f'  "{n}";')
    for t in targets:
        z = intervention_node(t)
        lines.append(f'  "{z}" [shape=box, label="{t}\'"];')
        lines.append(f'  "{z}" -> "{t}";')
    if isinstance(g, (Dag, Pdag)):
        for t, h in sorted(g.arcs):
            lines.append(f'  "{t}" -> "{h}";')
    und = g.edges if not isinstance(g, Dag) else ()
    for u, v in sorted(und):
        lines.append(f'  "{u}" -> "{v}" [dir=none];')
    lines.append("}")
    return "\n".join(lines) + "\n"
