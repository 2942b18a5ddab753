import random

import pytest

from _oracles import (
    all_orientations,
    essential_by_enumeration,
    naive_char_imset,
    naive_v_structures,
    random_orientation,
    random_tree,
)
from qigtree.graphs import (
    Dag,
    GraphError,
    IDag,
    Pdag,
    UndirectedGraph,
    UndirectedTree,
    enumerate_orientations,
    essential_graph,
    graph_from_json,
    graph_to_json,
    i_markov_equivalent,
    markov_equivalent,
    skeleton,
    to_dot,
    v_structures,
)

FIG1 = Dag("abcd", [("a", "c"), ("c", "b"), ("c", "d")])


def test_skeleton_of_star_dag():
    s = skeleton(FIG1)
    assert s.neighbors("c") == {"a", "b", "d"}
    assert sorted(s.nodes) == ["a", "b", "c", "d"]


def test_skeleton_trivial_cases():
    assert skeleton(Dag("xy")).edges == frozenset()
    assert skeleton(Dag("123", [("1", "2"), ("2", "3")])).sorted_edges() == [("1", "2"), ("2", "3")]


def test_tree_rejects_cycles_and_forests():
    with pytest.raises(GraphError):
        UndirectedTree("abc", [("a", "b"), ("b", "c"), ("a", "c")])
    with pytest.raises(GraphError):
        UndirectedTree("abcd", [("a", "b"), ("c", "d")])
    with pytest.raises(GraphError):
        UndirectedGraph("ab", [("a", "a")])


def test_dag_rejects_cycle():
    with pytest.raises(GraphError):
        Dag("abc", [("a", "b"), ("b", "c"), ("c", "a")])


def test_family_and_topological_order():
    assert FIG1.parents("b") == {"c"}
    assert FIG1.family("b") == {"b", "c"}
    order = FIG1.topological_order()
    assert order.index("a") < order.index("c") < order.index("d")


def test_v_structures_examples():
    assert v_structures(FIG1) == set()
    assert v_structures(Dag("abc", [("a", "c"), ("b", "c")])) == {("a", "c", "b")}
    # the intervention arc into d collides with c -> d
    real = IDag(FIG1, ["a", "d"]).realized()
    assert v_structures(real) == naive_v_structures(real) == {("c", "d", "d_z")}


def test_v_structures_match_triple_scan():
    rng = random.Random(1)
    for _ in range(100):
        t = random_tree(rng, rng.randint(2, 8))
        d = random_orientation(rng, t)
        assert v_structures(d) == naive_v_structures(d)


def test_markov_equivalence_basics():
    assert markov_equivalent(Dag("12", [("1", "2")]), Dag("12", [("2", "1")]))
    assert not markov_equivalent(Dag("abc", [("a", "c"), ("b", "c")]), Dag("abc", [("a", "c"), ("c", "b")]))
    with pytest.raises(GraphError):
        markov_equivalent(Dag("ab"), Dag("abc"))


def test_markov_equivalence_matches_imset_equality_on_path():
    t = UndirectedTree("acbd", [("a", "c"), ("c", "b"), ("b", "d")])
    dags = list(all_orientations(t))
    assert len(dags) == 8
    for d1 in dags:
        for d2 in dags:
            assert markov_equivalent(d1, d2) == (naive_char_imset(d1) == naive_char_imset(d2))


def test_interventions_break_equivalence():
    reversed_a = Dag("abcd", [("c", "a"), ("c", "b"), ("c", "d")])
    assert markov_equivalent(FIG1, reversed_a)
    assert not i_markov_equivalent(FIG1, reversed_a, ["a", "d"])
    assert i_markov_equivalent(FIG1, FIG1, ["a", "d"])
    with pytest.raises(GraphError):
        i_markov_equivalent(FIG1, FIG1, ["q"])


def test_empty_targets_reduce_to_plain_equivalence():
    rng = random.Random(2)
    for _ in range(100):
        t = random_tree(rng, rng.randint(2, 7))
        d1, d2 = random_orientation(rng, t), random_orientation(rng, t)
        assert i_markov_equivalent(d1, d2, []) == markov_equivalent(d1, d2)


def test_enumerate_orientations_counts():
    path = UndirectedTree("123", [("1", "2"), ("2", "3")])
    assert len(list(enumerate_orientations(path))) == 4
    fixed = list(enumerate_orientations(path, {("2", "1"): ("1", "2")}))
    assert len(fixed) == 2 and all(("1", "2") in d.arcs for d in fixed)
    star = UndirectedTree("cxyz", [("c", "x"), ("c", "y"), ("c", "z")])
    dags = list(enumerate_orientations(star))
    assert len(dags) == 8
    assert len({naive_char_imset(d) for d in dags}) == 2**3 - 3


def test_enumerate_orientations_cap_and_bad_constraint():
    path = UndirectedTree("123", [("1", "2"), ("2", "3")])
    with pytest.raises(GraphError):
        list(enumerate_orientations(path, cap=1))
    with pytest.raises(GraphError):
        list(enumerate_orientations(path, {("1", "3"): ("1", "3")}))


def test_enumeration_is_deterministic():
    t = UndirectedTree("abcd", [("a", "b"), ("b", "c"), ("b", "d")])
    assert [d.sorted_arcs() for d in enumerate_orientations(t)] == [
        d.sorted_arcs() for d in enumerate_orientations(t)
    ]


def test_essential_graph_examples():
    collider = Dag("abcd", [("a", "c"), ("b", "c"), ("c", "d")])
    e = essential_graph(collider)
    assert e.arcs == {("a", "c"), ("b", "c"), ("c", "d")} and not e.edges
    e = essential_graph(FIG1)
    assert not e.arcs and len(e.edges) == 3
    e = essential_graph(FIG1, ["a", "d"])
    assert e.arcs == {("a", "c"), ("c", "b"), ("c", "d")}


def test_essential_graph_matches_enumeration():
    rng = random.Random(3)
    for _ in range(100):
        t = random_tree(rng, rng.randint(2, 7))
        d = random_orientation(rng, t)
        targets = rng.sample(list(t.nodes), rng.randint(0, min(3, len(t.nodes))))
        arcs, undirected = essential_by_enumeration(d, t, targets)
        e = essential_graph(d, targets)
        assert set(e.arcs) == arcs
        assert set(e.edges) == undirected


def test_essential_graph_needs_tree():
    with pytest.raises(GraphError):
        essential_graph(Dag("abcd", [("a", "b"), ("c", "d")]))


def test_idag_validation():
    with pytest.raises(GraphError):
        IDag(FIG1, ["a", "a"])
    with pytest.raises(GraphError):
        IDag(FIG1, ["x"])
    real = IDag(FIG1, ["a"]).realized()
    assert real.parents("a") == {"a_z"} and not real.parents("a_z")


def test_pdag_rejects_double_adjacency():
    with pytest.raises(GraphError):
        Pdag("ab", [("a", "b")], [("a", "b")])


def test_json_round_trip():
    for g, targets in [(FIG1, ["a"]), (essential_graph(FIG1, ["a"]), ["a"]),
                       (UndirectedTree("abc", [("a", "b"), ("b", "c")]), [])]:
        back, t2 = graph_from_json(graph_to_json(g, targets))
        assert list(t2) == targets
        assert set(back.nodes) == set(g.nodes)
        if isinstance(g, Dag):
            assert back.arcs == g.arcs


def test_dot_export():
    text = to_dot(essential_graph(FIG1), ["a"])
    assert text.startswith("digraph")
    assert '"a_z" [shape=box' in text
    assert "dir=none" in text
