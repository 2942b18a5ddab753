"""Property tests over randomly drawn trees, orientations, targets and data."""
from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import essential_by_enumeration, imec_classes, naive_char_imset
from qigtree.gaussian_score import bic_direct, random_params, simulate
from qigtree.graphs import Dag, IDag, UndirectedTree, essential_graph, i_markov_equivalent, markov_equivalent, v_structures
from qigtree.imsets import CharImset, char_imset
from qigtree.polytope import GluingTree, h_representation, vertex_table
from qigtree.solver import brute_force_optimum, reconstruct_dag, solve


@st.composite
def trees(draw, min_p=2, max_p=7):
    p = draw(st.integers(min_p, max_p))
    nodes = [str(i) for i in range(1, p + 1)]
    edges = [(nodes[draw(st.integers(0, i - 1))], nodes[i]) for i in range(1, p)]
    return UndirectedTree(nodes, edges)


@st.composite
def oriented(draw, min_p=2, max_p=7):
    t = draw(trees(min_p, max_p))
    flips = draw(st.lists(st.booleans(), min_size=len(t.edges), max_size=len(t.edges)))
    d = Dag(t.nodes, [(v, u) if f else (u, v) for (u, v), f in zip(t.sorted_edges(), flips)])
    return t, d


@st.composite
def with_leaf_targets(draw, min_p=3, max_p=7):
    t, d = draw(oriented(min_p, max_p))
    leaves = t.leaves()
    targets = sorted(draw(st.sets(st.sampled_from(leaves), max_size=len(leaves))))
    return t, d, targets


@given(oriented(), st.data())
def test_imset_equality_iff_equivalence(a, data):
    t, d1 = a
    flips = data.draw(st.lists(st.booleans(), min_size=len(t.edges), max_size=len(t.edges)))
    d2 = Dag(t.nodes, [(v, u) if f else (u, v) for (u, v), f in zip(t.sorted_edges(), flips)])
    targets = data.draw(st.sets(st.sampled_from(sorted(t.nodes)), max_size=2))
    assert (char_imset(IDag(d1, targets)) == char_imset(IDag(d2, targets))) == i_markov_equivalent(d1, d2, targets)
    assert (char_imset(d1) == char_imset(d2)) == markov_equivalent(d1, d2)


@given(oriented(max_p=6), st.data())
def test_essential_graph_is_class_intersection(case, data):
    t, d = case
    targets = sorted(data.draw(st.sets(st.sampled_from(sorted(t.nodes)), max_size=3)))
    arcs, undirected = essential_by_enumeration(d, t, targets)
    e = essential_graph(d, targets)
    assert set(e.arcs) == arcs and set(e.edges) == undirected


@given(oriented(), st.permutations(list("abcdefg")))
def test_v_structures_commute_with_relabeling(case, names):
    _, d = case
    rename = dict(zip(d.nodes, names))
    moved = Dag([rename[v] for v in d.nodes], [(rename[u], rename[v]) for u, v in d.arcs])
    want = {tuple(sorted((rename[i], rename[k]))) + (rename[j],) for i, j, k in v_structures(d)}
    assert {(i, k, j) for i, j, k in v_structures(moved)} == want


@settings(max_examples=30)
@given(with_leaf_targets(min_p=3, max_p=7), st.lists(st.integers(-30, 30), min_size=64, max_size=64))
def test_lp_equals_brute_force(case, raw):
    t, _, targets = case
    gt = GluingTree(t, targets)
    if not gt.internal_black():
        return
    hrep = h_representation(gt)
    vt = vertex_table(gt)
    c = [Fraction(raw[i % len(raw)], 1 + (i % 5)) for i in range(len(hrep.coords))]
    sol = solve(hrep, c)
    assert sol.vertex_flag and sol.value == brute_force_optimum(vt.matrix, c)[1]


@given(with_leaf_targets())
def test_reconstruction_is_a_right_inverse(case):
    t, d, targets = case
    coords = GluingTree(t, targets).coords()
    c = char_imset(IDag(d, targets)).restrict(coords)
    back = reconstruct_dag(c, t, targets)
    assert char_imset(IDag(back, targets)) == char_imset(IDag(d, targets))


@settings(max_examples=25)
@given(with_leaf_targets(max_p=6), st.integers(0, 2**31))
def test_bic_is_constant_on_classes(case, seed):
    t, d, targets = case
    nrng = np.random.default_rng(seed)
    ds = simulate(d, targets, random_params(d, targets, nrng), [60] * (len(targets) + 1), nrng)
    ref = bic_direct(d, ds)
    for other in imec_classes(t, targets)[naive_char_imset(d, targets)]:
        assert abs(bic_direct(other, ds) - ref) <= 1e-9 * (1 + abs(ref))


@settings(max_examples=20)
@given(with_leaf_targets(min_p=4), st.lists(st.integers(-9, 9), min_size=40, max_size=40))
def test_pivoting_is_deterministic(case, raw):
    t, _, targets = case
    gt = GluingTree(t, targets)
    if not gt.internal_black():
        return
    hrep = h_representation(gt)
    c = [raw[i % len(raw)] for i in range(len(hrep.coords))]
    a, b = solve(hrep, c), solve(hrep, c)
    assert a.basis == b.basis and a.point == b.point and a.pivots == b.pivots


@given(with_leaf_targets())
def test_vertices_are_distinct_imsets(case):
    t, _, targets = case
    gt = GluingTree(t, targets)
    vt = vertex_table(gt)
    rows = [tuple(r) for r in vt.matrix.tolist()]
    assert len(rows) == len(set(rows))
    assert all(isinstance(vt.imset(r), CharImset) for r in range(len(rows)))
