import random
from fractions import Fraction

import numpy as np
import pytest

from _oracles import naive_char_imset, naive_vertices, random_orientation, random_tree
from qigtree.graphs import IDag, UndirectedTree
from qigtree.imsets import CharImset, char_imset
from qigtree.polytope import GluingTree, HRepresentation, LinearConstraint, h_representation, vertex_table
from qigtree.solver import (
    LpProblem,
    ReconstructionError,
    SolverError,
    affine_dim,
    brute_force_optimum,
    facet_check,
    lp_maximize,
    rationalize,
    reconstruct_dag,
    solve,
)
from qigtree.verify import random_gluing_tree, random_objective

STAR = GluingTree(UndirectedTree.from_edges([("a", "c"), ("b", "c"), ("c", "d")]), ["a", "d"])


def test_rationalize():
    assert rationalize(Fraction(1, 3)) == Fraction(1, 3)
    assert rationalize(0.5) == Fraction(1, 2)
    x = rationalize(0.1)
    assert x.denominator <= 2**40 and abs(float(x) - 0.1) <= 2**-41
    with pytest.raises(SolverError):
        rationalize(float("nan"))


def test_zero_objective():
    hrep = h_representation(STAR)
    sol = solve(hrep, [0] * len(hrep.coords))
    assert sol.value == 0 and sol.vertex_flag


def test_all_parents_vertex():
    hrep = h_representation(STAR)
    c = {("a", "b", "c", "d"): 1}
    sol = solve(hrep, c)
    assert sol.value == 1
    ones = sol.imset(hrep.coords).ones
    assert ("a", "b", "c", "d") in ones and ("a", "a_z", "c") not in ones


def test_lp_matches_brute_force_on_random_instances():
    rng = random.Random(9)
    for _ in range(10):
        gt = random_gluing_tree(rng, rng.randint(4, 8))
        hrep = h_representation(gt)
        vt = vertex_table(gt)
        rows = {tuple(r) for r in vt.matrix.tolist()}
        for _ in range(40):
            c = random_objective(rng, len(hrep.coords))
            sol = solve(hrep, c)
            _, best = brute_force_optimum(vt.matrix, c)
            assert sol.value == best
            assert sol.vertex_flag and tuple(int(x) for x in sol.point) in rows


def test_solutions_are_deterministic():
    hrep = h_representation(STAR)
    c = random_objective(random.Random(1), len(hrep.coords))
    first = solve(hrep, c)
    for _ in range(3):
        again = solve(hrep, c)
        assert again.basis == first.basis and again.point == first.point


def test_objective_length_is_checked():
    hrep = h_representation(STAR)
    with pytest.raises(SolverError):
        LpProblem.build(hrep, [1, 2])


def test_incomplete_description_is_reported():
    hrep = h_representation(STAR)
    stars_only = HRepresentation(hrep.coords, tuple(c for c in hrep.inequalities if c.tag == "star"), (), STAR)
    with pytest.raises(SolverError):
        lp_maximize(LpProblem.build(stars_only, {("a", "a_z", "c"): 1}))


def test_brute_force_ties_and_single_vertex():
    V = np.array([[0, 1], [1, 0], [1, 1]])
    assert brute_force_optimum(V[:1], [3, 4]) == (0, Fraction(4))
    assert brute_force_optimum(V, [0, 0])[0] == 0
    assert brute_force_optimum(V, [1, -1]) == (1, Fraction(1))


def test_affine_dimension():
    assert affine_dim([[1, 2, 3]]) == 0
    assert affine_dim([[0, 0], [0, 1], [1, 0], [1, 1]]) == 2
    # n = 3 leaves, k = 2 targets: 2^3 - 3 + 2 vertices forming a simplex
    vt = vertex_table(STAR)
    assert len(vt.matrix) == 7 and affine_dim(vt.matrix) == 6


def test_facet_check_examples():
    vt = vertex_table(STAR)
    loose = LinearConstraint({("a", "b", "c", "d"): 1}, "<=", 2, "test")
    assert facet_check(vt.matrix, vt.coords, loose) == {"valid": True, "tight_dim": -1, "facet": False, "slack": 7}
    for ineq in h_representation(STAR).inequalities:
        fc = facet_check(vt.matrix, vt.coords, ineq)
        assert fc["facet"] and fc["slack"] == 1


def test_reconstruct_example():
    coords = STAR.coords()
    c = CharImset(frozenset({("a", "a_z", "c"), ("c", "d", "d_z")}))
    d = reconstruct_dag(c, STAR.tree, ["a", "d"])
    assert ("c", "a") in d.arcs and ("c", "d") in d.arcs
    assert char_imset(IDag(d, ["a", "d"])).restrict(coords) == c


def test_reconstruct_without_targets():
    t = UndirectedTree.from_edges([("1", "2"), ("2", "3"), ("2", "4"), ("4", "5")])
    d = reconstruct_dag(CharImset(frozenset()), t)
    assert naive_char_imset(d) == frozenset(tuple(sorted(a)) for a in d.arcs)


def test_reconstruct_round_trips_every_vertex():
    rng = random.Random(10)
    for _ in range(30):
        t = random_tree(rng, rng.randint(3, 8))
        targets = [v for v in t.leaves() if rng.random() < 0.5]
        if len(targets) == len(t.nodes) - 1 and len(t.nodes) == 2:
            continue
        gt = GluingTree(t, targets)
        coords = gt.coords()
        for key, _ in naive_vertices(t, targets, (), coords.subsets):
            c = CharImset(frozenset(s for s, bit in zip(coords.subsets, key) if bit))
            d = reconstruct_dag(c, t, targets)
            assert char_imset(IDag(d, targets)).restrict(coords) == c


def test_reconstruct_rejects_inconsistent_imset():
    bad = CharImset(frozenset({("a", "b", "c"), ("a", "a_z", "c")}))
    with pytest.raises(ReconstructionError):
        reconstruct_dag(bad, STAR.tree, ["a", "d"])
