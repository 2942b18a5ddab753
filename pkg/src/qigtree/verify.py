"""Invariant suites that cross-check every component against brute-force oracles."""
from __future__ import annotations

import itertools
import logging
import math
import random
import re
import time
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from .gaussian_score import (
    InterventionalDataset,
    bic_direct,
    bic_via_alpha,
    mle_precisions,
    objective_vector,
    random_params,
    simulate,
)
from .graphs import Dag, IDag, UndirectedTree, enumerate_orientations, intervention_node
from .imsets import Subset, char_imset, subset
from .polytope import (
    GluingTree,
    LinearConstraint,
    enumerate_vertices,
    glue_at,
    h_representation,
    vertex_table,
)
from .solver import affine_dim, brute_force_optimum, facet_check, solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.suite}\t{self.name}\t{status}\t{self.seconds:.3f}\t{self.detail}"


# --- random instances ------------------------------------------------------

def random_tree(rng: random.Random, p: int) -> UndirectedTree:
    nodes = [str(i) for i in range(1, p + 1)]
    return UndirectedTree(nodes, [(nodes[rng.randrange(i)], nodes[i]) for i in range(1, p)])


def random_dag(rng: random.Random, tree: UndirectedTree) -> Dag:
    return Dag(tree.nodes, [(u, v) if rng.random() < 0.5 else (v, u) for u, v in tree.sorted_edges()])


def random_gluing_tree(rng: random.Random, p: int, with_j: bool = True, min_j: int = 0) -> GluingTree:
    """Random tree with random leaf targets and, optionally, degree-two targets."""
    for _ in range(10000):
        t = random_tree(rng, p)
        I = {v for v in t.leaves() if rng.random() < 0.5}
        J = {v for v in t.nodes if with_j and t.degree(v) == 2 and rng.random() < 0.4}
        white = I | J
        if len(J) < min_j or any(u in white and v in white for u, v in t.edges):
            continue
        gt = GluingTree(t, I, J)
        if gt.internal_black():
            return gt
    raise RuntimeError("could not draw a gluing tree")


def star(n: int, k: int) -> GluingTree:
    leaves = [f"l{i}" for i in range(1, n + 1)]
    t = UndirectedTree(["c"] + leaves, [("c", v) for v in leaves])
    return GluingTree(t, leaves[:k], ())


def random_objective(rng: random.Random, n: int) -> list[Fraction]:
    return [Fraction(rng.randint(-50, 50), rng.randint(1, 20)) for _ in range(n)]


def random_dataset(rng: random.Random, nrng: np.random.Generator, dag: Dag, targets, n_range=(30, 80)):
    params = random_params(dag, targets, nrng)
    sizes = [rng.randint(*n_range) for _ in range(len(targets) + 1)]
    return simulate(dag, targets, params, sizes, nrng)


# --- text constraints ------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|x_\{([^}]*)\}|(<=|>=|=|\\leq|\\geq|≤|≥)|([-+()]))")


def parse_coordinate(body: str) -> Subset:
    """``488'`` -> {4, 8, 8_z}; single-character labels only."""
    out: list[str] = []
    for ch in body.replace(" ", ""):
        if ch == "'":
            if not out:
                raise ValueError(f"dangling prime in {body!r}")
            out.append(intervention_node(out[-1]))
        else:
            out.append(ch)
    return subset(out)


def parse_linear(text: str) -> tuple[dict[Subset, Fraction], str, Fraction]:
    """Parse ``lhs REL rhs`` into ``(coeffs, sense, rhs)`` with everything moved left."""
    tokens, pos = [], 0
    text = text.strip().rstrip(".")
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse {text[pos:]!r}")
        tokens.append(m.groups())
        pos = m.end()
    rel = [i for i, t in enumerate(tokens) if t[2]]
    if len(rel) != 1:
        raise ValueError("expected exactly one relation")
    sense = {"\\leq": "<=", "\\geq": ">=", "≤": "<=", "≥": ">="}.get(tokens[rel[0]][2], tokens[rel[0]][2])

    def side(toks) -> tuple[dict, Fraction]:
        coeffs: dict[Subset, Fraction] = defaultdict(Fraction)
        const = Fraction(0)
        stack = [1]
        sign, factor = 1, None
        for num, coord, _, op in toks:
            if num is not None:
                factor = int(num)
                continue
            if coord is not None:
                coeffs[parse_coordinate(coord)] += stack[-1] * sign * (factor or 1)
            elif op == "(":
                stack.append(stack[-1] * sign * (factor or 1))
            else:
                if factor is not None:
                    const += stack[-1] * sign * factor
                if op == ")":
                    stack.pop()
                else:
                    sign, factor = (1 if op == "+" else -1), None
                    continue
            sign, factor = 1, None
        if factor is not None:
            const += stack[-1] * sign * factor
        return coeffs, const

    lc, lk = side(tokens[: rel[0]])
    rc, rk = side(tokens[rel[0] + 1 :])
    coeffs = {k: lc.get(k, 0) - rc.get(k, 0) for k in set(lc) | set(rc)}
    return {k: v for k, v in coeffs.items() if v}, sense, rk - lk


def canonical(coeffs: dict, sense: str, rhs) -> tuple:
    """Scale-free ``<=`` normal form used to compare constraint sets."""
    if sense == ">=":
        coeffs = {k: -v for k, v in coeffs.items()}
        rhs = -rhs
    vals = [Fraction(v) for v in coeffs.values()] + [Fraction(rhs)]
    den = math.lcm(*(v.denominator for v in vals))
    ints = [int(v * den) for v in vals]
    g = math.gcd(*ints) or 1
    items = tuple(sorted((k, int(Fraction(v) * den) // g) for k, v in coeffs.items() if v))
    return items, int(Fraction(rhs) * den) // g, "=" if sense == "=" else "<="


def canonical_constraint(c: LinearConstraint) -> tuple:
    return canonical(dict(c.coeffs), c.sense, c.rhs)


# --- reference rows --------------------------------------------------------

STAR_ACD = (["a", "c"], ["b", "c"], ["c", "d"]), ("a", "d")
STAR_ACD_ROWS = (
    "x_{abc} - x_{abcd} >= 0",
    "x_{bcd} - x_{abcd} >= 0",
    "x_{acd} - x_{abcd} >= 0",
    "x_{abcd} >= 0",
    "(x_{aa'c}) + (x_{abc} + x_{acd} - x_{abcd}) <= 1",
    "(x_{cdd'}) + (x_{acd} + x_{bcd} - x_{abcd}) <= 1",
    "(1 - x_{aa'c}) + (1 - x_{cdd'}) <= 1 + x_{acd}",
)

EIGHT_TREE = ([("1", "3"), ("2", "3"), ("3", "4"), ("4", "5"), ("4", "8"), ("5", "6"), ("5", "7")], ("8",))
EIGHT_TREE_ROWS = (
    "x_{123} - x_{1234} >= 0", "x_{134} - x_{1234} >= 0", "x_{234} - x_{1234} >= 0", "x_{1234} >= 0",
    "x_{345} - x_{3458} >= 0", "x_{348} - x_{3458} >= 0", "x_{458} - x_{3458} >= 0", "x_{3458} >= 0",
    "x_{456} - x_{4567} >= 0", "x_{457} - x_{4567} >= 0", "x_{567} - x_{4567} >= 0", "x_{4567} >= 0",
    "(x_{134} + x_{234} - x_{1234}) + (x_{345} + x_{348} - x_{3458}) <= 1",
    "(x_{345} + x_{458} - x_{3458}) + (x_{456} + x_{457} - x_{4567}) <= 1",
    "(x_{488'}) + (x_{348} + x_{458} - x_{3458}) <= 1",
    "x_{123} + x_{134} + x_{234} - 2x_{1234} <= 1",
    "x_{456} + x_{457} + x_{567} - 2x_{4567} <= 1",
    "x_{345} - x_{3458} + (1 - x_{488'}) <= 1",
    "(x_{123} - x_{1234}) + (x_{567} - x_{4567}) + (1 - x_{488'}) <= 1 + (x_{345} + x_{348} + x_{458} - x_{3458})",
)
EIGHT_TREE_EXTRA = (
    "(x_{123} - x_{1234}) + (1 - x_{488'}) <= 1 + x_{348}",
    "(x_{567} - x_{4567}) + (1 - x_{488'}) <= 1 + x_{458}",
)


def generated_rows(edges, targets) -> list[tuple]:
    gt = GluingTree(UndirectedTree.from_edges(edges), targets, ())
    return [canonical_constraint(c) for c in h_representation(gt).inequalities]


# --- MLE oracle ------------------------------------------------------------

def regression_precisions(dag: Dag, ds: InterventionalDataset) -> list[np.ndarray]:
    """Assemble each context covariance from per-node least squares, then invert."""
    p = ds.p
    pos = {v: i for i, v in enumerate(ds.variables)}
    out = []
    for k in range(len(ds.contexts)):
        lam = np.zeros((p, p))
        omega = np.zeros(p)
        for v in dag.nodes:
            targeted = [j for j in range(1, len(ds.contexts)) if ds.contexts[j].target == v]
            ks = [k] if k in targeted else [j for j in range(len(ds.contexts)) if j not in targeted]
            X = np.vstack([ds.contexts[j].data for j in ks])
            S = X.T @ X / X.shape[0]
            i = pos[v]
            pa = [pos[u] for u in sorted(dag.parents(v), key=pos.get)]
            if pa:
                coef = np.linalg.solve(S[np.ix_(pa, pa)], S[pa, i])
                lam[i, pa] = coef
                omega[i] = S[i, i] - S[i, pa] @ coef
            else:
                omega[i] = S[i, i]
        inv = np.linalg.inv(np.eye(p) - lam)
        out.append(np.linalg.inv(inv @ np.diag(omega) @ inv.T))
    return out


def determinant_product(dag: Dag, ds: InterventionalDataset, k: int) -> float:
    """Product over nodes of det S_fa / det S_pa with the pooling used by the MLE."""
    total = 1.0
    for v in dag.nodes:
        z = ds.contexts_targeting(v)
        ks = [k] if k in z else [j for j in range(len(ds.contexts)) if j not in z]
        X = np.vstack([ds.contexts[j].data for j in ks])
        S = X.T @ X / X.shape[0]
        fa = ds.index(sorted(dag.family(v)))
        pa = ds.index(sorted(dag.parents(v)))
        total *= np.linalg.det(S[np.ix_(fa, fa)]) / (np.linalg.det(S[np.ix_(pa, pa)]) if pa else 1.0)
    return total


# --- suites ----------------------------------------------------------------

def _timed(suite: str, name: str, fn: Callable[[], tuple[bool, str]]) -> CheckResult:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failed check, not a crashed suite
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(suite, name, ok, detail, time.perf_counter() - t0)


def suite_star_counts(seed: int = 0) -> list[CheckResult]:
    """Stars are simplices with 2^n - n + k vertices and as many facets."""
    results = []
    for n in range(2, 7):
        for k in range(0, n + 1):
            def check(n=n, k=k):
                gt = star(n, k)
                vt = vertex_table(gt)
                V = vt.matrix
                expected = 2**n - n + k
                hrep = h_representation(gt)
                if len(V) != expected:
                    return False, f"{len(V)} vertices, expected {expected}"
                if len(hrep.inequalities) != expected:
                    return False, f"{len(hrep.inequalities)} inequalities, expected {expected}"
                if affine_dim(V) != expected - 1:
                    return False, "vertices are affinely dependent"
                for c in hrep.inequalities:
                    fc = facet_check(V, vt.coords, c, expected - 1)
                    if not fc["valid"] or fc["slack"] != 1:
                        return False, f"{c.label}: valid={fc['valid']} slack={fc['slack']}"
                return True, f"{expected} vertices and facets"
            results.append(_timed("star-counts", f"n={n},k={k}", check))
    return results


def suite_reference_rows(seed: int = 0) -> list[CheckResult]:
    def star_rows():
        want = Counter(canonical(*parse_linear(r)) for r in STAR_ACD_ROWS)
        got = Counter(generated_rows(*STAR_ACD))
        return want == got, f"{len(got)} rows"

    def eight_rows():
        edges, targets = EIGHT_TREE
        want = Counter(canonical(*parse_linear(r)) for r in EIGHT_TREE_ROWS + EIGHT_TREE_EXTRA)
        got = Counter(generated_rows(edges, targets))
        return want == got, f"{len(got)} rows"

    return [_timed("reference-rows", "star a,b,d at c", star_rows),
            _timed("reference-rows", "eight-node tree", eight_rows)]


def _instances(seed: int, count: int = 50) -> list[GluingTree]:
    rng = random.Random(seed)
    return [random_gluing_tree(rng, rng.randint(4, 8), with_j=(i % 2 == 1)) for i in range(count)]


def suite_support(seed: int = 0, objectives: int = 200) -> list[CheckResult]:
    """LP optimum equals the brute-force maximum over enumerated vertices."""
    results = []
    for idx, gt in enumerate(_instances(seed)):
        def check(gt=gt, idx=idx):
            rng = random.Random(seed * 1000 + idx)
            hrep = h_representation(gt)
            vt = vertex_table(gt)
            for _ in range(objectives):
                c = random_objective(rng, len(hrep.coords))
                sol = solve(hrep, c)
                _, best = brute_force_optimum(vt.matrix, c)
                if sol.value != best:
                    return False, f"LP {sol.value} vs brute force {best}"
                if not sol.vertex_flag:
                    return False, "fractional optimum"
            return True, f"{objectives} objectives, {len(vt.matrix)} vertices"
        results.append(_timed("support", _describe(gt, idx), check))
    return results


def _describe(gt: GluingTree, idx: int) -> str:
    return f"#{idx} p={len(gt.tree.nodes)} I={sorted(gt.I)} J={sorted(gt.J)}"


def suite_facets(seed: int = 0) -> list[CheckResult]:
    """Star and edge inequalities are facets; forked ones are valid and tight somewhere."""
    results = []
    for idx, gt in enumerate(_instances(seed)):
        def check(gt=gt):
            hrep = h_representation(gt)
            vt = vertex_table(gt)
            dim = affine_dim(vt.matrix)
            is_star = len(gt.internal_black()) == 1 and not gt.J
            notes = []
            for c in hrep.inequalities:
                fc = facet_check(vt.matrix, vt.coords, c, dim)
                if not fc["valid"]:
                    return False, f"{c.label} is violated"
                if c.tag in ("star", "bidirected") or is_star:
                    if not fc["facet"]:
                        return False, f"{c.label} is not a facet"
                elif fc["tight_dim"] < 0:
                    return False, f"{c.label} is never tight"
                elif not fc["facet"]:
                    notes.append(f"{c.label} (face dim {fc['tight_dim']} of {dim})")
            if notes:
                log.info("non-facet forked inequalities: %s", "; ".join(notes))
            return True, "non-facet forked: " + ("; ".join(notes) if notes else "none")
        results.append(_timed("facets", _describe(gt, idx), check))
    return results


def suite_tfp(seed: int = 0, count: int = 20) -> list[CheckResult]:
    """Vertex sets agree with the gluing of the two halves at every degree-two target."""
    rng = random.Random(seed + 17)
    results = []
    for idx in range(count):
        gt = random_gluing_tree(rng, rng.randint(4, 9), with_j=True, min_j=1)

        def check(gt=gt):
            direct = Counter(c.ones for c, _ in enumerate_vertices(gt))
            for j in sorted(gt.J):
                glued = Counter(c.ones for c in glue_at(gt, j))
                if glued != direct:
                    return False, f"parting at {j}: {sum(glued.values())} glued vs {sum(direct.values())}"
            return True, f"{sum(direct.values())} vertices"
        results.append(_timed("tfp", _describe(gt, idx), check))
    return results


def _rel(a: float, b: float) -> float:
    return abs(a - b) / (1 + abs(b))


def suite_bic(seed: int = 0, count: int = 200, tol: float = 1e-8) -> list[CheckResult]:
    """Two BIC paths agree; the linear objective reproduces the BIC on every vertex."""
    rng = random.Random(seed + 31)
    nrng = np.random.default_rng(seed + 31)
    batches = []
    for _ in range(count):
        p = rng.randint(3, 7)
        t = random_tree(rng, p)
        leaves = t.leaves()
        targets = rng.sample(leaves, rng.randint(0, min(3, len(leaves))))
        d = random_dag(rng, t)
        batches.append((t, targets, d, random_dataset(rng, nrng, d, targets)))

    def check_paths():
        worst = 0.0
        for t, targets, d, ds in batches:
            worst = max(worst, _rel(bic_via_alpha(d, ds), bic_direct(d, ds)))
        return worst <= tol, f"worst relative gap {worst:.3g}"

    def check_objective():
        worst, nverts = 0.0, 0
        for t, targets, d, ds in batches:
            obj = objective_vector(t, ds)
            vt = vertex_table(GluingTree(t, targets, ()))
            w = np.array(obj.dense(vt.coords))
            for r in range(len(vt.matrix)):
                val = obj.constant + float(w @ vt.matrix[r])
                worst = max(worst, _rel(val, bic_direct(vt.dag(r, t.nodes), ds)))
                nverts += 1
        return worst <= tol, f"{nverts} vertices, worst relative gap {worst:.3g}"

    return [_timed("bic", f"{count} instances: alpha path", check_paths),
            _timed("bic", f"{count} instances: objective on vertices", check_objective)]


def suite_mle(seed: int = 0, count: int = 50, tol: float = 1e-10) -> list[CheckResult]:
    """Closed-form precisions match regression assembly; determinants factor over families."""
    rng = random.Random(seed + 47)
    nrng = np.random.default_rng(seed + 47)

    def check():
        worst_k, worst_det = 0.0, 0.0
        for _ in range(count):
            t = random_tree(rng, rng.randint(2, 7))
            d = random_dag(rng, t)
            targets = rng.sample(list(t.nodes), rng.randint(0, min(3, len(t.nodes))))
            ds = random_dataset(rng, nrng, d, targets, n_range=(200, 400))
            mine = mle_precisions(d, ds)
            oracle = regression_precisions(d, ds)
            for k, (a, b) in enumerate(zip(mine, oracle)):
                worst_k = max(worst_k, float(np.max(np.abs(a - b))))
                det_sigma = 1.0 / np.linalg.det(a)
                prod = determinant_product(d, ds, k)
                worst_det = max(worst_det, abs(det_sigma - prod) / abs(prod))
        ok = worst_k <= tol and worst_det <= tol
        return ok, f"max entry gap {worst_k:.3g}, max determinant gap {worst_det:.3g}"

    return [_timed("mle", f"{count} instances", check)]


def suite_invariance(seed: int = 0, count: int = 30, tol: float = 1e-9) -> list[CheckResult]:
    """Every member of an enumerated equivalence class gets the same BIC."""
    rng = random.Random(seed + 59)
    nrng = np.random.default_rng(seed + 59)

    def check():
        worst, classes = 0.0, 0
        for _ in range(count):
            t = random_tree(rng, rng.randint(2, 6))
            targets = rng.sample(list(t.nodes), rng.randint(0, min(2, len(t.nodes))))
            ds = random_dataset(rng, nrng, random_dag(rng, t), targets)
            groups: dict = defaultdict(list)
            for d in enumerate_orientations(t):
                groups[char_imset(IDag(d, targets))].append(bic_direct(d, ds))
            for vals in groups.values():
                spread = (max(vals) - min(vals)) / max(1.0, abs(vals[0]))
                worst = max(worst, spread)
            classes += len(groups)
        return worst <= tol, f"{classes} classes, worst relative spread {worst:.3g}"

    return [_timed("invariance", f"{count} trees", check)]


SUITES: dict[str, Callable[..., list[CheckResult]]] = {
    "star-counts": suite_star_counts,
    "reference-rows": suite_reference_rows,
    "support": suite_support,
    "facets": suite_facets,
    "tfp": suite_tfp,
    "bic": suite_bic,
    "mle": suite_mle,
    "invariance": suite_invariance,
}


def _run_one(args: tuple[str, int]) -> list[CheckResult]:
    name, seed = args
    return SUITES[name](seed)


def run_suites(names: Iterable[str] | None = None, seed: int = 0, workers: int = 1) -> list[CheckResult]:
    names = list(names) if names else list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suites: {unknown}")
    jobs = [(n, seed) for n in names]
    if workers <= 1:
        return list(itertools.chain.from_iterable(_run_one(j) for j in jobs))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(itertools.chain.from_iterable(pool.map(_run_one, jobs)))
