"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line.  Run directly with
``python3 tests/test_acceptance.py`` or through pytest.
"""
import random
import subprocess
import sys
import time
from collections import Counter

import numpy as np
import pytest

from qigtree.gaussian_score import random_params, simulate
from qigtree.graphs import IDag
from qigtree.imsets import char_imset
from qigtree.learn import learn
from qigtree.verify import (
    EIGHT_TREE,
    EIGHT_TREE_EXTRA,
    EIGHT_TREE_ROWS,
    STAR_ACD,
    STAR_ACD_ROWS,
    canonical,
    generated_rows,
    parse_linear,
    random_dag,
    random_tree,
    suite_bic,
    suite_facets,
    suite_invariance,
    suite_mle,
    suite_star_counts,
    suite_support,
    suite_tfp,
)

# pinned tolerances and limits
BIC_TOL = 1e-8        # relative to 1 + |bic_direct|
MLE_TOL = 1e-10       # entrywise and relative determinant
SPREAD_TOL = 1e-9     # relative BIC spread inside a class
LIMITS = {"1": 10, "2": 1, "3": 120, "4": 120, "5": 30, "6": 60, "7": 30, "8": 30, "9": 180, "10": 300}

# reference listing for the eight-node tree, verbatim (two rows are misprinted)
REFERENCE_EIGHT_ROWS = (
    "x_{123} - x_{1234} >= 0", "x_{134} - x_{1234} >= 0", "x_{234} - x_{1234} >= 0", "x_{1234} >= 0",
    "x_{345} - x_{3458} >= 0", "x_{348} - x_{3458} >= 0", "x_{458} - x_{3458} >= 0", "x_{3458} >= 0",
    "x_{456} - x_{4567} >= 0", "x_{457} - x_{4567} >= 0", "x_{567} - x_{4567} >= 0", "x_{4567} >= 0",
    "(x_{134} + x_{234} - x_{1234}) + (x_{345} + x_{348} - x_{3458}) <= 1",
    "(x_{345} + x_{458} - x_{3458}) + (x_{456} + x_{457} - x_{4567}) <= 1",
    "(x_{488'}) + (x_{348} + x_{458} - x_{3458}) <= 1",
    "x_{123} + x_{134} + x_{234} - 2x_{1234} <= 1",
    "x_{456} + x_{457} + x_{567} - 2x_{4567} <= 1",
    "x_{345} + (1-x_{488'}) <= 1",
    "(x_{123} + x_{134} + x_{234} - 2x_{1234}) + (x_{456} + x_{457} + x_{567} - 2x_{4567}) + (1-x_{488'})"
    " <= 1 + (x_{345} + x_{348} + x_{458} - x_{3458})",
)


@pytest.fixture
def say(capsys):
    def emit(criterion: str, ok: bool, detail: str, seconds: float):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail} ({seconds:.1f}s)")
    return emit


def run_suite(fn, *args, **kwargs):
    t0 = time.perf_counter()
    results = fn(*args, **kwargs)
    failed = [r for r in results if not r.passed]
    return results, failed, time.perf_counter() - t0


def check_suite(say, criterion, fn, what, **kwargs):
    results, failed, secs = run_suite(fn, **kwargs)
    ok = not failed and secs < LIMITS[criterion]
    detail = f"{len(results) - len(failed)}/{len(results)} checks, {what}"
    if len(results) <= 2:
        detail += " [" + "; ".join(r.detail for r in results) + "]"
    if failed:
        detail += "; first failure: " + failed[0].name + " " + failed[0].detail
    say(criterion, ok, detail, secs)
    assert not failed, [f.row() for f in failed]
    assert secs < LIMITS[criterion]
    return results


def test_criterion_1_star_simplices(say):
    check_suite(say, "1", suite_star_counts, "stars with n=2..6 leaves are simplices with 2^n-n+k facets")


def test_criterion_2a_star_rows(say):
    t0 = time.perf_counter()
    got = Counter(generated_rows(*STAR_ACD))
    want = Counter(canonical(*parse_linear(r)) for r in STAR_ACD_ROWS)
    secs = time.perf_counter() - t0
    say("2a", got == want and secs < LIMITS["2"], f"star a,b,d at c with I={{a,d}}: {len(got)} rows", secs)
    assert got == want and secs < LIMITS["2"]


@pytest.mark.xfail(strict=True, reason="the reference listing has two misprinted rows and omits two facets")
def test_criterion_2b_eight_tree_reference_rows(say):
    t0 = time.perf_counter()
    got = Counter(generated_rows(*EIGHT_TREE))
    want = Counter(canonical(*parse_linear(r)) for r in REFERENCE_EIGHT_ROWS)
    secs = time.perf_counter() - t0
    missing, extra = sum((want - got).values()), sum((got - want).values())
    say("2b", got == want, f"eight-node tree: {len(want)} listed rows, {sum(got.values())} generated, "
        f"{missing} listed rows not generated, {extra} generated rows not listed", secs)
    assert got == want


def test_criterion_2b_corrected_rows(say):
    t0 = time.perf_counter()
    got = Counter(generated_rows(*EIGHT_TREE))
    want = Counter(canonical(*parse_linear(r)) for r in EIGHT_TREE_ROWS + EIGHT_TREE_EXTRA)
    secs = time.perf_counter() - t0
    say("2b-corrected", got == want, f"eight-node tree: {sum(got.values())} rows equal the 19 corrected rows "
        f"plus {len(EIGHT_TREE_EXTRA)} additional facets", secs)
    assert got == want


def test_criterion_3_support_function(say):
    check_suite(say, "3", suite_support, "50 random trees, 200 exact LP optima each equal brute force", objectives=200)


def test_criterion_4_facets(say):
    check_suite(say, "4", suite_facets, "50 random trees, facet and validity checks")


def test_criterion_5_tfp(say):
    check_suite(say, "5", suite_tfp, "20 gluing trees, vertices equal the glued products", count=20)


def test_criterion_6_bic_linearization(say):
    check_suite(say, "6", suite_bic, f"200 instances within {BIC_TOL:g} relative", count=200, tol=BIC_TOL)


def test_criterion_7_mle(say):
    check_suite(say, "7", suite_mle, f"50 instances within {MLE_TOL:g}", count=50, tol=MLE_TOL)


def test_criterion_8_score_invariance(say):
    check_suite(say, "8", suite_invariance, f"30 trees, class spreads within {SPREAD_TOL:g}", count=30, tol=SPREAD_TOL)


def test_criterion_9_recovery(say):
    t0 = time.perf_counter()
    rng, nrng = random.Random(7), np.random.default_rng(7)
    skel = imec = 0
    for _ in range(20):
        t = random_tree(rng, 8)
        d = random_dag(rng, t)
        leaves = t.leaves()
        ds = simulate(d, leaves, random_params(d, leaves, nrng), [5000] * (len(leaves) + 1), nrng)
        rep = learn(ds)
        same_skel = rep.skeleton.edges == t.edges
        skel += same_skel
        imec += same_skel and set(rep.targets) == set(leaves) and rep.imset == char_imset(IDag(d, leaves))
    secs = time.perf_counter() - t0
    ok = skel >= 19 and imec >= 17 and secs < LIMITS["9"]
    say("9", ok, f"skeleton {skel}/20 (need 19), I-MEC {imec}/20 (need 17)", secs)
    assert ok


def test_criterion_10_verify_command(say):
    t0 = time.perf_counter()
    res = subprocess.run([sys.executable, "-m", "qigtree.cli", "verify"], capture_output=True, text=True,
                         timeout=LIMITS["10"] + 60)
    secs = time.perf_counter() - t0
    summary = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr.strip()
    ok = res.returncode == 0 and secs < LIMITS["10"]
    say("10", ok, f"qig verify exit {res.returncode}, {summary.lstrip('# ')}", secs)
    assert ok, res.stdout + res.stderr


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-rxX"]))
