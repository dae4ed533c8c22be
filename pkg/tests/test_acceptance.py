"""Acceptance criteria, one test each.  Every test prints a PASS/FAIL line."""

from __future__ import annotations

import math
import random

import numpy as np

from spatialmix.branching import reduce_matrix, search_orders, spectral_radius, verify_supertree
from spatialmix.capacity import cavity_marginal, estimate_capacity, strip_capacity
from spatialmix.certify import Verdict, certify, gamma
from spatialmix.exactcount import count_bruteforce, count_transfer
from spatialmix.lattice import Constraint, induced_region
from spatialmix.nakdynamics import (
    F1_hat,
    F2_hat,
    SUBTREE_LUMPED,
    SUBTREE_PARTITION,
    check_subtree_property,
    iterate_gap,
    jacobian,
    perron_2x2,
    solve_fixed_point,
    subtree_matrix,
)
from spatialmix.sawtree import check_theorem_saw

# pinned tolerances
LAMBDA_TOL = 1e-3
NTYPES_SLACK = 1  # root-type convention
GAMMA5_RANGE = (4.047, 4.048)
GAMMA7_RANGE = (3.916, 3.918)
HAT_TOL = 1e-7
JACOBIAN_TOL = 1e-4
JACOBIAN_LAMBDA_TOL = 1e-3
IDENTITY_TOL = 1e-12
GAP_LIMIT = 0.0871958
GAP_TOL = 1e-5
GAP_FLOOR = 0.087
GAP_DEPTH = 2000
SAW_TOL = 1e-12
CAPACITY_EPS = 1e-3
CAPACITY_TOL = 2e-3
CAUCHY_RATIO = 0.9
SUPERTREE_TRIALS = 10_000
SUBTREE_TRIALS = 10_000
WALK_LEN = 20
LUMP_TOL = 1e-9

UNORDERED = {
    "hh": [(4, 55, 4.5064), (6, 493, 4.3864), (8, 5479, 4.3282)],
    "rwim": [(4, 81, 4.7273), (6, 1003, 4.6136), (8, 13053, 4.5533)],
    "nak": [(4, 157, 6.3876), (6, 2949, 6.1894), (8, 63205, 6.0972)],
}
ORDERED = {
    "hh": [(4, 35, (3.6857,)), (6, 282, (3.5872,)), (8, 2858, (3.5439,))],
    "rwim": [(4, 57, (4.1774,)), (6, 603, (4.0632,)), (8, 7238, (4.0132, 4.0147))],
    "nak": [(4, 85, (4.9883,)), (6, 1293, (4.8275,)), (8, 25262, (4.7587,))],
}


def report(capsys, number: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}")


def test_criterion_1_unordered_tables(capsys, matrices):
    lines, ok = [], True
    for cons, rows in UNORDERED.items():
        for l, ntypes, lam_ref in rows:
            bm, lam = matrices(cons, l, False)
            good = abs(bm.ntypes - ntypes) <= NTYPES_SLACK and abs(lam - lam_ref) <= LAMBDA_TOL
            ok &= good
            lines.append(f"{cons} l={l}: {bm.ntypes} types ({bm.ntypes_without_root} without root), lambda {lam:.4f}")
    report(capsys, 1, ok, "; ".join(lines))
    assert ok


def test_criterion_2_ordered_tables(capsys):
    lines, ok = [], True
    for cons, rows in ORDERED.items():
        for l, ntypes, accepted in rows:
            best = search_orders(cons, l, ntypes, accepted[0])[0]
            good = abs(best.ntypes - ntypes) <= NTYPES_SLACK and any(
                abs(best.lambda_star - a) <= LAMBDA_TOL for a in accepted
            )
            ok &= good
            lines.append(f"{cons} l={l} order {best.order.spec()}: {best.ntypes} types, lambda {best.lambda_star:.4f}")
    report(capsys, 2, ok, "; ".join(lines))
    assert ok


def test_criterion_3_gamma(capsys):
    g5, g7 = gamma(5).gamma, gamma(7).gamma
    ok = GAMMA5_RANGE[0] < g5 < GAMMA5_RANGE[1] and GAMMA7_RANGE[0] < g7 < GAMMA7_RANGE[1]
    report(capsys, 3, ok, f"gamma(5)={g5:.7f}, gamma(7)={g7:.7f}")
    assert ok


def test_criterion_4_certificates(capsys):
    hh = certify("hh", 4, ordered=True)
    rwim = certify("rwim", 8, ordered=True)
    nak = [certify("nak", l, ordered=o) for l in (4, 6, 8) for o in (False, True)]
    ok = (
        hh.verdict is Verdict.SSM_CERTIFIED
        and rwim.verdict is Verdict.SSM_CERTIFIED
        and all(c.verdict is Verdict.INCONCLUSIVE for c in nak)
    )
    nak_min = min(c.lambda_star for c in nak)
    report(
        capsys,
        4,
        ok,
        f"HH l=4 {hh.lambda_star:.4f} < {hh.gamma:.4f}; RWIM l=8 {rwim.lambda_star:.4f} < {rwim.gamma:.4f}; "
        f"NAK smallest {nak_min:.4f} >= {nak[0].gamma:.4f}",
    )
    assert ok


def test_criterion_5_nak_dynamics(capsys):
    f1, f2 = F1_hat(0.3356), F2_hat(0.2513)
    jac = jacobian(0.3356, 0.2513)
    jerr = float(np.abs(jac - np.array([[0.7534, 0.2681], [0.7522, 0.2007]])).max())
    lam = perron_2x2(jac)
    fp = solve_fixed_point()
    gaps = iterate_gap(GAP_DEPTH)
    floor = min(gaps[49:200])
    checks = {
        "F1hat": abs(f1 - 5.8531e-4) <= HAT_TOL,
        "F2hat": abs(f2 - 1.8569e-4) <= HAT_TOL,
        "jacobian": jerr <= JACOBIAN_TOL,
        "lambda": abs(lam - 1.0044) <= JACOBIAN_LAMBDA_TOL,
        "xhat": fp.xhat < 0.3356,
        "yhat": fp.yhat < 0.2513,
        "identity": abs(fp.yhat - fp.xhat / (1 + fp.xhat)) <= IDENTITY_TOL,
        "gap tail": abs(gaps[-1] - GAP_LIMIT) <= GAP_TOL,
        "gap floor": floor >= GAP_FLOOR,
    }
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    report(
        capsys,
        5,
        ok,
        f"F1hat={f1:.5e} F2hat={f2:.5e} |J-J_ref|={jerr:.1e} lambda={lam:.5f} "
        f"xhat={fp.xhat:.6f} yhat={fp.yhat:.6f} gap({GAP_DEPTH})={gaps[-1]:.7f} min gap 50..200={floor:.5f}"
        + (f" failed: {failed}" if failed else ""),
    )
    assert ok


def _random_fixing(region, rng):
    fixed = {}
    for p in sorted(region.vertices):
        r = rng.random()
        if r < 0.2:
            fixed[p] = 0
        elif r < 0.35 and all(fixed.get(q) != 1 for q in region.neighbors(p)):
            fixed[p] = 1
    return fixed


def _random_graph(rng, n):
    adj = {v: set() for v in range(n)}
    for v in range(1, n):
        u = rng.randrange(v)
        adj[u].add(v)
        adj[v].add(u)
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < 0.3:
                adj[u].add(v)
                adj[v].add(u)
    return {v: sorted(nb) for v, nb in adj.items()}


def test_criterion_6_oracle_equivalence(capsys):
    rng = random.Random(6)
    mismatches = 0
    cases = 0
    for cons in Constraint:
        for m in range(1, 5):
            for n in range(1, 5):
                region = induced_region(cons, m, n)
                for k in range(51):
                    fixed = _random_fixing(region, rng) if k else {}
                    cases += 1
                    mismatches += count_transfer(region, fixed).count != count_bruteforce(region, fixed).count
    worst = 0.0
    for _ in range(100):
        n = rng.randint(2, 10)
        adj = _random_graph(rng, n)
        root = rng.randrange(n)
        fixing = {}
        for v in adj:
            if v != root and rng.random() < 0.3:
                fixing[v] = 1 if rng.random() < 0.5 and all(fixing.get(u) != 1 for u in adj[v]) else 0
        worst = max(worst, check_theorem_saw(adj, root, fixing).diff)
    ok = mismatches == 0 and worst <= SAW_TOL
    report(capsys, 6, ok, f"{cases} counting cases, {mismatches} mismatches; 100 SAW-tree graphs, max diff {worst:.1e}")
    assert ok


def test_criterion_7_capacity(capsys):
    parts, ok = [], True
    for cons in ("hs", "hh"):
        est = estimate_capacity(cons, CAPACITY_EPS)
        oracle = strip_capacity(cons)
        good = est.converged and abs(est.estimate - oracle) <= CAPACITY_TOL
        ok &= good
        parts.append(f"{cons} t={est.t} estimate {est.estimate:.6f} vs strip {oracle:.6f}")
    series = [math.log2(1 / cavity_marginal("rwim", t)) for t in range(1, 7)]
    inc = [abs(b - a) for a, b in zip(series, series[1:])]
    ratios = [b / a for a, b in zip(inc, inc[1:])]
    ok &= max(ratios) < CAUCHY_RATIO
    parts.append(f"rwim increment ratios t=2..6 max {max(ratios):.3f}")
    parts.append(f"rwim note: t=6 value {series[-1]:.4f}, two-row strip {strip_capacity('rwim', step=2):.4f}")
    report(capsys, 7, ok, "; ".join(parts))
    assert ok


def test_criterion_8_tree_properties(capsys, matrices):
    failures = []
    for cons in ("hh", "rwim", "nak"):
        for l in (4, 6, 8):
            for ordered in (False, True):
                bm, _ = matrices(cons, l, ordered)
                res = verify_supertree(bm, cons, trials=SUPERTREE_TRIALS, walk_len=WALK_LEN, seed=l)
                if not res.ok:
                    failures.append(f"{cons} l={l} ordered={ordered}: {res.counterexample}")
    sub = check_subtree_property(SUBTREE_TRIALS, WALK_LEN)
    ms = subtree_matrix()
    red = reduce_matrix(ms, SUBTREE_PARTITION)
    lam_ms, lam_red = spectral_radius(ms).lambda_star, spectral_radius(red).lambda_star
    ok = (
        not failures
        and sub.ok
        and red.dense().tolist() == SUBTREE_LUMPED
        and abs(lam_ms - lam_red) <= LUMP_TOL
        and abs(lam_ms - (2 + math.sqrt(5))) <= LUMP_TOL
    )
    report(
        capsys,
        8,
        ok,
        f"18 supertree checks x {SUPERTREE_TRIALS} walks, failures {failures or 'none'}; "
        f"subtree {sub.ok}; lumped {red.dense().tolist()}; lambda {lam_ms:.10f} vs {lam_red:.10f}",
    )
    assert ok
