"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from rdut import (
    GridFunction,
    Infeasible,
    Lognormal,
    RDUTProblem,
    UtilityFunction,
    WeightingFunction,
    build_phi,
    concave_envelope,
    solve,
    solve_eut,
    transformed_kernel,
)
from rdut.oracle import DiscreteProblem, discrete_solve, lattice_check
from rdut.solver import budget, candidate_quantile, lagrangian_value
from rdut.verify import end_to_end

from conftest import CRRA2, FIXTURES, LN, MU, SIGMA, TK
from oracles import chord_sup_envelope, lognormal_moment, merton_wealth


def test_merton_reduction(criterion):
    p = replace(FIXTURES["merton"], n=10_000)
    t0 = time.perf_counter()
    s = solve(p)
    elapsed = time.perf_counter() - t0

    assert lognormal_moment(MU, SIGMA, 0.5) == pytest.approx(math.exp(-0.005), rel=1e-15)
    x = s.nodes[(s.nodes >= 0.01) & (s.nodes <= 0.99)]
    exact = merton_wealth(LN.quantile(1.0 - x), 1.0, 2.0, MU, SIGMA)
    rel = float(np.max(np.abs(s.q_star(x) - exact) / exact))
    criterion("1 Merton reduction", rel <= 1e-3 and elapsed < 1.0,
              f"max rel err {rel:.3g} over {x.size} nodes, {elapsed:.3f} s")


def _random_phi(rng, x):
    """Increasing, from -m to 0, with random convex and concave stretches."""
    n = x.size - 1
    k = rng.integers(2, 9)
    knots = np.sort(rng.uniform(0, 1, k))
    log_slope = np.interp(x[:-1], knots, rng.normal(0.0, 1.5, k)) + 0.3 * rng.normal(size=n)
    inc = np.exp(log_slope) * np.diff(x)
    v = np.concatenate([[0.0], np.cumsum(inc)])
    return v - v[-1]


def _gap_regions(gap, tol=1e-9):
    """Cell ranges [a, b) around each maximal run of nodes with delta - phi > tol."""
    pos = np.concatenate([[0], (gap > tol).astype(int), [0]])
    edges = np.flatnonzero(np.diff(pos))
    # node run i..j-1 lies strictly inside cells i-1..j-1
    return [(i - 1, j) for i, j in zip(edges[::2], edges[1::2])]


def _check_envelope(f):
    e = concave_envelope(f)
    gap = e.values - f.values
    ok = {
        "majorant": gap.min() >= -1e-12 and e.gap.min() >= -1e-12,
        "decreasing": bool(np.all(np.diff(e.slopes) < 0)),
        "endpoints": abs(e.values[0] - f.values[0]) <= 1e-12 and abs(e.values[-1] - f.values[-1]) <= 1e-12,
        # zero spread is zero variance without the round-off np.var adds via the mean
        "flat": all(np.ptp(e.cell_slopes[a:b]) == 0.0 for a, b in _gap_regions(e.gap)),
        "oracle": float(np.max(np.abs(e.values - chord_sup_envelope(f.nodes, f.values)))) <= 1e-10,
    }
    return ok, float(gap.min())


def test_envelope_suite(criterion):
    rng = np.random.default_rng(20240501)
    x = np.linspace(0.0, 1.0, 501)
    cases = {f"random{i}": GridFunction.from_values(x, _random_phi(rng, x)) for i in range(20)}
    for name, w in [("tk", TK), ("prelec", WeightingFunction.prelec(0.65, 1.0)),
                    ("prelec_s", WeightingFunction.prelec(1.5, 1.0))]:
        cases[name] = build_phi(LN, w, n=500, refine_ends=0)

    failures, worst_gap = [], 0.0
    for name, f in cases.items():
        ok, g = _check_envelope(f)
        worst_gap = min(worst_gap, g)
        failures += [f"{name}:{k}" for k, v in ok.items() if not v]
    criterion("2 envelope suite", not failures,
              f"{len(cases)} functions, min gap {worst_gap:.2g}, failures {failures or 'none'}")


def _random_steps(rng, cells, count):
    for _ in range(count):
        k = int(rng.integers(1, 30))
        cuts = np.sort(rng.choice(np.arange(1, cells), size=k - 1, replace=False))
        levels = np.sort(rng.lognormal(0.0, 1.0, k))
        yield np.repeat(levels, np.diff(np.concatenate([[0], cuts, [cells]]).astype(int)))


def test_relaxation_chain(criterion):
    rng = np.random.default_rng(7)
    worst_order, worst_gap, checked = 0.0, 0.0, 0
    for name in ("tk", "prelec", "power_tab"):
        p = FIXTURES[name]
        phi = build_phi(p.kernel, p.weighting, p.n, p.refine_ends)
        env = concave_envelope(phi)
        u = p.utility
        qs = list(_random_steps(rng, phi.size, 100))
        for lam in (0.5, 1.0, 2.0):
            qbar = candidate_quantile(env, u, lam)
            j_bar = lagrangian_value(qbar, env, u, lam)
            scale = 1.0 + abs(j_bar)
            worst_gap = max(worst_gap, abs(lagrangian_value(qbar, phi, u, lam) - j_bar) / scale)
            for q in qs:
                j_phi = lagrangian_value(q, phi, u, lam)
                j_delta = lagrangian_value(q, env, u, lam)
                # positive means an inequality is violated; a few ulps of round-off allowed
                worst_order = max(worst_order, (j_phi - j_delta) / scale, (j_delta - j_bar) / scale)
                checked += 1
    ok = worst_order <= 1e-12 and worst_gap <= 1e-8
    criterion("3 relaxation chain", ok,
              f"{checked} (Q, lam) pairs, worst violation {worst_order:.2g}, zero-gap {worst_gap:.2g}")


def test_oracle_agreement(criterion):
    p = FIXTURES["tk"]
    t0 = time.perf_counter()
    s = solve(p)
    gaps = []
    for n in (250, 500, 1000, 2000):
        d = discrete_solve(DiscreteProblem.from_problem(p, n))
        gaps.append(abs(s.objective_value - d.objective) / abs(s.objective_value))
    elapsed = time.perf_counter() - t0
    monotone = all(a > b for a, b in zip(gaps, gaps[1:]))
    criterion("4 oracle agreement", gaps[-1] <= 5e-3 and monotone and elapsed < 10.0,
              "gaps " + ", ".join(f"{g:.3g}" for g in gaps) + f", {elapsed:.2f} s")


def _random_fixture(rng):
    kind = rng.integers(0, 3)
    if kind == 0:
        w = WeightingFunction.tversky_kahneman(float(rng.uniform(0.4, 1.0)))
    elif kind == 1:
        w = WeightingFunction.prelec(float(rng.uniform(0.5, 1.5)), 1.0)
    else:
        w = WeightingFunction.power(float(rng.uniform(0.5, 2.0)))
    g = float(rng.uniform(0.3, 5.0))
    u = UtilityFunction.log() if abs(g - 1.0) < 0.05 else UtilityFunction.crra(g)
    k = Lognormal(float(rng.uniform(-0.1, 0.1)), float(rng.uniform(0.1, 0.6)))
    return RDUTProblem(float(rng.uniform(0.5, 3.0)), u, w, k)


def test_ground_truth_enumeration(criterion):
    rng = np.random.default_rng(99)
    results = []
    for i in range(10):
        d = DiscreteProblem.from_problem(_random_fixture(rng), 5)
        results.append(lattice_check(d, levels=8, seed=i)["equal"])
    criterion("5 ground-truth enumeration", all(results),
              f"{sum(results)}/10 fixtures equal on 5 cells x 8 levels")


def test_eut_equivalence(criterion):
    lines, ok = [], True
    for name, p in sorted(FIXTURES.items()):
        s = solve(p)
        t = transformed_kernel(s.envelope)
        e = solve_eut(p.utility, t, p.x0)
        dist = float(np.max(np.abs(s.q_star(s.nodes) - e.wealth_quantile(s.nodes))))
        mean_err = abs(t.mean() - p.kernel.mean())
        same = True
        for u in (UtilityFunction.crra(0.5), UtilityFunction.crra(2.0), UtilityFunction.log()):
            other = transformed_kernel(concave_envelope(build_phi(p.kernel, p.weighting, p.n, p.refine_ends)))
            s_u = solve(replace(p, utility=u))
            same &= np.array_equal(other.values, t.values) and np.array_equal(other.masses, t.masses)
            same &= np.array_equal(transformed_kernel(s_u.envelope).values, t.values)
        fixture_ok = dist <= 1e-9 and mean_err <= 1e-10 and same
        ok &= fixture_ok
        lines.append(f"{name}: sup {dist:.2g}, mean {mean_err:.2g}{'' if same else ', utility-dependent'}")
    criterion("6 EUT equivalence", ok, "; ".join(lines))


def test_monte_carlo_closure(criterion):
    t0 = time.perf_counter()
    reports = {name: end_to_end(FIXTURES[name], 1_000_000, seed=12345) for name in ("merton", "tk")}
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in reports.values()) and elapsed < 30.0
    detail = "; ".join(f"{k}: z {r.budget_z:.2f}, obj rel err {r.objective_rel_error:.2g}"
                       for k, r in reports.items())
    criterion("7 Monte-Carlo closure", ok, f"{detail}, {elapsed:.2f} s")


def test_budget_root(criterion):
    worst, monotone, infeasible = 0.0, True, True
    for p in FIXTURES.values():
        s = solve(p)
        b = budget(s.envelope, s.phi, p.utility, s.lambda_star)
        worst = max(worst, abs(b - p.x0) / p.x0)
        monotone &= bool(np.all(np.diff(s.q_cells) >= 0))
        for x0 in (0.0, -1.0):
            try:
                solve(replace(p, x0=x0))
                infeasible = False
            except Infeasible:
                pass
    criterion("8 budget root", worst <= 1e-8 and monotone and infeasible,
              f"worst relative residual {worst:.2g}, monotone {monotone}, infeasible flagged {infeasible}")
