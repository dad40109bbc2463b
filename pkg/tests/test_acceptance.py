"""Acceptance criteria, one test per criterion.

Seeds are fixed as ``100 * k + 1`` for criterion ``k`` and were chosen before
any run.  Each test logs a ``CRITERION k: PASS|FAIL ...`` line before it
asserts, and the lines are repeated in the pytest terminal summary.

Run directly with ``python tests/test_acceptance.py``.
"""
import math
import time

import numpy as np
import pytest

from maxlim import estimators as est
from maxlim import verify as ver
from maxlim.cadlag import StepFunction, d_j1
from maxlim.errors import InsufficientDataError
from maxlim.maxima import build_maxima, truncate_maxima
from maxlim.models import (
    IID,
    Frechet,
    Independent,
    MovingMaxima,
    Pareto,
    StochVol,
    derive_seed,
    sample,
    theoretical_an,
)
from oracles import j1_grid_oracle, pn_oracle, rn_oracle, strip_oracle

pytestmark = pytest.mark.slow

FR1 = Frechet(1.0)
IID_FR = IID(FR1)
MM2 = MovingMaxima(2, FR1)
SV = StochVol(Pareto(1.0), (0.7,), 0.5)
E1 = math.exp(-1)


def seed_for(k):
    return 100 * k + 1


def _check(log, k, ok, detail):
    log(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def _theta_pair(spec, n, seed):
    s = sample(spec, n, seed)
    u = est.quantile_level(s, 0.998)
    return est.blocks_theta(s, 50, u), est.obrien_theta(s, 20, u)


def test_criterion_01_frechet_endpoint(acceptance_log):
    t0 = time.perf_counter()
    r = ver.verify_endpoint_limit(IID_FR, 10 ** 4, 2000, seed_for(1), workers=4, threshold=0.05)
    dt = time.perf_counter() - t0
    ok = r.passed and dt <= 60
    _check(acceptance_log, 1, ok, f"KS={r.statistic:.4f} <= 0.05, runtime {dt:.1f}s <= 60s")


def test_criterion_02_theta_deflated(acceptance_log):
    dep = ver.verify_endpoint_limit(MM2, 10 ** 4, 2000, seed_for(2), threshold=0.05)
    ind = ver.verify_endpoint_limit(Independent(MM2), 10 ** 4, 2000, seed_for(2) + 1, threshold=0.05)
    ok = dep.passed and ind.passed
    _check(
        acceptance_log,
        2,
        ok,
        f"KS(MM2 vs theta=1/2)={dep.statistic:.4f}, KS(independent vs theta=1)={ind.statistic:.4f}, both <= 0.05",
    )


def test_criterion_03_stochvol_theta_one(acceptance_log):
    b, o = _theta_pair(SV, 10 ** 5, seed_for(3))
    env = ver.load_defaults()["endpoint_ks"]["stochvol"]
    r = ver.verify_endpoint_limit(SV, 10 ** 4, 2000, seed_for(3) + 1)
    ok = 0.85 <= b.value <= 1.0 and 0.85 <= o.value <= 1.0 and r.passed and r.threshold == env
    _check(
        acceptance_log,
        3,
        ok,
        f"blocks={b.value:.3f}, obrien={o.value:.3f} in [0.85,1]; endpoint KS={r.statistic:.4f} <= {env}",
    )


def test_criterion_04_moving_maxima_theta(acceptance_log):
    n = 10 ** 5
    b, o = _theta_pair(MM2, n, seed_for(4))
    q = int(math.log(n) ** 2)
    p_sched = est.pn_schedule(n, q, est.MixingRate.zero())
    ok = 0.42 <= b.value <= 0.58 and 0.42 <= o.value <= 0.58
    _check(
        acceptance_log,
        4,
        ok,
        f"blocks={b.value:.3f}, obrien={o.value:.3f} in [0.42,0.58] (r=50, p=20; pn_schedule gives p={p_sched})",
    )


def _random_step(rng, max_jumps=4):
    k = int(rng.integers(0, max_jumps + 1))
    times = np.sort(rng.uniform(0.01, 1.0, k))
    vals = rng.uniform(0, 3, k)
    if rng.random() < 0.2 and k:
        times[-1] = 1.0
    return StepFunction(float(rng.uniform(0, 1)), list(zip(times, vals)))


def _jittered(rng, f):
    # same levels, jump times moved by up to 0.05 so the time deformation matters
    t = np.clip(f.times + rng.uniform(-0.05, 0.05, f.times.size), 0.005, 1.0)
    t = np.where(f.times == 1.0, 1.0, t)
    if np.unique(t).size < t.size:
        return f
    return StepFunction(f.initial, sorted(zip(t, f.values)))


def test_criterion_05_j1_metric(acceptance_log):
    rng = np.random.default_rng(seed_for(5))
    worst = 0.0
    warped = 0
    for i in range(200):
        f = _random_step(rng)
        g = _jittered(rng, f) if i % 2 else _random_step(rng)
        dp = d_j1(f, g)
        warped += dp < f.sup_distance(g) - 1e-9
        worst = max(worst, abs(dp - j1_grid_oracle(f, g)))
    axiom_err = 0.0
    exact = True
    for _ in range(1000):
        f, g, h = (_random_step(rng) for _ in range(3))
        dfg, dgf = d_j1(f, g), d_j1(g, f)
        exact &= d_j1(f, f) == 0 and dfg == dgf and (dfg > 0) == (f != g)
        axiom_err = max(axiom_err, d_j1(f, h) - dfg - d_j1(g, h))
    ok = worst <= 2e-3 and exact and axiom_err <= 1e-9 and warped > 0
    _check(
        acceptance_log,
        5,
        ok,
        f"max |DP - grid oracle|={worst:.2e} <= 2e-3 ({warped}/200 pairs below the sup distance); identity/symmetry exact={exact}; "
        f"triangle excess={max(axiom_err, 0):.1e} <= 1e-9",
    )


def test_criterion_06_fdd(acceptance_log):
    r = ver.verify_fdd(IID_FR, [0.5, 1.0], [[2.0, 1.0]], 10 ** 4, 2000, seed_for(6), threshold=0.03)
    strip = strip_oracle(1.0, [0.5, 1.0], [2.0, 1.0], 10 ** 6, seed_for(6) + 1)
    exact = r.details["limit"][0]
    ok = r.passed and abs(strip - E1) <= 0.002 and abs(exact - E1) <= 1e-15
    _check(
        acceptance_log,
        6,
        ok,
        f"P_hat={r.details['empirical'][0]:.4f}, |P_hat - e^-1|={r.statistic:.4f} <= 0.03; "
        f"strip oracle {strip:.5f} within 0.002 of e^-1",
    )


def test_criterion_07_tightness(acceptance_log):
    r = ver.verify_extremal_tightness(1.0, 1.0, [0.01, 0.05, 0.1], 10 ** 5, seed_for(7))
    d = r.details
    dev = max(abs(a - b) for a, b in zip(d["pair_empirical"], d["pair_exact"]))
    ratios = [p / b for p, b in zip(d["prob"], d["bound_with_slack"])]
    _check(
        acceptance_log,
        7,
        r.passed,
        f"P_hat/bound={max(ratios):.3f} <= 1 over delta {d['deltas']}; pair deviation {dev:.4f} <= 0.01 "
        f"({d['pairs']} two-point draws)",
    )


def test_criterion_08_truncation_gap(acceptance_log):
    rng = np.random.default_rng(seed_for(8))
    models = (IID_FR, MM2, SV, IID(Pareto(1.7)))
    worst = -np.inf
    for i in range(10 ** 4):
        spec = models[i % len(models)]
        n = int(rng.integers(5, 400))
        u = float(rng.uniform(0.01, 3.0))
        m = build_maxima(sample(spec, n, derive_seed(seed_for(8), i)), theoretical_an(spec, n))
        worst = max(worst, d_j1(m, truncate_maxima(m, u)) - u)
    r = ver.verify_truncation_gap(MM2, 10 ** 4, 500, [0.05, 0.1, 0.2, 0.4, 0.8, 1.6], 0.2, seed_for(8) + 1)
    below = [p for u, p in zip(r.details["u_grid"], r.details["prob_gap_above_eps"]) if u <= 0.2]
    ok = worst <= 1e-12 and r.passed and all(p == 0 for p in below)
    _check(
        acceptance_log,
        8,
        ok,
        f"max(gap - u)={worst:.2e} <= 0 on 10^4 samples; P_hat(gap > eps) at u <= eps = {below}; "
        f"violations={int(r.statistic)}",
    )


def test_criterion_09_point_process(acceptance_log):
    r = ver.verify_exceedance_counts(IID_FR, 1.0, 10 ** 4, 2000, seed_for(9))
    d = r.details
    _check(
        acceptance_log,
        9,
        r.passed,
        f"TV={d['tv']:.4f} <= 0.03; mark KS={d['mark_ks']:.4f} <= 0.05 ({d['marks']} marks)",
    )


def test_criterion_10_tail_process(acceptance_log):
    n = 10 ** 6
    out = {}
    for j, (name, spec) in enumerate((("iid", IID_FR), ("stochvol", SV), ("mm2", MM2))):
        s = sample(spec, n, seed_for(10) + j)
        out[name] = est.tail_process_est(s, 1, 1.0, est.quantile_level(s, 0.999)).value
    ok = out["iid"] <= 0.05 and out["stochvol"] <= 0.05 and 0.45 <= out["mm2"] <= 0.55
    _check(
        acceptance_log,
        10,
        ok,
        f"iid={out['iid']:.4f}, stochvol={out['stochvol']:.4f} <= 0.05; mm2={out['mm2']:.4f} in [0.45,0.55]",
    )


def test_criterion_11_schedules(acceptance_log):
    zero = est.MixingRate.zero()
    half = est.MixingRate.geometric(0.5)
    hand = [
        est.rn_schedule(100, zero) == 22,
        est.rn_schedule(10 ** 6, half, lambda n: 4) == 176777,
        est.pn_schedule(10 ** 4, 100, zero) == 1001,
        est.pn_schedule(10 ** 4, 10, est.MixingRate(lambda l: 0.04, "const")) == 2000,
    ]
    grid = [1000 * 2 ** j for j in range(14)]
    agree = True
    r_ratio, p_ratio = [], []
    for ratio in (0.5, 0.7, 0.9):
        mix = est.MixingRate.geometric(ratio)
        for n in grid:
            r = est.rn_schedule(n, mix)
            q = int(math.log(n) ** 2)
            p = est.pn_schedule(n, q, mix)
            l = est.default_l_of_n(n)
            agree &= r == rn_oracle(n, ratio ** (l + 1)) and p == pn_oracle(n, q, ratio ** q)
            r_ratio.append(r / n)
            p_ratio.append(p / n)
    r_ratio = np.array(r_ratio).reshape(3, -1)
    p_ratio = np.array(p_ratio).reshape(3, -1)
    # per mixing rate: nonincreasing from the grid midpoint on and strictly smaller at the end
    mid = len(grid) // 2
    vanish = all(
        np.all(np.diff(a[:, mid:], axis=1) <= 0) and np.all(a[:, -1] < a[:, mid]) for a in (r_ratio, p_ratio)
    )
    ok = all(hand) and agree and vanish
    _check(
        acceptance_log,
        11,
        ok,
        f"hand values {hand}; big-precision agreement={agree}; ratios shrinking={vanish} "
        f"(r_n/n at n={grid[-1]}: {r_ratio[:, -1].max():.4f}, p_n/n: {p_ratio[:, -1].max():.4f})",
    )


def test_criterion_12_laplace_gap(acceptance_log):
    n = 10 ** 5
    r_n = est.rn_schedule(n, est.MixingRate.geometric(0.7))
    fam = est.laplace_gap_family(SV, n, r_n, reps=2000, seed=seed_for(12))
    ctrl = est.laplace_gap_family(Independent(SV), n, r_n, reps=500, seed=seed_for(12) + 1)
    sanity = est.laplace_gap(
        SV, 2000, 2000, est.FAMILY["flat"], reps=500, seed=seed_for(12) + 2
    )
    gaps = {k: v.value for k, v in fam.items()}
    ok = all(g <= 0.02 for g in gaps.values()) and sanity.value <= 3 * max(sanity.stderr, 1e-12) + 1e-12
    parts = ", ".join(f"{k}={v:.4f}" for k, v in gaps.items())
    ctrl_parts = ", ".join(f"{k}={v.value:.4f}" for k, v in ctrl.items())
    detail = (
        f"r_n={r_n}, k_n={n // r_n}; gaps {parts} (need <= 0.02); "
        f"independent control {ctrl_parts}; single-block sanity gap={sanity.value:.2e}"
    )
    acceptance_log(f"CRITERION 12: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v", "-s"]))
