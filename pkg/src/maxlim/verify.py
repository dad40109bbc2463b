"""Monte Carlo checks of the limit laws of partial maxima and exceedance processes.

Every check draws replication ``i`` from ``derive_seed(seed, i)``, so a report is
reproducible from ``(seed, n, reps, model)`` and independent of the worker count.
Thresholds come from the defaults table (``defaults.json`` next to this module,
or the file named by ``MAXLIM_DEFAULTS``).
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from maxlim.cadlag import d_j1, eval_at, j1_oscillation
from maxlim.errors import ConfigurationError, DomainError
from maxlim.extremal import ExtremalLaw, extremal_path, fdd_cdf, sample_poisson_batch
from maxlim.maxima import PointMeasure, build_maxima, build_point_process, restrict, truncate_maxima
from maxlim.models import (
    IID,
    Independent,
    ModelSpec,
    MovingMaxima,
    StochVol,
    derive_seed,
    sample,
    theoretical_an,
    theoretical_theta,
)

# ---------------------------------------------------------------------------
# defaults table
# ---------------------------------------------------------------------------


def defaults_path() -> str:
    env = os.environ.get("MAXLIM_DEFAULTS")
    if env:
        return env
    return str(resources.files("maxlim").joinpath("defaults.json"))


def load_defaults(path: Optional[str] = None) -> dict:
    with open(path or defaults_path(), encoding="utf-8") as fh:
        return json.load(fh)


def model_kind(spec: ModelSpec) -> str:
    return {IID: "iid", MovingMaxima: "moving_maxima", StochVol: "stochvol", Independent: "independent"}[type(spec)]


# ---------------------------------------------------------------------------
# report and statistics
# ---------------------------------------------------------------------------


@dataclass
class VerificationReport:
    name: str
    statistic: float
    threshold: float
    n: int
    reps: int
    seed: int
    details: dict = field(default_factory=dict)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.statistic <= self.threshold)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_json_default)

    def summary(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.name}: {self.statistic:.4g} <= {self.threshold:.4g}"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def reports_to_csv(reports: Sequence[VerificationReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "statistic", "threshold", "passed", "seed"])
    for r in reports:
        w.writerow([r.name, repr(float(r.statistic)), repr(float(r.threshold)), r.passed, r.seed])
    return buf.getvalue()


def _apply_cdf(cdf: Callable, x: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(cdf(x), dtype=np.float64)
        if out.shape == x.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(cdf(v)) for v in x.tolist()])


def ks_stat(samples, cdf: Callable) -> float:
    """Kolmogorov distance ``sup_x |F_m(x) - F(x)|``.

    Both the value and the left limit are compared at each distinct sample
    point, so atoms in the sample or in ``cdf`` are handled exactly.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise DomainError("ks_stat needs at least one sample")
    x = np.sort(x)
    m = x.size
    u, idx, counts = np.unique(x, return_index=True, return_counts=True)
    below = idx / m
    upto = (idx + counts) / m
    f_at = _apply_cdf(cdf, u)
    f_left = _apply_cdf(cdf, np.nextafter(u, -np.inf))
    return float(max(np.max(np.abs(upto - f_at)), np.max(np.abs(below - f_left))))


def poisson_tv(counts, mean: float, cap: int = 20) -> float:
    """Total variation between the empirical count law and Poisson(mean) on {0..cap}, tail folded."""
    c = np.minimum(np.asarray(counts, dtype=np.int64), cap)
    emp = np.bincount(c, minlength=cap + 1) / c.size
    pmf = stats.poisson.pmf(np.arange(cap), mean)
    pmf = np.append(pmf, stats.poisson.sf(cap - 1, mean))
    return 0.5 * float(np.abs(emp - pmf).sum())


# ---------------------------------------------------------------------------
# replication plumbing
# ---------------------------------------------------------------------------


def _run_chunk(args):
    task, spec, n, a_n, seed, ids, extra = args
    return [task(sample(spec, n, derive_seed(seed, i)).values, a_n, extra) for i in ids]


def replicate(task: Callable, spec: ModelSpec, n: int, reps: int, seed: int, a_n: float, extra=None, workers: int = 1):
    """Results of ``task(values, a_n, extra)`` for replications ``0..reps-1``, in index order."""
    ids = np.arange(reps)
    chunks = [c.tolist() for c in np.array_split(ids, max(1, min(workers, reps))) if c.size]
    jobs = [(task, spec, n, a_n, seed, c, extra) for c in chunks]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=len(jobs)) as ex:
            parts = list(ex.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    return [r for part in parts for r in part]


def _normalizer(spec: ModelSpec, n: int, a_n: Optional[float]) -> float:
    return float(a_n) if a_n is not None else theoretical_an(spec, n)


def _known_theta(spec: ModelSpec) -> float:
    theta = theoretical_theta(spec)
    if theta is None:
        raise ConfigurationError(f"extremal index of {model_kind(spec)} model is not known")
    return theta


def _require_theta_one(spec: ModelSpec) -> None:
    if _known_theta(spec) != 1.0:
        raise ConfigurationError("this check applies to models with extremal index 1")


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def _endpoint_task(values, a_n, extra):
    return float(values.max()) / a_n


def verify_endpoint_limit(
    spec: ModelSpec,
    n: int,
    reps: int,
    seed: int,
    workers: int = 1,
    threshold: Optional[float] = None,
    a_n: Optional[float] = None,
) -> VerificationReport:
    """KS distance of ``M_n(1)`` to ``exp(-theta x**-alpha)``."""
    theta = _known_theta(spec)
    a_n = _normalizer(spec, n, a_n)
    alpha = spec.alpha
    ends = np.array(replicate(_endpoint_task, spec, n, reps, seed, a_n, workers=workers))
    stat = ks_stat(ends, lambda x: np.exp(-theta * np.power(x, -alpha)))
    if threshold is None:
        threshold = load_defaults()["endpoint_ks"][model_kind(spec)]
    return VerificationReport(
        "endpoint_limit",
        stat,
        threshold,
        n,
        reps,
        seed,
        {"model": spec.to_dict(), "theta": theta, "alpha": alpha, "a_n": a_n, "tolerance": "calibrated"},
    )


def _fdd_task(values, a_n, extra):
    times, grid = extra
    path = build_maxima(values, a_n)
    at = eval_at(path, np.asarray(times))
    return [bool(np.all(at <= np.asarray(lv))) for lv in grid]


def verify_fdd(
    spec: ModelSpec,
    times: Sequence[float],
    levels_grid,
    n: int,
    reps: int,
    seed: int,
    workers: int = 1,
    threshold: Optional[float] = None,
    a_n: Optional[float] = None,
) -> VerificationReport:
    """Max deviation of ``P(M_n(t_j) <= x_j for all j)`` from the extremal-process law over a grid."""
    _require_theta_one(spec)
    grid = np.atleast_2d(np.asarray(levels_grid, dtype=np.float64))
    times = [float(t) for t in times]
    if grid.shape[1] != len(times):
        raise DomainError("each level vector needs one entry per time")
    a_n = _normalizer(spec, n, a_n)
    law = ExtremalLaw(spec.alpha)
    target = np.array([fdd_cdf(law, times, lv) for lv in grid])
    hits = np.array(replicate(_fdd_task, spec, n, reps, seed, a_n, (times, grid.tolist()), workers), dtype=float)
    emp = hits.mean(axis=0)
    dev = np.abs(emp - target)
    if threshold is None:
        threshold = load_defaults()["fdd_abs"]
    return VerificationReport(
        "fdd",
        float(dev.max()),
        threshold,
        n,
        reps,
        seed,
        {"times": times, "levels": grid.tolist(), "empirical": emp.tolist(), "limit": target.tolist(), "a_n": a_n},
    )


def tightness_bound(delta: float, eps: float, alpha: float) -> float:
    """``delta (2 - delta) s**2 / 2`` with ``s = eps**-alpha``."""
    s = eps ** (-alpha)
    return delta * (2.0 - delta) * s * s / 2.0


def _tight_task(values, a_n, extra):
    u, deltas = extra
    path = truncate_maxima(build_maxima(values, a_n), u)
    return [j1_oscillation(path, d) for d in deltas]


def verify_tightness(
    spec: ModelSpec,
    n: int,
    reps: int,
    delta_grid: Sequence[float],
    eps: float,
    u: float,
    seed: int,
    workers: int = 1,
    a_n: Optional[float] = None,
) -> VerificationReport:
    """Worst ratio of ``P(omega'_delta(M_n^(u)) > eps)`` to the slackened tightness bound."""
    if not eps > u:
        raise DomainError("eps must exceed u")
    slack = load_defaults()["tightness_slack"]
    a_n = _normalizer(spec, n, a_n)
    deltas = [float(d) for d in delta_grid]
    osc = np.array(replicate(_tight_task, spec, n, reps, seed, a_n, (u, deltas), workers))
    prob = (osc > eps).mean(axis=0)
    bounds = np.array([slack * tightness_bound(d, eps, spec.alpha) for d in deltas])
    ratio = prob / bounds
    return VerificationReport(
        "tightness",
        float(ratio.max()),
        1.0,
        n,
        reps,
        seed,
        {"deltas": deltas, "prob": prob.tolist(), "bound_with_slack": bounds.tolist(), "slack": slack, "eps": eps, "u": u},
    )


def verify_extremal_tightness(
    alpha: float, eps: float, delta_grid: Sequence[float], draws: int, seed: int
) -> VerificationReport:
    """Tightness bound and close-pair probability for simulated extremal paths above ``eps``.

    The close-pair check uses realizations with exactly two points, whose
    times are two independent uniforms: ``P(|U_1 - U_2| < delta) = delta (2 - delta)``.
    """
    slack = load_defaults()["tightness_slack"]
    law = ExtremalLaw(alpha)
    counts, t, x = sample_poisson_batch(law, eps, draws, seed)
    offs = np.concatenate(([0], np.cumsum(counts)))
    deltas = [float(d) for d in delta_grid]
    exceed = np.zeros(len(deltas))
    for r in np.flatnonzero(counts >= 2):
        path = extremal_path(PointMeasure(t=t[offs[r]: offs[r + 1]], x=x[offs[r]: offs[r + 1]]))
        for j, d in enumerate(deltas):
            exceed[j] += j1_oscillation(path, d) > eps
    prob = exceed / draws
    bounds = np.array([slack * tightness_bound(d, eps, alpha) for d in deltas])
    two = np.flatnonzero(counts == 2)
    gaps = np.abs(t[offs[two]] - t[offs[two] + 1])
    pair_emp = np.array([(gaps < d).mean() for d in deltas])
    pair_exact = np.array([d * (2.0 - d) for d in deltas])
    pair_dev = np.abs(pair_emp - pair_exact)
    tol = 0.01
    stat = max(float((prob / bounds).max()), float(pair_dev.max()) / tol)
    return VerificationReport(
        "extremal_tightness",
        stat,
        1.0,
        0,
        draws,
        seed,
        {
            "deltas": deltas,
            "prob": prob.tolist(),
            "bound_with_slack": bounds.tolist(),
            "pair_empirical": pair_emp.tolist(),
            "pair_exact": pair_exact.tolist(),
            "pair_tolerance": tol,
            "pairs": int(two.size),
        },
    )


def _gap_task(values, a_n, extra):
    u_grid, eps = extra
    m = build_maxima(values, a_n)
    lv = m.levels
    out = []
    for u in u_grid:
        gap = d_j1(m, truncate_maxima(m, u))
        # a gap above eps needs a level in (eps, u] to be zeroed by the truncation
        witness = bool(np.any((lv > eps) & (lv <= u)))
        out.append((gap, witness))
    return out


def verify_truncation_gap(
    spec: ModelSpec,
    n: int,
    reps: int,
    u_grid: Sequence[float],
    eps: float,
    seed: int,
    workers: int = 1,
    a_n: Optional[float] = None,
) -> VerificationReport:
    """Count of violations of the truncation-gap properties.

    Per replication and ``u``: the gap never exceeds ``u``, and it exceeds
    ``eps`` only if some level in ``(eps, u]`` was zeroed.  Across ``u``:
    ``P(gap > eps)`` does not decrease as ``u`` grows, beyond three standard
    errors.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    a_n = _normalizer(spec, n, a_n)
    us = sorted(float(u) for u in u_grid)
    res = replicate(_gap_task, spec, n, reps, seed, a_n, (us, eps), workers)
    gaps = np.array([[g for g, _ in row] for row in res])
    wit = np.array([[w for _, w in row] for row in res])
    tol = 1e-12
    above_u = int(np.count_nonzero(gaps > np.array(us) + tol))
    unexplained = int(np.count_nonzero((gaps > eps) & ~wit))
    prob = (gaps > eps).mean(axis=0)
    se = np.sqrt(np.maximum(prob * (1 - prob), 1.0 / reps) / reps)
    drops = int(np.count_nonzero(np.diff(prob) < -3 * np.hypot(se[1:], se[:-1])))
    small_u_positive = int(sum(p > 0 for u, p in zip(us, prob) if u <= eps))
    violations = above_u + unexplained + drops + small_u_positive
    return VerificationReport(
        "truncation_gap",
        float(violations),
        0.0,
        n,
        reps,
        seed,
        {
            "u_grid": us,
            "eps": eps,
            "prob_gap_above_eps": prob.tolist(),
            "gap_above_u": above_u,
            "unexplained": unexplained,
            "monotonicity_drops": drops,
            "positive_below_eps": small_u_positive,
            "max_gap": gaps.max(axis=0).tolist(),
        },
    )


def _count_task(values, a_n, extra):
    u = extra
    pm = restrict(build_point_process(values, a_n), u)
    return len(pm), (pm.x / u).tolist()


def verify_exceedance_counts(
    spec: ModelSpec,
    u: float,
    n: int,
    reps: int,
    seed: int,
    workers: int = 1,
    a_n: Optional[float] = None,
) -> VerificationReport:
    """Poisson law of the number of points above ``u`` and Pareto law of their marks.

    The statistic is ``max(TV / tv_threshold, KS / ks_threshold)`` against 1,
    so it passes exactly when both parts pass.
    """
    _require_theta_one(spec)
    if not u > 0:
        raise DomainError("u must be positive")
    d = load_defaults()
    a_n = _normalizer(spec, n, a_n)
    alpha = spec.alpha
    res = replicate(_count_task, spec, n, reps, seed, a_n, float(u), workers)
    counts = np.array([c for c, _ in res])
    marks = np.array([m for _, ms in res for m in ms])
    mean = u ** (-alpha)
    tv = poisson_tv(counts, mean)
    ks = ks_stat(marks, lambda y: 1.0 - np.power(np.maximum(y, 1.0), -alpha)) if marks.size else 1.0
    stat = max(tv / d["count_tv"], ks / d["mark_ks"])
    return VerificationReport(
        "exceedance_counts",
        stat,
        1.0,
        n,
        reps,
        seed,
        {
            "u": u,
            "poisson_mean": mean,
            "mean_count": float(counts.mean()),
            "tv": tv,
            "tv_threshold": d["count_tv"],
            "mark_ks": ks,
            "mark_ks_threshold": d["mark_ks"],
            "marks": int(marks.size),
        },
    )


def _tail_task(values, a_n, extra):
    return [int(np.count_nonzero(values > a_n * x)) for x in extra]


def verify_tail_consistency(
    spec: ModelSpec,
    n: int,
    reps: int,
    seed: int,
    xs: Sequence[float] = (0.5, 1.0, 2.0, 4.0),
    workers: int = 1,
    a_n: Optional[float] = None,
) -> VerificationReport:
    """Max deviation of ``n P(X > a_n x)`` (pooled counts) from ``x**-alpha``."""
    _require_theta_one(spec)
    a_n = _normalizer(spec, n, a_n)
    xs = [float(x) for x in xs]
    counts = np.array(replicate(_tail_task, spec, n, reps, seed, a_n, xs, workers), dtype=float)
    emp = counts.mean(axis=0)
    target = np.power(xs, -spec.alpha)
    dev = np.abs(emp - target)
    return VerificationReport(
        "tail_consistency",
        float(dev.max()),
        load_defaults()["tail_consistency_abs"],
        n,
        reps,
        seed,
        {"x": xs, "empirical": emp.tolist(), "limit": target.tolist(), "a_n": a_n},
    )


# ---------------------------------------------------------------------------
# calibration of the endpoint envelope
# ---------------------------------------------------------------------------


def calibrate_endpoint(
    spec: ModelSpec, n: int, reps: int, seeds: Sequence[int], floor: float = 0.05, workers: int = 1
) -> dict:
    """Endpoint KS envelope from calibration seeds: ``max(floor, ceil(100 q95)/100 + 0.01)``."""
    s = np.array([verify_endpoint_limit(spec, n, reps, sd, workers, threshold=1.0).statistic for sd in seeds])
    q95 = float(np.quantile(s, 0.95))
    envelope = max(floor, math.ceil(100 * q95) / 100 + 0.01)
    return {"statistics": s.tolist(), "q95": q95, "envelope": envelope, "n": n, "reps": reps, "seeds": list(seeds)}
