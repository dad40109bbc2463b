"""Tail index, extremal index, tail-process and mixing-condition estimators.

Thresholds are levels on the scale of the data (``u_level``), or multiples
``u`` of a normalizer ``a_n`` where the statistic is phrased that way.
:func:`quantile_level` converts an upper-tail quantile to a level.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from maxlim.errors import DomainError, InsufficientDataError
from maxlim.models import ModelSpec, SampleSeq, derive_seed, sample, theoretical_an


def _values(s) -> np.ndarray:
    return np.asarray(s.values if isinstance(s, SampleSeq) else s, dtype=np.float64)


@dataclass
class Estimate:
    value: float
    stderr: float
    n_used: int
    tuning: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_used < 1:
            raise DomainError("n_used must be at least 1")
        if not math.isfinite(self.stderr) or self.stderr < 0:
            raise DomainError("stderr must be finite and nonnegative")

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n_used": self.n_used, "tuning": self.tuning}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _binomial(hits: int, total: int, tuning: dict) -> Estimate:
    p = hits / total
    return Estimate(p, math.sqrt(p * (1.0 - p) / total), total, tuning)


# ---------------------------------------------------------------------------
# tail index and normalizer
# ---------------------------------------------------------------------------


def hill_alpha(sample: SampleSeq, k: int) -> Estimate:
    """Hill estimator of the tail index from the top ``k`` order statistics."""
    x = _values(sample)
    n = x.size
    if not 2 <= k < n:
        raise DomainError(f"need 2 <= k < n, got k={k}, n={n}")
    top = -np.sort(-np.partition(x, n - k - 1)[n - k - 1:])  # top k+1, descending
    if top[-1] <= 0:
        raise DomainError("top k+1 order statistics must be positive")
    mean_log = float(np.mean(np.log(top[:k] / top[k])))
    if mean_log <= 0:
        raise InsufficientDataError("top order statistics are all tied")
    value = 1.0 / mean_log
    return Estimate(value, value / math.sqrt(k), k, {"k": k})


def empirical_an(sample: SampleSeq) -> float:
    """Second-largest observation: the lowest level exceeded by exactly one point (ties aside)."""
    x = _values(sample)
    if x.size < 2:
        raise DomainError("need at least two observations")
    return float(np.partition(x, x.size - 2)[x.size - 2])


def quantile_level(sample: SampleSeq, q: float) -> float:
    """Empirical ``q``-quantile of the sample, used as a threshold level."""
    if not 0 < q < 1:
        raise DomainError("quantile must lie in (0, 1)")
    return float(np.quantile(_values(sample), q))


# ---------------------------------------------------------------------------
# extremal index
# ---------------------------------------------------------------------------


def blocks_theta(sample: SampleSeq, r: int, u_level: float) -> Estimate:
    """Disjoint-blocks estimator: blocks with an exceedance over total exceedances.

    Only the ``floor(n/r)`` complete blocks are used.  The standard error is
    a delete-one-block jackknife.
    """
    x = _values(sample)
    n = x.size
    if not 1 <= r < n:
        raise DomainError("block length must satisfy 1 <= r < n")
    nb = n // r
    exc = (x[: nb * r] > u_level).reshape(nb, r)
    per_block = exc.sum(axis=1)
    total = int(per_block.sum())
    if total == 0:
        raise InsufficientDataError("no exceedances of the threshold")
    hit = per_block > 0
    blocks_hit = int(hit.sum())
    value = blocks_hit / total
    tuning = {"r": r, "u_level": u_level, "blocks": nb, "blocks_hit": blocks_hit, "exceedances": total}
    # jackknife over blocks that carry exceedances; empty blocks leave the ratio unchanged
    loo_den = total - per_block[hit]
    ok = loo_den > 0
    if blocks_hit < 2 or not ok.all():
        return Estimate(value, 0.0, total, tuning)
    loo = np.full(nb, value)
    loo[np.flatnonzero(hit)] = (blocks_hit - 1) / loo_den
    se = math.sqrt((nb - 1) / nb * float(np.sum((loo - loo.mean()) ** 2)))
    return Estimate(value, se, total, tuning)


def obrien_theta(sample: SampleSeq, p: int, u_level: float) -> Estimate:
    """Runs form: share of exceedances followed by ``p`` observations below the level.

    Anchors whose forward window would run past the end are left out.
    """
    x = _values(sample)
    n = x.size
    if not 1 <= p < n:
        raise DomainError("window length must satisfy 1 <= p < n")
    pos = np.flatnonzero(x > u_level)
    anchors = pos[pos + p <= n - 1]
    if anchors.size == 0:
        raise InsufficientDataError("no exceedances with a complete forward window")
    nxt = np.searchsorted(pos, anchors, side="right")
    following = np.where(nxt < pos.size, pos[np.minimum(nxt, pos.size - 1)], n + p)
    clean = int(np.count_nonzero(following - anchors > p))
    return _binomial(clean, int(anchors.size), {"p": p, "u_level": u_level})


# ---------------------------------------------------------------------------
# tail process and anticlustering
# ---------------------------------------------------------------------------


def tail_process_est(sample: SampleSeq, k: int, r: float, x: float) -> Estimate:
    """``P(X_{i+k} > r x | X_i > x)`` over all ``i`` with ``i + k`` inside the sample."""
    if k == 0:
        raise DomainError("lag must be nonzero")
    if not r > 0 or not x > 0:
        raise DomainError("ratio and threshold must be positive")
    v = _values(sample)
    n = v.size
    if abs(k) >= n:
        raise InsufficientDataError("lag exceeds sample length")
    base, shifted = (v[: n - k], v[k:]) if k > 0 else (v[-k:], v[: n + k])
    cond = base > x
    total = int(cond.sum())
    if total == 0:
        raise InsufficientDataError("no exceedances of the threshold")
    hits = int(np.count_nonzero(shifted[cond] > r * x))
    return _binomial(hits, total, {"k": k, "r": r, "x": x})


def anticluster_stat(sample: SampleSeq, m: int, r_n: int, u: float, a_n: float) -> Estimate:
    """``P(max_{m <= |i| <= r_n} X_i > u a_n | X_0 > u a_n)`` with full two-sided windows only."""
    if not 1 <= m < r_n:
        raise DomainError("need 1 <= m < r_n")
    v = _values(sample)
    n = v.size
    level = u * a_n
    exc = v > level
    csum = np.concatenate(([0], np.cumsum(exc)))
    i = np.flatnonzero(exc)
    i = i[(i >= r_n) & (i + r_n <= n - 1)]
    if i.size == 0:
        raise InsufficientDataError("no exceedances with a complete two-sided window")
    right = csum[i + r_n + 1] - csum[i + m]
    left = csum[i - m + 1] - csum[i - r_n]
    hits = int(np.count_nonzero((right + left) > 0))
    return _binomial(hits, int(i.size), {"m": m, "r_n": r_n, "u": u, "a_n": a_n})


# ---------------------------------------------------------------------------
# block-size schedules
# ---------------------------------------------------------------------------


class MixingRate:
    """Nonincreasing mixing-coefficient bound ``l -> alpha_l``."""

    def __init__(self, rate: Callable[[int], float], name: str = "custom", params: Optional[dict] = None):
        self._rate = rate
        self.name = name
        self.params = params or {}

    def __call__(self, l: int) -> float:
        a = float(self._rate(int(l)))
        if not 0.0 <= a <= 1.0:
            raise DomainError(f"mixing coefficient out of [0, 1] at l={l}: {a}")
        return a

    def check(self, grid: Sequence[int] = tuple(2 ** j for j in range(12))) -> None:
        vals = [self(l) for l in grid]
        if any(b > a for a, b in zip(vals, vals[1:])):
            raise DomainError("mixing rate must be nonincreasing")

    @classmethod
    def geometric(cls, ratio: float, scale: float = 1.0) -> "MixingRate":
        if not 0 <= ratio < 1:
            raise DomainError("geometric ratio must lie in [0, 1)")
        return cls(lambda l: min(1.0, scale * ratio ** l), "geometric", {"ratio": ratio, "scale": scale})

    @classmethod
    def zero(cls) -> "MixingRate":
        return cls(lambda l: 0.0, "zero")

    def to_dict(self) -> dict:
        return {"name": self.name, **self.params}

    @classmethod
    def from_dict(cls, obj: dict) -> "MixingRate":
        obj = dict(obj)
        name = obj.pop("name", None)
        if name == "zero" and not obj:
            return cls.zero()
        if name == "geometric" and set(obj) <= {"ratio", "scale"}:
            return cls.geometric(obj["ratio"], obj.get("scale", 1.0))
        raise DomainError(f"unsupported mixing rate specification: {name!r} {sorted(obj)}")


def default_l_of_n(n: int) -> int:
    """``max(1, floor(n**(1/9)))``, computed on integers."""
    l = max(1, int(round(n ** (1.0 / 9.0))))
    while l ** 9 > n:
        l -= 1
    while (l + 1) ** 9 <= n:
        l += 1
    return max(1, l)


def check_l_of_n(l_of_n: Callable[[int], int], start: int = 2 ** 10, doublings: int = 20) -> None:
    """Heuristic check that ``l_of_n(n) / n**(1/8)`` decreases to small values on a doubling grid."""
    ns = [start * 2 ** j for j in range(doublings + 1)]
    ratios = [l_of_n(n) / n ** 0.125 for n in ns]
    if any(l_of_n(n) < 1 for n in ns):
        raise DomainError("l_of_n must be at least 1")
    if ratios[-1] > ratios[0] or ratios[-1] > 1.0:
        raise DomainError("l_of_n does not look like o(n^(1/8)) on the doubling grid")


def _floor_n_sqrt(n: int, a: float) -> int:
    # floor(n * sqrt(a)) == isqrt(floor(n^2 a)) exactly, with a taken as its binary value
    return math.isqrt(math.floor(Fraction(n) ** 2 * Fraction(a)))


def _floor_two_thirds(n: int) -> int:
    # floor(n^(2/3)) = integer cube root of n^2
    t = n * n
    c = int(round(t ** (1.0 / 3.0)))
    while c ** 3 > t:
        c -= 1
    while (c + 1) ** 3 <= t:
        c += 1
    return c


def rn_schedule(n: int, mixing: MixingRate, l_of_n: Callable[[int], int] = default_l_of_n) -> int:
    """``floor(max(n sqrt(alpha_{l_n + 1}), n**(2/3))) + 1`` in exact integer arithmetic."""
    n = int(n)
    if n < 1:
        raise DomainError("n must be positive")
    l = int(l_of_n(n))
    if l < 1:
        raise DomainError("l_of_n(n) must be at least 1")
    return max(_floor_n_sqrt(n, mixing(l + 1)), _floor_two_thirds(n)) + 1


def pn_schedule(n: int, q_n: int, mixing: MixingRate) -> int:
    """``max(floor(n sqrt(alpha_{q_n})), floor(sqrt(n q_n)) + 1)`` in exact integer arithmetic."""
    n, q_n = int(n), int(q_n)
    if not 1 <= q_n < n:
        raise DomainError("need 1 <= q_n < n")
    return max(_floor_n_sqrt(n, mixing(q_n)), math.isqrt(n * q_n) + 1)


# ---------------------------------------------------------------------------
# Laplace-functional gap for the block mixing condition
# ---------------------------------------------------------------------------

# f(t, x) = height * g(t) * min((x - u)_+ / w, 1); g is the trapezoid on
# support = [a, b, c, d] rising on [a, b], flat on [b, c], falling on [c, d]
FAMILY = {
    "flat": {"u": 0.5, "w": 1.0, "height": 1.0, "support": [0.0, 0.0, 1.0, 1.0]},
    "flat_high": {"u": 2.0, "w": 2.0, "height": 1.0, "support": [0.0, 0.0, 1.0, 1.0]},
    "bump_center": {"u": 0.5, "w": 1.0, "height": 1.0, "support": [0.2, 0.5, 0.5, 0.8]},
    "bump_early": {"u": 0.5, "w": 1.0, "height": 1.0, "support": [0.0, 0.1, 0.2, 0.4]},
    "bump_late": {"u": 0.5, "w": 1.0, "height": 1.0, "support": [0.6, 0.8, 0.9, 1.0]},
}

_F_KEYS = {"u", "w", "height", "support"}


def _check_f(params: dict) -> dict:
    unknown = set(params) - _F_KEYS
    if unknown:
        raise DomainError(f"unknown f parameters: {sorted(unknown)}")
    p = {"height": 1.0, "support": [0.0, 0.0, 1.0, 1.0], **params}
    a, b, c, d = (float(s) for s in p["support"])
    if not (a <= b <= c <= d) or not p["u"] > 0 or not p["w"] > 0 or p["height"] < 0:
        raise DomainError(f"invalid f parameters: {params}")
    return p


def time_profile(params: dict, t) -> np.ndarray:
    """The time factor ``height * g(t)`` of the test function."""
    p = _check_f(params)
    a, b, c, d = (float(s) for s in p["support"])
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(t >= b, 1.0, (t - a) / (b - a)) if b > a else (t >= a).astype(float)
        down = np.where(t <= c, 1.0, (d - t) / (d - c)) if d > c else (t <= d).astype(float)
    return p["height"] * np.clip(np.minimum(up, down), 0.0, 1.0)


def space_profile(params: dict, y) -> np.ndarray:
    p = _check_f(params)
    return np.minimum(np.maximum(np.asarray(y) - p["u"], 0.0) / p["w"], 1.0)


def _laplace_chunk(args):
    spec, n, r_n, a_n, families, seed, rep_ids = args
    k_n = n // r_n
    t = np.arange(1, n + 1, dtype=np.float64) / n
    frozen_t = np.arange(1, k_n + 1, dtype=np.float64) * r_n / n
    whole = {name: [] for name in families}
    blocks = {name: [] for name in families}
    gt = {name: time_profile(p, t) for name, p in families.items()}
    for rep in rep_ids:
        y = sample(spec, n, derive_seed(seed, rep)).values / a_n
        for name, p in families.items():
            h = space_profile(p, y)
            whole[name].append(math.exp(-float(np.dot(gt[name], h))))
            # per-block sums of the spatial part: the time factor is constant per block
            blocks[name].append(h[: k_n * r_n].reshape(k_n, r_n).sum(axis=1))
    return whole, {k: np.concatenate(v) for k, v in blocks.items()}, frozen_t


def laplace_gap_family(
    spec: ModelSpec,
    n: int,
    r_n: int,
    families: Optional[dict] = None,
    reps: int = 2000,
    seed: int = 0,
    workers: int = 1,
    a_n: Optional[float] = None,
) -> dict:
    """Gap estimates for several test functions from one shared set of replications.

    The product side uses stationarity: every block of length ``r_n`` has the
    law of ``X_1..X_{r_n}``, so each factor is estimated from all complete
    blocks of all replications.  The standard error combines the two sample
    means by the delta method and ignores their covariance.
    """
    if not 1 <= r_n <= n:
        raise DomainError("need 1 <= r_n <= n")
    if reps < 100:
        raise DomainError("laplace_gap needs at least 100 replications")
    families = dict(FAMILY if families is None else families)
    for p in families.values():
        _check_f(p)
    if a_n is None:
        a_n = theoretical_an(spec, n)
    ids = np.arange(reps)
    chunks = [c for c in np.array_split(ids, max(1, min(workers, reps))) if c.size]
    tasks = [(spec, n, r_n, a_n, families, seed, c.tolist()) for c in chunks]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=len(tasks)) as ex:
            parts = list(ex.map(_laplace_chunk, tasks))
    else:
        parts = [_laplace_chunk(t) for t in tasks]
    frozen_t = parts[0][2]
    out = {}
    for name, p in families.items():
        w = np.concatenate([np.asarray(part[0][name]) for part in parts])
        sb = np.concatenate([part[1][name] for part in parts])
        lhs = float(w.mean())
        g = time_profile(p, frozen_t)
        e = np.exp(-np.outer(sb, g))  # blocks x factors
        fac = e.mean(axis=0)
        rhs = float(np.prod(fac))
        var_lhs = float(w.var(ddof=1)) / w.size
        z = (e / fac).sum(axis=1) if np.all(fac > 0) else np.zeros(sb.size)
        var_rhs = rhs ** 2 * float(z.var(ddof=1)) / sb.size
        tuning = {
            "r_n": r_n,
            "k_n": int(n // r_n),
            "a_n": a_n,
            "reps": reps,
            "seed": seed,
            "f": p,
            "whole": lhs,
            "blocked": rhs,
        }
        out[name] = Estimate(abs(lhs - rhs), math.sqrt(var_lhs + var_rhs), reps, tuning)
    return out


def laplace_gap(
    spec: ModelSpec, n: int, r_n: int, f_params: dict, reps: int = 2000, seed: int = 0, workers: int = 1, a_n=None
) -> Estimate:
    """Monte Carlo gap between the Laplace functional of the whole sample and its block product."""
    return laplace_gap_family(spec, n, r_n, {"f": f_params}, reps, seed, workers, a_n)["f"]
