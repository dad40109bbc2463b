"""Extremal processes with power-law exponent measure, simulated from Poisson points."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from maxlim.cadlag import StepFunction
from maxlim.errors import DomainError
from maxlim.maxima import PointMeasure, max_functional
from maxlim.models import rng_for


@dataclass(frozen=True)
class ExtremalLaw:
    """Exponent measure ``nu(x, inf) = x**-alpha``, optionally truncated below ``u``."""

    alpha: float
    u: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")
        if not self.u >= 0:
            raise DomainError("truncation level must be nonnegative")

    def total_mass(self, eps: float) -> float:
        """Mass of ``(eps, inf)``, i.e. the Poisson mean of points above ``eps``."""
        return nu_tail(self, eps)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "u": self.u}


def nu_tail(law: ExtremalLaw, x) -> float:
    """``nu^(u)(x, inf)``: ``x**-alpha`` above ``u``, flat at ``u**-alpha`` below it."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise DomainError("nu_tail is defined for x > 0")
    with np.errstate(divide="ignore"):
        out = np.power(np.maximum(arr, law.u), -law.alpha)
    return float(out) if out.ndim == 0 else out


def sample_poisson_pp(law: ExtremalLaw, epsilon: float, seed=None, rng=None) -> PointMeasure:
    """Poisson process on ``[0, 1] x (epsilon, inf)`` with mean Lebesgue x ``nu``.

    The count is Poisson with mean ``epsilon**-alpha``; given the count, times
    are uniform and marks are ``epsilon * W**(-1/alpha)``.
    """
    if not epsilon > law.u:
        raise DomainError("epsilon must exceed the truncation level")
    if rng is None:
        rng = rng_for(seed)
    k = rng.poisson(nu_tail(law, epsilon))
    t = rng.uniform(0.0, 1.0, size=k)
    w = 1.0 - rng.uniform(0.0, 1.0, size=k)  # in (0, 1]
    v = epsilon * w ** (-1.0 / law.alpha)
    return PointMeasure(t=t, x=v)


def sample_poisson_batch(law: ExtremalLaw, epsilon: float, reps: int, seed=None):
    """``reps`` independent realizations in flat form.

    Returns ``(counts, t, x)`` where realization ``r`` owns the slice
    ``offsets[r]:offsets[r+1]`` of ``t`` and ``x`` with ``offsets = cumsum``.
    """
    if not epsilon > law.u:
        raise DomainError("epsilon must exceed the truncation level")
    rng = rng_for(seed)
    counts = rng.poisson(nu_tail(law, epsilon), size=reps)
    total = int(counts.sum())
    t = rng.uniform(0.0, 1.0, size=total)
    x = epsilon * (1.0 - rng.uniform(0.0, 1.0, size=total)) ** (-1.0 / law.alpha)
    return counts, t, x


def extremal_path(pm: PointMeasure) -> StepFunction:
    """Running maximum path ``t -> sup{x_k : t_k <= t}`` with empty sup 0."""
    return max_functional(pm, 0.0)


def fdd_cdf(law: ExtremalLaw, times: Sequence[float], levels: Sequence[float]) -> float:
    """``P(M(t_1) <= x_1, ..., M(t_k) <= x_k)`` for the extremal process.

    Counts on disjoint time strips are independent, and on strip
    ``(t_{j-1}, t_j]`` every point must stay below ``min_{i >= j} x_i``.
    """
    t = np.asarray(times, dtype=np.float64)
    x = np.asarray(levels, dtype=np.float64)
    if t.ndim != 1 or t.shape != x.shape or t.size == 0:
        raise DomainError("times and levels must be nonempty and of equal length")
    if np.any(t <= 0) or np.any(t > 1):
        raise DomainError("times must lie in (0, 1]")
    if np.any(np.diff(t) <= 0):
        raise DomainError("times must be strictly increasing")
    if np.any(~(x > 0)):
        raise DomainError("levels must be positive")
    floor = np.minimum.accumulate(x[::-1])[::-1]
    widths = np.diff(np.concatenate(([0.0], t)))
    return float(math.exp(-float(np.sum(widths * nu_tail(law, floor)))))
