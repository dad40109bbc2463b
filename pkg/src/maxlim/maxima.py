"""Partial maxima paths, time-space point processes and the maximum functional."""
from __future__ import annotations

import csv
import io
import json
from typing import Iterable, Optional, Sequence

import numpy as np

from maxlim.cadlag import StepFunction
from maxlim.errors import DomainError
from maxlim.models import SampleSeq


class PointMeasure:
    """Finite point measure on ``[0, 1] x (0, inf]``.

    Points are kept sorted by time with a stable order among equal times.
    """

    __slots__ = ("t", "x")

    def __init__(self, points: Iterable[Sequence[float]] = (), t=None, x=None):
        if t is None:
            pts = [(float(a), float(b)) for a, b in points]
            t = np.array([p[0] for p in pts], dtype=np.float64)
            x = np.array([p[1] for p in pts], dtype=np.float64)
        else:
            t = np.asarray(t, dtype=np.float64)
            x = np.asarray(x, dtype=np.float64)
        if t.shape != x.shape or t.ndim != 1:
            raise DomainError("times and marks must be 1-d arrays of equal length")
        if t.size and (np.any(t < 0) or np.any(t > 1) or np.any(np.isnan(t))):
            raise DomainError("point times must lie in [0, 1]")
        if x.size and not np.all(x > 0):
            raise DomainError("point marks must be positive")
        order = np.argsort(t, kind="stable")
        t, x = t[order], x[order]
        t.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)

    def __setattr__(self, name, value):
        raise AttributeError("PointMeasure is immutable")

    def __len__(self):
        return int(self.t.size)

    def __eq__(self, other):
        if not isinstance(other, PointMeasure):
            return NotImplemented
        return np.array_equal(self.t, other.t) and np.array_equal(self.x, other.x)

    def __repr__(self):
        return f"PointMeasure({len(self)} points)"

    @property
    def points(self):
        return list(zip(self.t.tolist(), self.x.tolist()))

    def count_above(self, u: float) -> int:
        return int(np.count_nonzero(self.x > u))

    def to_dict(self) -> dict:
        return {"points": [[a, b] for a, b in self.points]}

    @classmethod
    def from_dict(cls, obj: dict) -> "PointMeasure":
        unknown = set(obj) - {"points"}
        if unknown:
            raise DomainError(f"unknown keys in point measure object: {sorted(unknown)}")
        return cls(obj.get("points", []))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PointMeasure":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x"])
        for a, b in self.points:
            w.writerow([repr(a), repr(b)])
        return buf.getvalue()


def _time_grid(n: int) -> np.ndarray:
    # i / n rounded once to the nearest double
    return np.arange(1, n + 1, dtype=np.float64) / n


def build_maxima(sample: SampleSeq, a_n: float) -> StepFunction:
    """Normalized partial maxima path ``t -> max_{i <= floor(nt)} X_i / a_n``.

    The path is 0 before ``1/n`` and jumps at ``i/n`` whenever ``X_i`` sets a
    new running maximum.
    """
    if not a_n > 0:
        raise DomainError("a_n must be positive")
    values = np.asarray(sample.values if isinstance(sample, SampleSeq) else sample, dtype=np.float64)
    if values.size == 0:
        raise DomainError("empty sample")
    y = values / a_n
    run = np.maximum.accumulate(y)
    prev = np.concatenate(([0.0], run[:-1]))
    rec = np.flatnonzero(run > prev)
    t = _time_grid(values.size)
    return StepFunction._from_arrays(0.0, t[rec], run[rec], nondecreasing=True)


def truncate_maxima(m: StepFunction, u: float) -> StepFunction:
    """Keep only levels above ``u``: ``m(t)`` if ``m(t) > u`` else 0."""
    if not m.is_nondecreasing():
        raise DomainError("truncate_maxima expects a nondecreasing path")
    if m.initial > u:
        return m
    keep = m.values > u
    return StepFunction._from_arrays(0.0, m.times[keep], m.values[keep], nondecreasing=True)


def build_point_process(sample: SampleSeq, a_n: float) -> PointMeasure:
    """Time-space points ``(i/n, X_i / a_n)``; zero values are not in (0, inf] and are dropped."""
    if not a_n > 0:
        raise DomainError("a_n must be positive")
    values = np.asarray(sample.values if isinstance(sample, SampleSeq) else sample, dtype=np.float64)
    t = _time_grid(values.size)
    x = values / a_n
    keep = x > 0  # filter after scaling: subnormal values can underflow to 0
    return PointMeasure(t=t[keep], x=x[keep])


def restrict(pm: PointMeasure, u: float) -> PointMeasure:
    """Restriction to ``[0, 1] x (u, inf]``."""
    if not u > 0:
        raise DomainError("u must be positive")
    keep = pm.x > u
    return PointMeasure(t=pm.t[keep], x=pm.x[keep])


def in_lambda(pm: PointMeasure, u: float, v: float) -> bool:
    """Membership in the continuity set of the maximum functional.

    False if a point above ``u`` sits at time 0 or 1, if a mark equals ``u``
    or ``inf``, or if two points above ``v`` share a time.
    """
    if not 0 < v < u:
        raise DomainError("in_lambda needs 0 < v < u")
    above_u = pm.x > u
    at_edge = (pm.t == 0.0) | (pm.t == 1.0)
    if np.any(above_u & at_edge):
        return False
    if np.any(pm.x == u) or np.any(np.isinf(pm.x)):
        return False
    tv = pm.t[pm.x > v]
    if tv.size > 1 and np.any(np.diff(tv) == 0):
        return False
    return True


def max_functional(pm: PointMeasure, u: float) -> StepFunction:
    """Running maximum of marks in ``(u, inf)`` over time, 0 where there are none.

    Points at equal times collapse into the largest of them.
    """
    keep = (pm.x > u) & np.isfinite(pm.x)
    t, x = pm.t[keep], pm.x[keep]
    initial = float(x[t == 0.0].max()) if np.any(t == 0.0) else 0.0
    pos = t > 0.0
    t, x = t[pos], x[pos]
    if t.size == 0:
        return StepFunction.constant(initial)
    run = np.maximum(np.maximum.accumulate(x), initial)
    # last point of each time stamp carries the running max at that time
    last = np.concatenate((t[1:] != t[:-1], [True]))
    t, run = t[last], run[last]
    prev = np.concatenate(([initial], run[:-1]))
    rec = run > prev
    return StepFunction._from_arrays(initial, t[rec], run[rec], nondecreasing=True)
