"""Cadlag step functions on [0, 1] and Skorohod distances between them.

A :class:`StepFunction` is stored by levels: an initial value and a list of
``(time, post-jump value)`` pairs with strictly increasing times in (0, 1].
"""
from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, Sequence

import numpy as np

from maxlim import kernels
from maxlim.errors import DomainError


class StepFunction:
    """Right-continuous piecewise-constant path on [0, 1].

    Parameters
    ----------
    initial : float
        Value on ``[0, t_1)``.
    jumps : sequence of (t, v)
        Jump times in (0, 1], strictly increasing, each with the level the
        path takes from that time on.
    nondecreasing : bool
        When true, the constructor checks ``initial <= v_1 <= v_2 <= ...``.

    Instances are immutable; ``times`` and ``values`` are read-only arrays.
    """

    __slots__ = ("initial", "times", "values", "nondecreasing", "perturbed")

    def __init__(self, initial: float, jumps: Iterable[Sequence[float]] = (), nondecreasing: bool = False):
        pairs = [(float(t), float(v)) for t, v in jumps]
        times = np.array([p[0] for p in pairs], dtype=np.float64)
        values = np.array([p[1] for p in pairs], dtype=np.float64)
        initial = float(initial)
        if initial < 0 or np.any(values < 0) or math.isnan(initial) or np.any(np.isnan(values)):
            raise DomainError("step function levels must be nonnegative")
        if times.size:
            if times[0] <= 0.0 or times[-1] > 1.0:
                raise DomainError("jump times must lie in (0, 1]")
            if np.any(np.diff(times) <= 0):
                raise DomainError("jump times must be strictly increasing")
        if nondecreasing:
            lv = np.concatenate(([initial], values))
            if np.any(np.diff(lv) < 0):
                raise DomainError("levels are not nondecreasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "nondecreasing", bool(nondecreasing))
        object.__setattr__(self, "perturbed", False)

    def __setattr__(self, name, value):
        raise AttributeError("StepFunction is immutable")

    @classmethod
    def _from_arrays(cls, initial, times, values, nondecreasing=False):
        return cls(initial, zip(times.tolist(), values.tolist()), nondecreasing=nondecreasing)

    @classmethod
    def from_pairs(cls, initial: float, pairs: Iterable[Sequence[float]], nondecreasing: bool = False) -> "StepFunction":
        """Build from possibly colliding jump times.

        Pairs are sorted by time (stable). A time equal to its predecessor is
        moved up by the smallest representable step; ``perturbed`` records it.
        """
        pairs = sorted(((float(t), float(v)) for t, v in pairs), key=lambda p: p[0])
        out, moved = [], False
        for t, v in pairs:
            if out and t <= out[-1][0]:
                t = float(np.nextafter(out[-1][0], np.inf))
                moved = True
            out.append((t, v))
        f = cls(initial, out, nondecreasing=nondecreasing)
        object.__setattr__(f, "perturbed", moved)
        return f

    @classmethod
    def constant(cls, value: float) -> "StepFunction":
        return cls(value, (), nondecreasing=True)

    # -- basic accessors ---------------------------------------------------

    @property
    def n_jumps(self) -> int:
        return int(self.times.size)

    @property
    def levels(self) -> np.ndarray:
        """All levels in order, starting with the initial value."""
        return np.concatenate(([self.initial], self.values))

    def is_nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self.levels) >= 0))

    def __call__(self, t):
        return eval_at(self, t)

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (
            self.initial == other.initial
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.initial, self.times.tobytes(), self.values.tobytes()))

    def __repr__(self):
        jumps = ", ".join(f"({t:.6g}, {v:.6g})" for t, v in zip(self.times, self.values))
        return f"StepFunction(initial={self.initial:.6g}, jumps=[{jumps}])"

    def sup_distance(self, other: "StepFunction") -> float:
        """Uniform distance ``sup_t |f(t) - g(t)|``."""
        knots = np.union1d(np.union1d(self.times, other.times), [0.0])
        return float(np.max(np.abs(eval_at(self, knots) - eval_at(other, knots))))

    def canonical(self) -> "StepFunction":
        """Same path with no-op jumps (level unchanged) removed."""
        lv = self.levels
        keep = lv[1:] != lv[:-1]
        if keep.all():
            return self
        return StepFunction._from_arrays(self.initial, self.times[keep], self.values[keep], self.nondecreasing)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {"initial": self.initial, "jumps": [[t, v] for t, v in zip(self.times.tolist(), self.values.tolist())]}

    @classmethod
    def from_dict(cls, obj: dict) -> "StepFunction":
        unknown = set(obj) - {"initial", "jumps"}
        if unknown:
            raise DomainError(f"unknown keys in step function object: {sorted(unknown)}")
        return cls(obj["initial"], obj.get("jumps", []))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "StepFunction":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        """Two columns ``t,value`` at 0, every jump time, and 1."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value"])
        w.writerow([repr(0.0), repr(self.initial)])
        for t, v in zip(self.times.tolist(), self.values.tolist()):
            w.writerow([repr(t), repr(v)])
        if not self.times.size or self.times[-1] < 1.0:
            w.writerow([repr(1.0), repr(endpoint(self))])
        return buf.getvalue()


def eval_at(f: StepFunction, t):
    """Value of ``f`` at ``t`` (scalar or array) by right-continuity."""
    arr = np.asarray(t, dtype=np.float64)
    if np.any((arr < 0.0) | (arr > 1.0)) or np.any(np.isnan(arr)):
        raise DomainError("evaluation time outside [0, 1]")
    idx = np.searchsorted(f.times, arr, side="right")
    out = np.where(idx == 0, f.initial, f.values[np.maximum(idx - 1, 0)] if f.times.size else f.initial)
    if out.ndim == 0:
        return float(out)
    return out


def endpoint(f: StepFunction) -> float:
    """Projection onto the right endpoint, ``f(1)``."""
    return float(f.values[-1]) if f.times.size else f.initial


def rho(a: float, b: float) -> float:
    """Metric ``|1/a - 1/b|`` on (0, inf], with ``1/inf = 0``."""
    for x in (a, b):
        if not (x > 0):
            raise DomainError(f"rho is defined on (0, inf]; got {x!r}")
    return abs(1.0 / a - 1.0 / b)


def j1_oscillation(f: StepFunction, delta: float) -> float:
    """J1 oscillation modulus.

    ``sup min(|f(t)-f(t1)|, |f(t2)-f(t)|)`` over ``t1 <= t <= t2`` with
    ``t2 - t1 <= delta``; exact for step functions by enumerating the
    triples of constancy intervals that admit such ``t1, t, t2``.
    """
    if not delta > 0:
        raise DomainError("delta must be positive")
    if f.n_jumps < 2:
        return 0.0
    return kernels.oscillation(f.levels, f.times, delta)


def _ordered(f: StepFunction, g: StepFunction):
    # fixed evaluation order makes d(f, g) and d(g, f) bitwise identical
    kf = (f.n_jumps, f.initial, f.times.tobytes(), f.values.tobytes())
    kg = (g.n_jumps, g.initial, g.times.tobytes(), g.values.tobytes())
    return (f, g) if kf <= kg else (g, f)


def d_j1(f: StepFunction, g: StepFunction) -> float:
    """Skorohod J1 distance between two step functions.

    The time change only matters through where it sends the jumps of ``g``;
    each jump either lands on a jump of ``f`` (cost: time displacement) or
    inside a constancy interval of ``f`` (cost: distance of its time to that
    interval).  A minimax path over the lattice of (jumps of f passed,
    jumps of g passed) then gives the infimum: node costs are the level
    gaps ``|F_i - G_j|`` on the interval where both paths sit.

    The value is the infimum, which may be approached but not attained when
    several jumps of ``g`` are pushed against the same jump of ``f``.
    """
    f, g = _ordered(f.canonical(), g.canonical())
    return kernels.j1_lattice(f.levels, g.levels, f.times, g.times)


# grid for the completed-graph discretization used by d_m1_monotone
M1_RESOLUTION = 1e-3
M1_MAX_POINTS = 4000


def completed_graph(f: StepFunction) -> np.ndarray:
    """Vertices of the completed graph of a nondecreasing step function.

    Rows are ``(t, x)``; horizontal runs alternate with vertical jump segments.
    """
    pts = [(0.0, f.initial)]
    level = f.initial
    for t, v in zip(f.times.tolist(), f.values.tolist()):
        pts.append((t, level))
        pts.append((t, v))
        level = v
    pts.append((1.0, level))
    return np.array(pts)


def _densify(vertices: np.ndarray, h: float) -> np.ndarray:
    out = [vertices[:1]]
    for a, b in zip(vertices[:-1], vertices[1:]):
        length = float(np.max(np.abs(b - a)))
        k = max(1, int(math.ceil(length / h)))
        w = np.arange(1, k + 1)[:, None] / k
        out.append(a + w * (b - a))
    return np.vstack(out)


def m1_grid_step(f: StepFunction, g: StepFunction, resolution: float = M1_RESOLUTION, max_points: int = M1_MAX_POINTS) -> float:
    """Sampling step actually used by :func:`d_m1_monotone` for this pair.

    The returned distance overestimates the exact M1 distance by at most
    this step.
    """
    length = max(1.0 + abs(endpoint(x) - x.initial) for x in (f, g))
    return max(resolution, length / max_points)


def d_m1_monotone(
    f: StepFunction, g: StepFunction, resolution: float = M1_RESOLUTION, max_points: int = M1_MAX_POINTS
) -> float:
    """Skorohod M1 distance between two nondecreasing step functions.

    For monotone paths the M1 distance is the Frechet distance (sup-norm on
    the plane) between completed graphs.  Both graphs are sampled with step
    ``m1_grid_step(f, g, resolution, max_points)`` along their polylines and
    the discrete Frechet distance of the samples is returned; it exceeds the
    continuous value by at most one step.
    """
    if not (f.is_nondecreasing() and g.is_nondecreasing()):
        raise DomainError("d_m1_monotone requires nondecreasing step functions")
    if f == g:
        return 0.0
    f, g = _ordered(f.canonical(), g.canonical())
    h = m1_grid_step(f, g, resolution, max_points)
    P = _densify(completed_graph(f), h)
    Q = _densify(completed_graph(g), h)
    return kernels.frechet_linf(P, Q)
