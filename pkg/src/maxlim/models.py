"""Stationary nonnegative sequences with regularly varying marginals.

Three generators are provided: i.i.d. draws, moving maxima of finite order
and a stochastic volatility product ``X_n = sigma_n Z_n`` with Gaussian AR(p)
log-volatility.  ``Independent`` wraps any of them into its associated
i.i.d. sequence (same marginal, no dependence).
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import optimize, special

from maxlim import kernels
from maxlim.errors import ConfigurationError, DomainError, UnsupportedModelError

# ---------------------------------------------------------------------------
# tail laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pareto:
    """Survival ``(x / x_min)^(-alpha)`` for ``x >= x_min``."""

    alpha: float
    x_min: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.x_min > 0):
            raise ConfigurationError("Pareto needs alpha > 0 and x_min > 0")

    def survival(self, x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore", over="ignore"):
            s = np.where(x <= self.x_min, 1.0, (x / self.x_min) ** (-self.alpha))
        return float(s) if s.ndim == 0 else s

    def cdf(self, x):
        return 1.0 - self.survival(x)

    def quantile(self, p):
        p = np.asarray(p, dtype=np.float64)
        q = self.x_min * (1.0 - p) ** (-1.0 / self.alpha)
        return float(q) if q.ndim == 0 else q

    def rvs(self, rng: np.random.Generator, size) -> np.ndarray:
        # 1 - U lies in (0, 1], so draws are finite and >= x_min
        return self.x_min * (1.0 - rng.random(size)) ** (-1.0 / self.alpha)

    def to_dict(self):
        return {"kind": "pareto", "alpha": self.alpha, "x_min": self.x_min}


@dataclass(frozen=True)
class Frechet:
    """Distribution function ``exp(-x^(-alpha))`` on ``x > 0``."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError("Frechet needs alpha > 0")

    def survival(self, x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore", over="ignore"):
            s = np.where(x <= 0, 1.0, -np.expm1(-(x ** (-self.alpha))))
        return float(s) if s.ndim == 0 else s

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore", over="ignore"):
            c = np.where(x <= 0, 0.0, np.exp(-(x ** (-self.alpha))))
        return float(c) if c.ndim == 0 else c

    def quantile(self, p):
        p = np.asarray(p, dtype=np.float64)
        with np.errstate(divide="ignore"):
            q = (-np.log(p)) ** (-1.0 / self.alpha)
        return float(q) if q.ndim == 0 else q

    def rvs(self, rng: np.random.Generator, size) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return (-np.log(rng.random(size))) ** (-1.0 / self.alpha)

    def to_dict(self):
        return {"kind": "frechet", "alpha": self.alpha}


TailLaw = Union[Pareto, Frechet]


def survival(law: TailLaw, x):
    """Exact survival probability ``P(X > x)``."""
    return law.survival(x)


def law_from_dict(obj: dict) -> TailLaw:
    obj = dict(obj)
    kind = obj.pop("kind", None)
    allowed = {"pareto": {"alpha", "x_min"}, "frechet": {"alpha"}}
    if kind not in allowed:
        raise ConfigurationError(f"unknown tail law kind {kind!r}")
    extra = set(obj) - allowed[kind]
    if extra:
        raise ConfigurationError(f"unknown keys for {kind} law: {sorted(extra)}")
    try:
        return Pareto(**obj) if kind == "pareto" else Frechet(**obj)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


# ---------------------------------------------------------------------------
# model specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IID:
    law: TailLaw

    @property
    def alpha(self) -> float:
        return self.law.alpha

    def to_dict(self):
        return {"kind": "iid", "law": self.law.to_dict()}


@dataclass(frozen=True)
class MovingMaxima:
    """``X_n = max(xi_n, ..., xi_{n-m+1})`` with i.i.d. ``xi`` from ``base``."""

    order: int
    base: TailLaw

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ConfigurationError("moving maxima order must be a positive integer")

    @property
    def alpha(self) -> float:
        return self.base.alpha

    def to_dict(self):
        return {"kind": "moving_maxima", "order": int(self.order), "base": self.base.to_dict()}


@dataclass(frozen=True)
class StochVol:
    """``X_n = exp(h_n) Z_n`` with ``h`` a zero-mean Gaussian AR(p).

    ``h_n = sum_j ar_coeffs[j] h_{n-1-j} + innovation_sd * eps_n``.
    """

    noise: TailLaw
    ar_coeffs: tuple = (0.0,)
    innovation_sd: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "ar_coeffs", tuple(float(c) for c in self.ar_coeffs))
        if not self.ar_coeffs:
            raise ConfigurationError("ar_coeffs must hold at least one coefficient")
        if not self.innovation_sd >= 0:
            raise ConfigurationError("innovation_sd must be nonnegative")
        if not ar_is_stationary(self.ar_coeffs):
            raise ConfigurationError(f"AR coefficients {self.ar_coeffs} are not stationary")

    @property
    def alpha(self) -> float:
        # Breiman: sigma has all moments, so the product keeps the noise index
        return self.noise.alpha

    @property
    def degenerate(self) -> bool:
        return self.innovation_sd == 0

    def log_vol_autocov(self) -> np.ndarray:
        return ar_autocovariance(self.ar_coeffs, self.innovation_sd)

    def to_dict(self):
        return {
            "kind": "stoch_vol",
            "noise": self.noise.to_dict(),
            "ar_coeffs": list(self.ar_coeffs),
            "innovation_sd": self.innovation_sd,
        }


@dataclass(frozen=True)
class Independent:
    """Associated independent sequence: i.i.d. with the marginal of ``of``."""

    of: "ModelSpec"

    @property
    def alpha(self) -> float:
        return self.of.alpha

    def to_dict(self):
        return {"kind": "independent", "of": self.of.to_dict()}


ModelSpec = Union[IID, MovingMaxima, StochVol, Independent]


def model_from_dict(obj: dict) -> ModelSpec:
    """Parse a model block such as ``{"kind": "iid", "law": {...}}``."""
    obj = dict(obj)
    kind = obj.pop("kind", None)
    allowed = {
        "iid": {"law"},
        "moving_maxima": {"order", "base"},
        "stoch_vol": {"noise", "ar_coeffs", "innovation_sd"},
        "independent": {"of"},
    }
    if kind not in allowed:
        raise ConfigurationError(f"unknown model kind {kind!r}")
    extra = set(obj) - allowed[kind]
    if extra:
        raise ConfigurationError(f"unknown keys for {kind} model: {sorted(extra)}")
    try:
        if kind == "iid":
            return IID(law_from_dict(obj["law"]))
        if kind == "moving_maxima":
            return MovingMaxima(int(obj["order"]), law_from_dict(obj["base"]))
        if kind == "stoch_vol":
            return StochVol(
                law_from_dict(obj["noise"]),
                tuple(obj.get("ar_coeffs", (0.0,))),
                float(obj.get("innovation_sd", 1.0)),
            )
        return Independent(model_from_dict(obj["of"]))
    except KeyError as exc:
        raise ConfigurationError(f"missing key {exc} in {kind} model") from None


# ---------------------------------------------------------------------------
# Gaussian AR(p) helpers
# ---------------------------------------------------------------------------


def ar_is_stationary(coeffs) -> bool:
    """All roots of the companion matrix strictly inside the unit disc."""
    phi = np.asarray(coeffs, dtype=np.float64)
    p = phi.size
    comp = np.zeros((p, p))
    comp[0] = phi
    if p > 1:
        comp[1:, :-1] = np.eye(p - 1)
    return bool(np.all(np.abs(np.linalg.eigvals(comp)) < 1.0))


def ar_autocovariance(coeffs, sd: float) -> np.ndarray:
    """Autocovariances ``gamma_0..gamma_p`` from the Yule-Walker equations."""
    phi = np.asarray(coeffs, dtype=np.float64)
    p = phi.size
    A = np.eye(p + 1)
    for k in range(p + 1):
        for j in range(1, p + 1):
            A[k, abs(k - j)] -= phi[j - 1]
    rhs = np.zeros(p + 1)
    rhs[0] = sd * sd
    return np.linalg.solve(A, rhs)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

_SEED_MASK = (1 << 64) - 1


def derive_seed(master: int, index: int) -> int:
    """Deterministic 64-bit seed for replication ``index`` of a run."""
    ss = np.random.SeedSequence([int(master) & _SEED_MASK, int(index)])
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & _SEED_MASK)


@dataclass
class SampleSeq:
    values: np.ndarray
    model: Optional[ModelSpec] = None
    seed: Optional[int] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size < 1:
            raise DomainError("a sample needs at least one value")
        if np.any(self.values < 0) or np.any(np.isnan(self.values)):
            raise DomainError("sample values must be nonnegative")

    def __len__(self):
        return self.values.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        model = json.dumps(self.model.to_dict(), sort_keys=True) if self.model is not None else "null"
        buf.write(f"# model: {model}\n# seed: {self.seed}\nvalue\n")
        for v in self.values.tolist():
            buf.write(repr(v) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SampleSeq":
        model, seed, vals = None, None, []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("# model:"):
                raw = json.loads(line[len("# model:"):])
                model = model_from_dict(raw) if raw else None
            elif line.startswith("# seed:"):
                raw = line[len("# seed:"):].strip()
                seed = None if raw == "None" else int(raw)
            elif line.startswith("#") or line == "value":
                continue
            else:
                vals.append(float(line))
        return cls(np.array(vals), model, seed)


def _draw_marginal(spec: ModelSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` independent draws from the stationary marginal of ``spec``."""
    if isinstance(spec, IID):
        return spec.law.rvs(rng, n)
    if isinstance(spec, MovingMaxima):
        return spec.base.rvs(rng, (n, spec.order)).max(axis=1)
    if isinstance(spec, StochVol):
        sd0 = math.sqrt(spec.log_vol_autocov()[0])
        h = sd0 * rng.standard_normal(n)
        return np.exp(h) * spec.noise.rvs(rng, n)
    if isinstance(spec, Independent):
        return _draw_marginal(spec.of, rng, n)
    raise UnsupportedModelError(f"cannot sample {type(spec).__name__}")


def _draw_log_vol(spec: StochVol, rng: np.random.Generator, n: int) -> np.ndarray:
    p = len(spec.ar_coeffs)
    if spec.degenerate:
        return np.zeros(n)
    gamma = spec.log_vol_autocov()
    cov = gamma[np.abs(np.subtract.outer(np.arange(p), np.arange(p)))]
    # exact stationary start: (h_1..h_p) from its joint Gaussian law
    h_init = np.linalg.cholesky(cov) @ rng.standard_normal(p)
    innov = spec.innovation_sd * rng.standard_normal(n)
    return kernels.ar_filter(np.array(spec.ar_coeffs), h_init, innov)[:n]


def sample(spec: ModelSpec, n: int, seed: int) -> SampleSeq:
    """``n`` consecutive values of the stationary sequence, reproducible from ``seed``.

    Moving maxima draw ``n + m - 1`` base variates so ``X_1`` already has the
    stationary law; stochastic volatility starts ``h`` from its exact
    stationary distribution, so there is no burn-in transient.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be at least 1")
    rng = rng_for(seed)
    if isinstance(spec, IID):
        values = spec.law.rvs(rng, n)
    elif isinstance(spec, MovingMaxima):
        m = spec.order
        xi = spec.base.rvs(rng, n + m - 1)
        values = np.lib.stride_tricks.sliding_window_view(xi, m).max(axis=1)
    elif isinstance(spec, StochVol):
        h = _draw_log_vol(spec, rng, n)
        values = np.exp(h) * spec.noise.rvs(rng, n)
    elif isinstance(spec, Independent):
        values = _draw_marginal(spec.of, rng, n)
    else:
        raise UnsupportedModelError(f"cannot sample {type(spec).__name__}")
    return SampleSeq(values, spec, int(seed))


# ---------------------------------------------------------------------------
# marginal tails, normalizing constants and extremal indices
# ---------------------------------------------------------------------------

_HERMITE_NODES, _HERMITE_WEIGHTS = np.polynomial.hermite_e.hermegauss(160)
_HERMITE_WEIGHTS = _HERMITE_WEIGHTS / math.sqrt(2.0 * math.pi)


def _stochvol_survival(spec: StochVol, x: float) -> float:
    s = math.sqrt(spec.log_vol_autocov()[0]) if not spec.degenerate else 0.0
    law = spec.noise
    if s == 0.0:
        return float(law.survival(x))
    a = law.alpha
    if isinstance(law, Pareto):
        # E[min(1, (sigma/y)^a)] with log sigma ~ N(0, s^2), y = x / x_min
        L = math.log(x / law.x_min)
        upper = special.ndtr(-L / s)
        lower = math.exp(a * a * s * s / 2.0 - a * L) * special.ndtr((L - a * s * s) / s)
        return float(upper + lower)
    sigma_a = np.exp(a * s * _HERMITE_NODES)
    return float(np.dot(_HERMITE_WEIGHTS, -np.expm1(-sigma_a * x ** (-a))))


def marginal_survival(spec: Union[ModelSpec, TailLaw], x: float) -> float:
    """``P(X_1 > x)`` for the stationary marginal."""
    if isinstance(spec, (Pareto, Frechet)):
        return float(spec.survival(x))
    if isinstance(spec, IID):
        return float(spec.law.survival(x))
    if isinstance(spec, MovingMaxima):
        sb = float(spec.base.survival(x))
        return float(-np.expm1(spec.order * np.log1p(-sb))) if sb < 1 else 1.0
    if isinstance(spec, StochVol):
        return _stochvol_survival(spec, x)
    if isinstance(spec, Independent):
        return marginal_survival(spec.of, x)
    raise UnsupportedModelError(f"no marginal survival for {type(spec).__name__}")


def _law_an(law: TailLaw, log_cdf: float) -> float:
    """Level whose law CDF equals ``exp(log_cdf)``."""
    if isinstance(law, Pareto):
        return law.x_min * (-math.expm1(log_cdf)) ** (-1.0 / law.alpha)
    return (-log_cdf) ** (-1.0 / law.alpha)


def theoretical_an(spec: Union[ModelSpec, TailLaw], n: int) -> float:
    """Solution ``a_n`` of ``n P(X_1 > a_n) = 1``.

    Closed forms for i.i.d. and moving-maxima marginals; root finding to
    relative tolerance 1e-12 for stochastic volatility.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be at least 1")
    if isinstance(spec, Independent):
        return theoretical_an(spec.of, n)
    if isinstance(spec, IID):
        spec = spec.law
    log_cdf = math.log1p(-1.0 / n) if n > 1 else -math.inf
    if isinstance(spec, (Pareto, Frechet)):
        a = _law_an(spec, log_cdf)
    elif isinstance(spec, MovingMaxima):
        a = _law_an(spec.base, log_cdf / spec.order)
    elif isinstance(spec, StochVol):
        if spec.degenerate:
            return theoretical_an(spec.noise, n)
        if n == 1:
            raise DomainError("a_1 is not positive for this model")
        target = 1.0 / n
        lo, hi = 1.0, 1.0
        while marginal_survival(spec, hi) > target:
            hi *= 2.0
        while marginal_survival(spec, lo) <= target:
            lo /= 2.0
        g = lambda y: math.log(marginal_survival(spec, math.exp(y))) - math.log(target)
        y = optimize.brentq(g, math.log(lo), math.log(hi), xtol=1e-15, rtol=1e-14)
        a = math.exp(y)
    else:
        raise UnsupportedModelError(f"no closed-form marginal for {type(spec).__name__}; use empirical_an")
    if not (a > 0 and math.isfinite(a)):
        raise DomainError(f"a_n is not a positive finite level for n={n}")
    return float(a)


def theoretical_theta(spec: ModelSpec) -> Optional[float]:
    """Known extremal index, or ``None`` when it is not established."""
    if isinstance(spec, (IID, Independent, StochVol)):
        return 1.0
    if isinstance(spec, MovingMaxima):
        if spec.order == 1:
            return 1.0
        if isinstance(spec.base, Frechet):
            return 1.0 / spec.order
        return None
    return None
