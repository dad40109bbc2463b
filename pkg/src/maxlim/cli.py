"""Command-line interface: ``python -m maxlim <subcommand> ...``.

Exit status is 0 on success, 1 when a verification check fails and 2 on a
bad configuration or input.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from maxlim import __version__, _accel
from maxlim import estimators as est
from maxlim import verify as ver
from maxlim.cadlag import StepFunction, d_j1, d_m1_monotone, j1_oscillation
from maxlim.errors import ConfigurationError, MaxlimError
from maxlim.maxima import build_maxima, truncate_maxima
from maxlim.models import Independent, SampleSeq, model_from_dict, sample, theoretical_an

# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

CHECKS = {
    "endpoint": {},
    "endpoint_independent": {},
    "fdd": {"times": [0.5, 1.0], "levels_grid": [[2.0, 1.0]]},
    "tightness": {"delta_grid": [0.01, 0.05, 0.1], "eps": 1.0, "u": 0.5},
    "truncation_gap": {"u_grid": [0.1, 0.2, 0.4, 0.8], "eps": 0.2},
    "exceedance_counts": {"u": 1.0},
    "tail_consistency": {"xs": [0.5, 1.0, 2.0, 4.0]},
}
_CONFIG_KEYS = ("model", "n", "reps", "seed", "output_dir", "checks")


@dataclass
class RunConfig:
    model: dict
    n: int = 10_000
    reps: int = 2000
    seed: int = 0
    output_dir: str = "runs/out"
    checks: List[dict] = field(default_factory=list)

    def __post_init__(self):
        self.spec = model_from_dict(self.model)
        self.model = self.spec.to_dict()
        for key in ("n", "reps", "seed"):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigurationError(f"{key} must be an integer")
        if self.n < 1 or self.reps < 1:
            raise ConfigurationError("n and reps must be positive")
        canon = []
        for c in self.checks:
            c = dict(c)
            name = c.pop("name", None)
            if name not in CHECKS:
                raise ConfigurationError(f"unknown check {name!r}; choose from {sorted(CHECKS)}")
            allowed = set(CHECKS[name]) | {"threshold"} if name.startswith("endpoint") else set(CHECKS[name])
            extra = set(c) - allowed
            if extra:
                raise ConfigurationError(f"unknown keys for check {name}: {sorted(extra)}")
            canon.append({"name": name, **CHECKS[name], **c})
        self.checks = canon

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        if not isinstance(obj, dict):
            raise ConfigurationError("configuration must be a JSON object")
        extra = set(obj) - set(_CONFIG_KEYS)
        if extra:
            raise ConfigurationError(f"unknown configuration keys: {sorted(extra)}")
        if "model" not in obj:
            raise ConfigurationError("configuration needs a model block")
        return cls(**obj)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in _CONFIG_KEYS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return RunConfig.from_dict(obj)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _resolve(args) -> RunConfig:
    if not args.config:
        raise ConfigurationError("--config is required for this subcommand")
    cfg = load_config(args.config)
    for key in ("n", "reps", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    if getattr(args, "seed_from_entropy", False):
        cfg.seed = int(np.random.SeedSequence().entropy) & ((1 << 64) - 1)
    if getattr(args, "output", None):
        cfg.output_dir = args.output
    return cfg


def _workers(args) -> int:
    return args.workers if args.workers else (os.cpu_count() or 1)


def _emit(text: str, out_dir: Optional[str], filename: str) -> None:
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, filename), "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _versions() -> dict:
    import scipy

    out = {"maxlim": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}
    try:
        import numba

        out["numba"] = numba.__version__
    except ImportError:
        out["numba"] = None
    out["backend"] = _accel.backend()
    return out


def write_manifest(out_dir: str, cfg: RunConfig, command: str, seeds: dict) -> None:
    manifest = {
        "command": command,
        "versions": _versions(),
        "config_sha256": cfg.digest(),
        "config": cfg.to_dict(),
        "seeds": seeds,
    }
    _emit(json.dumps(manifest, sort_keys=True, indent=2), out_dir, "manifest.json")


def _load_sample(args, cfg: Optional[RunConfig]) -> SampleSeq:
    if getattr(args, "input", None):
        try:
            with open(args.input, encoding="utf-8") as fh:
                return SampleSeq.from_csv(fh.read())
        except OSError as exc:
            raise ConfigurationError(f"cannot read sample {args.input}: {exc}") from None
    if cfg is None:
        raise ConfigurationError("need --input or --config")
    return sample(cfg.spec, cfg.n, cfg.seed)


def _load_path(path: str) -> StepFunction:
    try:
        with open(path, encoding="utf-8") as fh:
            return StepFunction.from_json(fh.read())
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigurationError(f"cannot read step function {path}: {exc}") from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _resolve(args)
    s = sample(cfg.spec, cfg.n, cfg.seed)
    out = args.output
    _emit(s.to_csv(), out, "sample.csv")
    if out:
        write_manifest(out, cfg, "simulate", {"sample": cfg.seed})
    return 0


def cmd_maxima(args) -> int:
    cfg = _resolve(args) if args.config else None
    s = _load_sample(args, cfg)
    if args.an is not None:
        a_n = args.an
    elif args.empirical_an:
        a_n = est.empirical_an(s)
    else:
        spec = s.model if s.model is not None else (cfg.spec if cfg else None)
        if spec is None:
            raise ConfigurationError("no model to compute a_n from; pass --an or --empirical-an")
        a_n = theoretical_an(spec, len(s))
    m = build_maxima(s, a_n)
    paths = {"maxima": m}
    if args.u is not None:
        paths["truncated"] = truncate_maxima(m, args.u)
    for name, f in paths.items():
        if args.format == "csv":
            _emit(f.to_csv(), args.output, f"{name}.csv")
        else:
            _emit(f.to_json(), args.output, f"{name}.json")
    return 0


def cmd_metric(args) -> int:
    if args.j1:
        f, g = (_load_path(p) for p in args.j1)
        value = d_j1(f, g)
    elif args.m1:
        f, g = (_load_path(p) for p in args.m1)
        value = d_m1_monotone(f, g)
    else:
        delta, path = args.osc
        value = j1_oscillation(_load_path(path), float(delta))
    print(repr(float(value)))
    return 0


def _estimate(args, kind: str):
    if kind == "rn":
        mix = est.MixingRate.geometric(args.mixing_ratio) if args.mixing_ratio is not None else est.MixingRate.zero()
        l_fn = (lambda n: args.l) if args.l else est.default_l_of_n
        return {"kind": kind, "n": args.n, "r_n": est.rn_schedule(args.n, mix, l_fn)}
    if kind == "pn":
        mix = est.MixingRate.geometric(args.mixing_ratio) if args.mixing_ratio is not None else est.MixingRate.zero()
        return {"kind": kind, "n": args.n, "p_n": est.pn_schedule(args.n, args.q, mix)}
    cfg = _resolve(args) if args.config else None
    if kind == "laplace-gap":
        if cfg is None:
            raise ConfigurationError("laplace-gap needs --config")
        rn = args.rn or est.rn_schedule(cfg.n, est.MixingRate.geometric(args.mixing_ratio or 0.7))
        fam = est.laplace_gap_family(cfg.spec, cfg.n, rn, reps=cfg.reps, seed=cfg.seed, workers=_workers(args))
        return {name: e.to_dict() for name, e in fam.items()}
    s = _load_sample(args, cfg)
    level = args.u_level
    if level is None and args.quantile is not None:
        level = est.quantile_level(s, args.quantile)
    if kind == "hill":
        return est.hill_alpha(s, args.k).to_dict()
    if kind == "an":
        return {"a_n": est.empirical_an(s)}
    if level is None and kind in ("blocks-theta", "obrien-theta"):
        raise ConfigurationError("give --u-level or --quantile")
    if kind == "blocks-theta":
        return est.blocks_theta(s, args.r, level).to_dict()
    if kind == "obrien-theta":
        return est.obrien_theta(s, args.p, level).to_dict()
    if kind == "tail-process":
        x = args.x if args.x is not None else level
        return est.tail_process_est(s, args.lag, args.ratio, x).to_dict()
    if kind == "anticluster":
        a_n = args.an if args.an is not None else est.empirical_an(s)
        return est.anticluster_stat(s, args.m, args.rn, args.u, a_n).to_dict()
    raise ConfigurationError(f"unknown estimate {kind!r}")


def cmd_estimate(args) -> int:
    result = _estimate(args, args.kind)
    _emit(json.dumps(result, sort_keys=True, default=ver._json_default), args.output, f"estimate_{args.kind}.json")
    return 0


def _run_check(cfg: RunConfig, check: dict, workers: int) -> ver.VerificationReport:
    c = dict(check)
    name = c.pop("name")
    seed = cfg.seed
    spec = cfg.spec
    if name == "endpoint":
        return ver.verify_endpoint_limit(spec, cfg.n, cfg.reps, seed, workers, threshold=c.get("threshold"))
    if name == "endpoint_independent":
        r = ver.verify_endpoint_limit(Independent(spec), cfg.n, cfg.reps, seed, workers, threshold=c.get("threshold"))
        r.name = "endpoint_independent"
        return r
    if name == "fdd":
        return ver.verify_fdd(spec, c["times"], c["levels_grid"], cfg.n, cfg.reps, seed, workers)
    if name == "tightness":
        return ver.verify_tightness(spec, cfg.n, cfg.reps, c["delta_grid"], c["eps"], c["u"], seed, workers)
    if name == "truncation_gap":
        return ver.verify_truncation_gap(spec, cfg.n, cfg.reps, c["u_grid"], c["eps"], seed, workers)
    if name == "exceedance_counts":
        return ver.verify_exceedance_counts(spec, c["u"], cfg.n, cfg.reps, seed, workers)
    return ver.verify_tail_consistency(spec, cfg.n, cfg.reps, seed, c["xs"], workers)


def cmd_verify(args) -> int:
    cfg = _resolve(args)
    checks = cfg.checks or [{"name": "endpoint"}]
    reports = [_run_check(cfg, c, _workers(args)) for c in checks]
    for r in reports:
        sys.stdout.write(r.to_json() + "\n")
        sys.stderr.write(r.summary() + "\n")
    out = cfg.output_dir if args.output or cfg.output_dir else None
    if out:
        _emit("".join(r.to_json() + "\n" for r in reports), out, "reports.jsonl")
        _emit(ver.reports_to_csv(reports), out, "summary.csv")
        write_manifest(out, cfg, "verify", {"master": cfg.seed, "replication_seeds": "derive_seed(master, i)"})
    return 0 if all(r.passed for r in reports) else 1


def cmd_calibrate(args) -> int:
    cfg = _resolve(args)
    seeds = list(range(args.seed_start, args.seed_start + args.count))
    cal = ver.calibrate_endpoint(cfg.spec, cfg.n, cfg.reps, seeds, workers=_workers(args))
    path = args.defaults or ver.defaults_path()
    table = ver.load_defaults(path)
    kind = ver.model_kind(cfg.spec)
    table["endpoint_ks"][kind] = cal["envelope"]
    table.setdefault("calibration", {})[kind] = {"source": "calibrate", "model": cfg.model, **cal}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps({"kind": kind, "envelope": cal["envelope"], "q95": cal["q95"], "defaults": path}))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--seed-from-entropy", action="store_true", help="draw the master seed from OS entropy")
    common.add_argument("--n", type=int)
    common.add_argument("--reps", type=int)
    common.add_argument("--workers", type=int, help="worker processes (default: all cores)")
    common.add_argument("--output", help="output directory (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    p = argparse.ArgumentParser(prog="maxlim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="draw a sample and write it as CSV")

    m = sub.add_parser("maxima", parents=[common], help="partial maxima path and its truncation")
    m.add_argument("--input", help="sample CSV (otherwise simulated from --config)")
    m.add_argument("--u", type=float, help="truncation level")
    m.add_argument("--an", type=float, help="normalizer; default is the model's theoretical a_n")
    m.add_argument("--empirical-an", action="store_true")

    mt = sub.add_parser("metric", parents=[common], help="distances between step-function JSON files")
    g = mt.add_mutually_exclusive_group(required=True)
    g.add_argument("--j1", nargs=2, metavar=("A", "B"))
    g.add_argument("--m1", nargs=2, metavar=("A", "B"))
    g.add_argument("--osc", nargs=2, metavar=("DELTA", "A"))

    e = sub.add_parser("estimate", parents=[common], help="estimators and block schedules")
    e.add_argument(
        "kind",
        choices=("hill", "an", "blocks-theta", "obrien-theta", "tail-process", "anticluster", "laplace-gap", "rn", "pn"),
    )
    e.add_argument("--input")
    e.add_argument("--k", type=int, default=1000)
    e.add_argument("--r", type=int, default=100)
    e.add_argument("--p", type=int, default=20)
    e.add_argument("--q", type=int, default=10)
    e.add_argument("--l", type=int)
    e.add_argument("--u-level", type=float)
    e.add_argument("--quantile", type=float)
    e.add_argument("--lag", type=int, default=1)
    e.add_argument("--ratio", type=float, default=1.0)
    e.add_argument("--x", type=float)
    e.add_argument("--m", type=int, default=1)
    e.add_argument("--rn", type=int)
    e.add_argument("--u", type=float, default=1.0)
    e.add_argument("--an", type=float)
    e.add_argument("--mixing-ratio", type=float, help="geometric mixing rate alpha_l = ratio**l")

    sub.add_parser("verify", parents=[common], help="run the configured checks")

    c = sub.add_parser("calibrate", parents=[common], help="recompute the endpoint KS envelope")
    c.add_argument("--seed-start", type=int, default=1000)
    c.add_argument("--count", type=int, default=20)
    c.add_argument("--defaults", help="defaults table to update (default: MAXLIM_DEFAULTS or the packaged file)")
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "maxima": cmd_maxima,
    "metric": cmd_metric,
    "estimate": cmd_estimate,
    "verify": cmd_verify,
    "calibrate": cmd_calibrate,
}


def run(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (MaxlimError, ValueError, KeyError, TypeError) as exc:
        sys.stderr.write(f"maxlim: error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(run())
