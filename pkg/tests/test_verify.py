import math
import json
import numpy as np
import pytest
from scipy import stats

from maxlim import verify as ver
from maxlim.errors import ConfigurationError, DomainError
from maxlim.models import IID, Frechet, Independent, MovingMaxima, Pareto, derive_seed

FR1 = IID(Frechet(1.0))
CONT = lambda x: stats.norm.cdf(x)


class TestKS:
    def test_empty(self):
        with pytest.raises(DomainError):
            ver.ks_stat([], CONT)

    def test_identical_samples(self):
        x = 0.3
        assert ver.ks_stat([x] * 50, CONT) == pytest.approx(max(CONT(x), 1 - CONT(x)))

    def test_quantile_construction(self):
        m = 400
        q = stats.norm.ppf((np.arange(1, m + 1) - 0.5) / m)
        assert ver.ks_stat(q, CONT) <= 0.5 / m + 1e-12

    def test_matches_scipy_for_continuous(self):
        x = np.random.default_rng(1).normal(size=333)
        assert ver.ks_stat(x, CONT) == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-12)

    def test_kolmogorov_level(self):
        ok = 0
        for i in range(100):
            u = np.random.default_rng(derive_seed(3, i)).random(10 ** 4)
            ok += ver.ks_stat(stats.norm.ppf(u), CONT) <= 1.63 / 100
        assert ok >= 97

    def test_atoms(self):
        # a sample equal to a discrete law scores 0 at every atom
        cdf = lambda x: np.where(x < 1, 0.0, np.where(x < 2, 0.5, 1.0))
        assert ver.ks_stat([1, 2], cdf) == 0.0
        assert ver.ks_stat([1, 1], cdf) == pytest.approx(0.5)

    def test_scalar_only_cdf(self):
        # a cdf that only accepts scalars falls back to pointwise evaluation
        step = lambda v: 0.0 if v < 0.5 else 1.0
        assert ver.ks_stat([0.0, 1.0], step) == pytest.approx(0.5)


def test_poisson_tv():
    rng = np.random.default_rng(4)
    assert ver.poisson_tv(rng.poisson(1.0, 10 ** 5), 1.0) < 0.01
    assert ver.poisson_tv(np.full(10, 40), 1.0) == pytest.approx(1 - stats.poisson.sf(19, 1.0), abs=1e-12)


def test_report_roundtrip_and_csv():
    r = ver.VerificationReport("x", 0.2, 0.1, 10, 5, 3, {"a": np.float64(1.5)})
    assert not r.passed
    assert json.loads(r.to_json())["details"]["a"] == 1.5
    assert ver.reports_to_csv([r]).splitlines() == ["name,statistic,threshold,passed,seed", "x,0.2,0.1,False,3"]


def test_defaults_override(tmp_path, monkeypatch):
    table = ver.load_defaults()
    table["endpoint_ks"]["iid"] = 1e-9
    p = tmp_path / "d.json"
    p.write_text(json.dumps(table))
    monkeypatch.setenv("MAXLIM_DEFAULTS", str(p))
    r = ver.verify_endpoint_limit(FR1, 100, 50, 1)
    assert r.threshold == 1e-9 and not r.passed


def test_endpoint_reproducible_and_worker_independent():
    a = ver.verify_endpoint_limit(FR1, 500, 60, 9, workers=1)
    b = ver.verify_endpoint_limit(FR1, 500, 60, 9, workers=3)
    assert a.to_json() == b.to_json()


def test_unknown_theta():
    with pytest.raises(ConfigurationError):
        ver.verify_endpoint_limit(MovingMaxima(2, Pareto(1.0)), 100, 10, 1)
    with pytest.raises(ConfigurationError):
        ver.verify_fdd(MovingMaxima(2, Frechet(1.0)), [1.0], [1.0], 100, 10, 1)


def test_fdd_single_time_matches_endpoint_law():
    r = ver.verify_fdd(FR1, [1.0], [[0.5], [1.0], [3.0]], 2000, 1000, 5)
    np.testing.assert_allclose(r.details["limit"], np.exp(-1 / np.array([0.5, 1.0, 3.0])))
    assert r.passed


def test_fdd_infinite_levels():
    r = ver.verify_fdd(FR1, [0.5, 1.0], [[1e9, 1e9]], 1000, 200, 6)
    assert r.details["empirical"][0] == 1.0


def test_tightness_monotone_and_moving_maxima():
    for spec in (FR1, MovingMaxima(2, Frechet(1.0))):
        r = ver.verify_tightness(spec, 5000, 1000, [0.01, 0.05, 0.1, 0.3], 1.0, 0.5, 7)
        assert r.passed
        p = r.details["prob"]
        assert all(b >= a for a, b in zip(p, p[1:]))


def test_tightness_needs_eps_above_u():
    with pytest.raises(DomainError):
        ver.verify_tightness(FR1, 100, 10, [0.1], 0.5, 0.5, 1)


def test_truncation_gap_small_u_is_zero():
    r = ver.verify_truncation_gap(MovingMaxima(2, Frechet(1.0)), 3000, 400, [0.05, 0.1, 0.2, 0.5, 1.0], 0.2, 8)
    assert r.passed
    prob = dict(zip(r.details["u_grid"], r.details["prob_gap_above_eps"]))
    assert prob[0.05] == prob[0.1] == prob[0.2] == 0.0


def test_exceedance_counts_mean():
    r = ver.verify_exceedance_counts(FR1, 2.0, 5000, 1000, 10)
    assert r.details["mean_count"] == pytest.approx(0.5, abs=0.07)
    assert r.passed


def test_theta_gap_pair():
    mm = MovingMaxima(2, Frechet(1.0))
    dep = ver.verify_endpoint_limit(mm, 5000, 1000, 11)
    ind = ver.verify_endpoint_limit(Independent(mm), 5000, 1000, 12)
    assert dep.passed and ind.passed
    assert dep.details["theta"] == 0.5 and ind.details["theta"] == 1.0


def test_wrong_theta_is_detected():
    mm = MovingMaxima(2, Frechet(1.0))
    a_n = ver.theoretical_an(mm, 5000)
    ends = np.array(ver.replicate(ver._endpoint_task, mm, 5000, 1000, 11, a_n))
    assert ver.ks_stat(ends, lambda x: np.exp(-np.power(x, -1.0))) > 0.1


def test_extremal_tightness_small():
    r = ver.verify_extremal_tightness(1.0, 1.0, [0.05, 0.1], 20000, 3)
    d = r.details
    assert max(p / b for p, b in zip(d["prob"], d["bound_with_slack"])) <= 1.0
    se = [math.sqrt(q * (1 - q) / d["pairs"]) for q in d["pair_exact"]]
    assert all(abs(e - q) <= 4 * s for e, q, s in zip(d["pair_empirical"], d["pair_exact"], se))


def test_calibrate_envelope():
    cal = ver.calibrate_endpoint(FR1, 500, 100, [1, 2, 3])
    assert cal["envelope"] >= 0.05
    assert len(cal["statistics"]) == 3
