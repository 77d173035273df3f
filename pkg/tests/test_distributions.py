import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from agentjit.distributions import (
    ElementStats, Empirical, Fixed, Gamma, LatencyDistribution, LogNormal, Weibull,
    cache_from_json, cache_to_json, dump_cache, fit, fit_gamma, fit_lognormal, fit_weibull,
    load_cache,
)
from agentjit.errors import NegativeObservation

FAMILIES = [Weibull(3.6, 10.25), Gamma(1.31, 18.95), LogNormal(2.0, 0.5), Fixed(9.0),
            Empirical((1.0, 2.5, 2.5, 7.0))]


def _scipy(d):
    if isinstance(d, Weibull):
        return stats.weibull_min(d.shape, scale=d.scale)
    if isinstance(d, Gamma):
        return stats.gamma(d.shape, scale=d.scale)
    if isinstance(d, LogNormal):
        return stats.lognorm(d.sigma, scale=math.exp(d.mu))
    raise TypeError(d)


def test_fixed_always_same():
    rng = np.random.default_rng(0)
    d = Fixed(9.0)
    assert d.sample(rng) == 9.0
    assert np.all(d.sample(rng, 100) == 9.0)
    assert d.std() == 0.0


def test_gamma_mean_of_draws():
    x = Gamma(1.31, 18.95).sample(np.random.default_rng(1), 10**6)
    assert abs(x.mean() - 24.8245) < 0.3


@pytest.mark.parametrize("d", FAMILIES, ids=lambda d: d.family)
def test_sample_mean_within_three_se(d):
    x = d.sample(np.random.default_rng(2), 10**6)
    se = max(d.std() / math.sqrt(x.size), 1e-12)
    assert abs(x.mean() - d.mean()) <= 3 * se + 1e-12


@pytest.mark.parametrize("d", FAMILIES[:3], ids=lambda d: d.family)
def test_moments_match_scipy(d):
    ref = _scipy(d)
    assert d.mean() == pytest.approx(ref.mean(), rel=1e-12)
    assert d.std() == pytest.approx(ref.std(), rel=1e-10)


@pytest.mark.parametrize("d", FAMILIES[:3], ids=lambda d: d.family)
def test_cdf_and_logpdf_match_scipy(d):
    t = np.linspace(0.01, 80, 200)
    np.testing.assert_allclose(d.cdf(t), _scipy(d).cdf(t), rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(d.logpdf(t), _scipy(d).logpdf(t), rtol=1e-10)


def test_weibull_cdf_at_scale():
    assert Weibull(3.6, 10.25).cdf(10.25) == pytest.approx(1 - math.exp(-1), abs=1e-12)


@pytest.mark.parametrize("d", FAMILIES[:3], ids=lambda d: d.family)
def test_continuous_cdf_zero_at_origin(d):
    assert d.cdf(0.0) == 0.0


def test_fixed_and_empirical_cdf_steps():
    assert Fixed(9.0).cdf(10) == 1.0 and Fixed(9.0).cdf(8.99) == 0.0
    e = Empirical((1.0, 2.5, 2.5, 7.0))
    assert [e.cdf(t) for t in (0.5, 1.0, 2.5, 6.9, 7.0)] == [0, 0.25, 0.75, 0.75, 1.0]


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["weibull", "gamma", "lognormal"]), st.floats(0.2, 15),
       st.floats(0.1, 60), st.lists(st.floats(0, 500), min_size=2, max_size=30))
def test_cdf_monotone_bounded(family, a, b, ts):
    d = {"weibull": Weibull(a, b), "gamma": Gamma(a, b),
         "lognormal": LogNormal(math.log(b), a / 5)}[family]
    ts = np.sort(np.asarray(ts))
    c = d.cdf(ts)
    assert np.all((c >= 0) & (c <= 1))
    assert np.all(np.diff(c) >= 0)


@pytest.mark.parametrize("mean, std", [(9.32, 2.37), (24.8, 21.7), (5.0, 0.5)])
def test_from_moments(mean, std):
    for cls in (Weibull, Gamma, LogNormal):
        d = cls.from_moments(mean, std)
        assert d.mean() == pytest.approx(mean, rel=1e-8)
        assert d.std() == pytest.approx(std, rel=1e-8)


def test_json_round_trip():
    for d in FAMILIES:
        assert LatencyDistribution.from_json(json.loads(json.dumps(d.to_json()))) == d


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        LatencyDistribution.from_json({"family": "cauchy"})


def test_invalid_parameters():
    for bad in (lambda: Weibull(0, 1), lambda: Gamma(1, -1), lambda: LogNormal(0, 0),
                lambda: Fixed(-1), lambda: Empirical(())):
        with pytest.raises(ValueError):
            bad()


# -- fitting --------------------------------------------------------------------

def test_fit_degenerate_cases():
    assert fit([9.0, 9.0, 9.0]) == Fixed(9.0)
    assert fit([5.1]) == Fixed(5.1)
    assert isinstance(fit([1.0, 2.0, 3.0]), Empirical)
    assert isinstance(fit([0.0] + [1.0] * 3 + [2.0] * 10), Empirical)


def test_fit_errors():
    with pytest.raises(ValueError):
        fit([])
    with pytest.raises(NegativeObservation):
        fit([1.0, -0.5])


def test_gamma_recovery():
    x = Gamma(1.31, 18.95).sample(np.random.default_rng(3), 5000)
    d = fit(x)
    assert isinstance(d, Gamma)
    assert 1.18 <= d.shape <= 1.45 and 17.0 <= d.scale <= 21.0


@pytest.mark.parametrize("seed", range(3))
def test_mle_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    x = Weibull(3.6, 10.25).sample(rng, 400)
    k, _, lam = stats.weibull_min.fit(x, floc=0)
    w = fit_weibull(x)
    assert w.shape == pytest.approx(k, rel=1e-4) and w.scale == pytest.approx(lam, rel=1e-4)
    y = Gamma(1.31, 18.95).sample(rng, 400)
    a, _, th = stats.gamma.fit(y, floc=0)
    g = fit_gamma(y)
    assert g.shape == pytest.approx(a, rel=1e-4) and g.scale == pytest.approx(th, rel=1e-4)
    s, _, sc = stats.lognorm.fit(y, floc=0)
    ln = fit_lognormal(y)
    assert ln.sigma == pytest.approx(s, rel=1e-4) and ln.mu == pytest.approx(math.log(sc),
                                                                             rel=1e-4)


@pytest.mark.parametrize("true", [Weibull(3.6, 10.25), Gamma(1.31, 18.95),
                                  LogNormal(2.0, 0.8)], ids=lambda d: d.family)
def test_fit_selects_generating_family(true):
    x = true.sample(np.random.default_rng(4), 5000)
    assert fit(x).family == true.family


# -- cache documents ------------------------------------------------------------

def test_cache_round_trip(tmp_path):
    cache = {"b": ElementStats("b", Gamma(1.31, 18.95), 20, "store"),
             "a": ElementStats("a", Fixed(9.0), 1)}
    doc = cache_to_json(cache)
    assert list(doc["elements"]) == ["a", "b"]
    assert doc["elements"]["b"]["mean_s"] == pytest.approx(24.8245)
    assert cache_from_json(doc) == cache
    dump_cache(cache, tmp_path / "c.json")
    assert load_cache(tmp_path / "c.json") == cache


def test_bare_element_map_accepted():
    doc = {"x": {"family": "weibull", "params": {"shape": 3.6, "scale": 10.25}}}
    assert cache_from_json(doc)["x"].distribution == Weibull(3.6, 10.25)
