"""Per-element latency distributions and the scheduler cache format.

Sampling takes a caller-owned :class:`numpy.random.Generator`; no module
level random state is used anywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import optimize, special

from .errors import NegativeObservation

MIN_PARAMETRIC_OBS = 8


class LatencyDistribution:
    family = "abstract"

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def cdf(self, t):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def var(self) -> float:
        raise NotImplementedError

    def std(self) -> float:
        return math.sqrt(self.var())

    def params(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> dict:
        return {"family": self.family, "params": self.params()}

    @staticmethod
    def from_json(doc: Mapping) -> "LatencyDistribution":
        family = doc["family"]
        params = doc.get("params", {})
        try:
            cls = FAMILIES[family]
        except KeyError:
            raise ValueError(f"unknown distribution family {family!r}") from None
        if cls is Empirical:
            return Empirical(tuple(float(s) for s in params["samples"]))
        return cls(**{k: float(v) for k, v in params.items()})


def _scalar(out):
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Weibull(LatencyDistribution):
    shape: float
    scale: float
    family = "weibull"

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("Weibull shape and scale must be positive")

    def sample(self, rng, size=None):
        # inverse CDF on a standard exponential variate
        return _scalar(self.scale * rng.standard_exponential(size) ** (1.0 / self.shape))

    def cdf(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return _scalar(-np.expm1(-(t / self.scale) ** self.shape))

    def mean(self):
        return self.scale * math.gamma(1 + 1 / self.shape)

    def var(self):
        g1 = math.gamma(1 + 1 / self.shape)
        return self.scale ** 2 * (math.gamma(1 + 2 / self.shape) - g1 * g1)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = x / self.scale
        return (math.log(self.shape / self.scale) + (self.shape - 1) * np.log(z)
                - z ** self.shape)

    def params(self):
        return {"shape": self.shape, "scale": self.scale}

    @classmethod
    def from_moments(cls, mean, std) -> "Weibull":
        cv = std / mean

        def gap(k):
            g1 = math.gamma(1 + 1 / k)
            return math.sqrt(math.gamma(1 + 2 / k) - g1 * g1) / g1 - cv

        k = optimize.brentq(gap, 0.1, 100.0)
        return cls(k, mean / math.gamma(1 + 1 / k))


@dataclass(frozen=True)
class Gamma(LatencyDistribution):
    shape: float
    scale: float
    family = "gamma"

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("Gamma shape and scale must be positive")

    def sample(self, rng, size=None):
        return _scalar(rng.gamma(self.shape, self.scale, size))

    def cdf(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return _scalar(special.gammainc(self.shape, t / self.scale))

    def mean(self):
        return self.shape * self.scale

    def var(self):
        return self.shape * self.scale ** 2

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return (-special.gammaln(self.shape) - self.shape * math.log(self.scale)
                + (self.shape - 1) * np.log(x) - x / self.scale)

    def params(self):
        return {"shape": self.shape, "scale": self.scale}

    @classmethod
    def from_moments(cls, mean, std) -> "Gamma":
        k = (mean / std) ** 2
        return cls(k, mean / k)


@dataclass(frozen=True)
class LogNormal(LatencyDistribution):
    mu: float
    sigma: float
    family = "lognormal"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("LogNormal sigma must be positive")

    def sample(self, rng, size=None):
        return _scalar(np.exp(self.mu + self.sigma * rng.standard_normal(size)))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(np.where(t > 0, t, 1.0)) - self.mu) / self.sigma
        return _scalar(np.where(t > 0, special.ndtr(z), 0.0))

    def mean(self):
        return math.exp(self.mu + self.sigma ** 2 / 2)

    def var(self):
        s2 = self.sigma ** 2
        return math.expm1(s2) * math.exp(2 * self.mu + s2)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        lx = np.log(x)
        return (-lx - math.log(self.sigma) - 0.5 * math.log(2 * math.pi)
                - (lx - self.mu) ** 2 / (2 * self.sigma ** 2))

    def params(self):
        return {"mu": self.mu, "sigma": self.sigma}

    @classmethod
    def from_moments(cls, mean, std) -> "LogNormal":
        s2 = math.log1p((std / mean) ** 2)
        return cls(math.log(mean) - s2 / 2, math.sqrt(s2))


@dataclass(frozen=True)
class Fixed(LatencyDistribution):
    value: float
    family = "fixed"

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError("Fixed latency must be nonnegative")

    def sample(self, rng, size=None):
        if size is None:
            return float(self.value)
        return np.full(size, float(self.value))

    def cdf(self, t):
        return _scalar(np.where(np.asarray(t, dtype=float) >= self.value, 1.0, 0.0))

    def mean(self):
        return float(self.value)

    def var(self):
        return 0.0

    def params(self):
        return {"value": self.value}


@dataclass(frozen=True)
class Empirical(LatencyDistribution):
    samples: tuple
    family = "empirical"

    def __post_init__(self):
        if not self.samples:
            raise ValueError("Empirical distribution needs at least one sample")
        if any(not (s >= 0 and math.isfinite(s)) for s in self.samples):
            raise ValueError("Empirical samples must be finite and nonnegative")

    def sample(self, rng, size=None):
        arr = np.asarray(self.samples, dtype=float)
        return _scalar(arr[rng.integers(len(arr), size=size)])

    def cdf(self, t):
        s = np.sort(np.asarray(self.samples, dtype=float))
        return _scalar(np.searchsorted(s, np.asarray(t, dtype=float), side="right") / len(s))

    def mean(self):
        return float(np.mean(self.samples))

    def var(self):
        return float(np.var(self.samples))

    def params(self):
        return {"samples": list(self.samples)}


FAMILIES = {c.family: c for c in (Weibull, Gamma, LogNormal, Fixed, Empirical)}


# -- maximum likelihood fitting --------------------------------------------

def _safeguarded_newton(f, fprime, x0, lo, hi, tol=1e-12, max_iter=200):
    """Newton's method that falls back to bisection on the bracket [lo, hi]."""
    flo = f(lo)
    x = min(max(x0, lo), hi)
    for _ in range(max_iter):
        fx = f(x)
        if fx == 0:
            return x
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
        else:
            hi = x
        step = fx / fprime(x)
        nxt = x - step
        if not (lo < nxt < hi) or not math.isfinite(nxt):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= tol * max(1.0, abs(x)):
            return nxt
        x = nxt
    return x


def _bracket(f, lo, hi, increasing):
    """Widen [lo, hi] geometrically until f changes sign."""
    for _ in range(200):
        flo, fhi = f(lo), f(hi)
        if (flo < 0) != (fhi < 0):
            return lo, hi
        if (flo < 0) == increasing:
            lo, hi = hi, hi * 4
        else:
            lo, hi = lo / 4, lo
    raise ValueError("could not bracket root")


def fit_weibull(x) -> Weibull:
    x = np.asarray(x, dtype=float)
    y = x / x.max()
    ly = np.log(y)
    mean_ly = ly.mean()

    def g(k):
        w = y ** k
        return float((w * ly).sum() / w.sum() - 1.0 / k - mean_ly)

    def gprime(k):
        w = y ** k
        b, a, c = w.sum(), (w * ly).sum(), (w * ly * ly).sum()
        return float((c * b - a * a) / (b * b) + 1.0 / (k * k))

    k0 = 1.2 / max(float(np.std(np.log(x))), 1e-12)
    lo, hi = _bracket(g, k0 / 2, k0 * 2, increasing=True)
    k = _safeguarded_newton(g, gprime, k0, lo, hi)
    scale = float(x.max() * np.mean(y ** k) ** (1.0 / k))
    return Weibull(k, scale)


def fit_gamma(x) -> Gamma:
    x = np.asarray(x, dtype=float)
    m = float(x.mean())
    s = math.log(m) - float(np.log(x).mean())

    def f(k):
        return math.log(k) - float(special.digamma(k)) - s

    def fprime(k):
        return 1.0 / k - float(special.polygamma(1, k))

    k0 = m * m / float(x.var())   # method-of-moments start
    lo, hi = _bracket(f, k0 / 2, k0 * 2, increasing=False)
    k = _safeguarded_newton(f, fprime, k0, lo, hi)
    return Gamma(k, m / k)


def fit_lognormal(x) -> LogNormal:
    lx = np.log(np.asarray(x, dtype=float))
    return LogNormal(float(lx.mean()), float(lx.std()))


def log_likelihood(dist: LatencyDistribution, x) -> float:
    return float(np.sum(dist.logpdf(np.asarray(x, dtype=float))))


def fit(observations, min_parametric: int = MIN_PARAMETRIC_OBS) -> LatencyDistribution:
    """Choose and fit a latency model for one element's observations.

    One observation or zero spread gives :class:`Fixed`; fewer than
    ``min_parametric`` observations (or any exact zero) give
    :class:`Empirical`; otherwise the Weibull, Gamma and LogNormal maximum
    likelihood fits compete on log-likelihood, ties going to Gamma.
    """
    x = np.asarray(list(observations), dtype=float)
    if x.size == 0:
        raise ValueError("fit needs at least one observation")
    if not np.all(np.isfinite(x)):
        raise ValueError("observations must be finite")
    if np.any(x < 0):
        raise NegativeObservation(f"negative latency observation {float(x.min())}")
    if x.size == 1 or np.ptp(x) == 0:
        return Fixed(float(x.mean()))
    if x.size < min_parametric or np.any(x == 0):
        return Empirical(tuple(float(v) for v in x))
    best, best_ll = None, -math.inf
    for fitter in (fit_gamma, fit_weibull, fit_lognormal):
        try:
            cand = fitter(x)
        except (ValueError, FloatingPointError, ZeroDivisionError):
            continue
        ll = log_likelihood(cand, x)
        if math.isfinite(ll) and ll > best_ll:
            best, best_ll = cand, ll
    return best if best is not None else Empirical(tuple(float(v) for v in x))


# -- scheduler cache --------------------------------------------------------

CACHE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ElementStats:
    element: str
    distribution: LatencyDistribution
    n_obs: int = 0
    page: str = ""

    @property
    def mean_s(self) -> float:
        return self.distribution.mean()

    @property
    def std_s(self) -> float:
        return self.distribution.std()

    def to_json(self) -> dict:
        return {**self.distribution.to_json(), "n_obs": self.n_obs,
                "mean_s": self.mean_s, "std_s": self.std_s, "page": self.page}

    @classmethod
    def from_json(cls, element, doc) -> "ElementStats":
        return cls(element, LatencyDistribution.from_json(doc), int(doc.get("n_obs", 0)),
                   doc.get("page", ""))


def cache_to_json(cache: Mapping[str, ElementStats]) -> dict:
    return {"schema_version": CACHE_SCHEMA_VERSION,
            "elements": {k: cache[k].to_json() for k in sorted(cache)}}


def cache_from_json(doc: Mapping) -> dict[str, ElementStats]:
    elements = doc["elements"] if "elements" in doc else doc
    return {k: ElementStats.from_json(k, v) for k, v in elements.items()}


def dump_cache(cache: Mapping[str, ElementStats], path) -> None:
    Path(path).write_text(json.dumps(cache_to_json(cache), indent=2, sort_keys=True) + "\n")


def load_cache(path) -> dict[str, ElementStats]:
    return cache_from_json(json.loads(Path(path).read_text()))
