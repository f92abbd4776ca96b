"""Service-time distributions.

Each distribution supplies sampling, density/CDF, and truncated Taylor
expansions of its moment generating function M(t) = E[exp(t*U)] at
non-positive arguments. The expansion coefficients E[U^k exp(t0*U)] / k!
are the single analytic primitive every AoI formula consumes.

Exponential, gamma and deterministic laws use closed-form derivative
formulas. The log-normal law has no closed-form MGF; its coefficients are
computed by Gauss-Hermite quadrature after substituting U = exp(loc +
scale*Z) with Z standard normal, doubling the node count until the result
stabilizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import betainc, gammainc, roots_hermite

from .jets import DEFAULT_ORDER, Jet

__all__ = [
    "ServiceDistribution",
    "Exponential",
    "Gamma",
    "Deterministic",
    "LogNormal",
    "MgfDomainError",
    "UnsupportedDensity",
    "ConvergenceError",
    "substream",
    "parse_distribution",
]

SQRT2 = math.sqrt(2.0)
SQRT_PI = math.sqrt(math.pi)

# Gauss-Hermite node doubling: start small, stop when successive relative
# change per coefficient drops below the tolerance.
_GH_START_NODES = 64
_GH_MAX_NODES = 4096
_GH_RTOL = 1e-9

# Keep-away margin from the MGF pole of exponential/gamma laws, relative
# to the rate: jet coefficients blow up as the pole is approached.
_POLE_MARGIN = 1e-9


class MgfDomainError(ValueError):
    """MGF requested outside the distribution's convergence region."""


class UnsupportedDensity(ValueError):
    """The distribution has no density (deterministic point mass)."""


class ConvergenceError(RuntimeError):
    """Quadrature failed to stabilize within the node budget."""


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent, reproducible random substream for a (seed, key) pair.

    Every (replication, source, purpose) triple in the simulator gets its
    own substream so that policy logic never perturbs unrelated draws.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


@lru_cache(maxsize=None)
def _hermite_nodes(n: int):
    x, w = roots_hermite(n)
    with np.errstate(divide="ignore"):
        log_w = np.log(w)
    return x, log_w


class ServiceDistribution:
    """Common interface; concrete laws are the frozen dataclasses below."""

    def mean(self) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.sample_n(rng, 1)[0])

    def sample_n(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def pdf(self, t: float) -> float:
        raise NotImplementedError

    def cdf(self, t: float) -> float:
        raise NotImplementedError

    def mgf_point(self, t: float) -> float:
        """E[exp(t*U)]; exactly 1 at t = 0."""
        raise NotImplementedError

    def mgf_jet(self, t0: float, order: int = DEFAULT_ORDER) -> Jet:
        """Jet of the MGF at t0: coeffs[k] = E[U^k exp(t0*U)] / k!."""
        raise NotImplementedError

    def survival_mgf_jet(self, t0: float, order: int = DEFAULT_ORDER) -> Jet:
        """Jet at t0 <= 0 of the survival transform H(t) = (1 - M(t)) / (-t).

        H is the integral of exp(t*v) against the survival function
        1 - F(v), so its k-th derivative is E[v^k exp(t*v)] integrated
        against the tail; in regularized-incomplete-gamma form

            coeffs[k] = E[P(k+1, -t0*U)] / (-t0)^(k+1),

        which is a mean of values in [0, 1] divided by an exact power:
        stable for arbitrarily small -t0, unlike forming (1 - M)/( -t) in
        truncated-series arithmetic, whose rounding blows up like
        (-t0)^-k. Every ratio-of-polynomials expression containing the
        factor (1 - M(s - r))/(r - s) should be built from this jet.
        """
        if t0 > 0:
            raise MgfDomainError(f"survival transform implemented for t0 <= 0, got {t0}")
        if t0 == 0.0:
            return Jet(0.0, self.mgf_jet(0.0, order + 1).coeffs[1:])
        return self._survival_jet_neg(t0, order)

    def _survival_jet_neg(self, t0: float, order: int) -> Jet:
        raise NotImplementedError

    def label(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(ServiceDistribution):
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"exponential rate must be positive, got {self.rate}")

    def mean(self) -> float:
        return 1.0 / self.rate

    def sample_n(self, rng, n):
        return rng.exponential(1.0 / self.rate, n)

    def pdf(self, t):
        return self.rate * math.exp(-self.rate * t) if t >= 0 else 0.0

    def cdf(self, t):
        return -math.expm1(-self.rate * t) if t > 0 else 0.0

    def _check_domain(self, t):
        if t + _POLE_MARGIN * self.rate >= self.rate:
            raise MgfDomainError(
                f"exponential MGF diverges at t={t} (rate {self.rate})"
            )

    def mgf_point(self, t):
        if t == 0.0:
            return 1.0
        self._check_domain(t)
        return self.rate / (self.rate - t)

    def mgf_jet(self, t0, order=DEFAULT_ORDER):
        self._check_domain(t0)
        # M(t) = r/(r-t): the k-th normalized coefficient at t0 is
        # r / (r-t0)^(k+1), a geometric progression.
        gap = self.rate - t0
        coeffs = [self.rate / gap]
        for _ in range(order):
            coeffs.append(coeffs[-1] / gap)
        return Jet(t0, tuple(coeffs))

    def _survival_jet_neg(self, t0, order):
        # H(t) = 1/(rate - t) exactly for the exponential law
        gap = self.rate - t0
        coeffs = [1.0 / gap]
        for _ in range(order):
            coeffs.append(coeffs[-1] / gap)
        return Jet(t0, tuple(coeffs))

    def label(self):
        return f"exponential(rate={self.rate:g})"


@dataclass(frozen=True)
class Gamma(ServiceDistribution):
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError(f"gamma shape/rate must be positive, got {self}")

    def mean(self) -> float:
        return self.shape / self.rate

    def sample_n(self, rng, n):
        return rng.gamma(self.shape, 1.0 / self.rate, n)

    def pdf(self, t):
        if t <= 0:
            return 0.0
        k, b = self.shape, self.rate
        return math.exp(
            k * math.log(b) + (k - 1.0) * math.log(t) - b * t - math.lgamma(k)
        )

    def cdf(self, t):
        return float(gammainc(self.shape, self.rate * t)) if t > 0 else 0.0

    def _check_domain(self, t):
        if t + _POLE_MARGIN * self.rate >= self.rate:
            raise MgfDomainError(f"gamma MGF diverges at t={t} (rate {self.rate})")

    def mgf_point(self, t):
        if t == 0.0:
            return 1.0
        self._check_domain(t)
        return (self.rate / (self.rate - t)) ** self.shape

    def mgf_jet(self, t0, order=DEFAULT_ORDER):
        self._check_domain(t0)
        # M(t) = (r/(r-t))^k; successive normalized coefficients follow the
        # rising-factorial recursion c_j = c_{j-1} * (k+j-1) / (j*(r-t0)).
        gap = self.rate - t0
        coeffs = [(self.rate / gap) ** self.shape]
        for j in range(1, order + 1):
            coeffs.append(coeffs[-1] * (self.shape + j - 1.0) / (j * gap))
        return Jet(t0, tuple(coeffs))

    def _survival_jet_neg(self, t0, order):
        # E[P(k+1, c*U)] for gamma U is a beta tail probability: with
        # G1 ~ Gamma(k+1), G2 ~ Gamma(shape) independent, the event
        # G1 <= (c/rate) G2 has probability I_x(k+1, shape), x = c/(c+rate).
        c = -t0
        x = c / (c + self.rate)
        coeffs = [float(betainc(k + 1, self.shape, x)) / c ** (k + 1) for k in range(order + 1)]
        return Jet(t0, tuple(coeffs))

    def label(self):
        return f"gamma(shape={self.shape:g}, rate={self.rate:g})"


@dataclass(frozen=True)
class Deterministic(ServiceDistribution):
    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"deterministic duration must be positive, got {self.value}")

    def mean(self) -> float:
        return self.value

    def sample_n(self, rng, n):
        return np.full(n, self.value)

    def pdf(self, t):
        raise UnsupportedDensity("a point mass has no density")

    def cdf(self, t):
        return 1.0 if t >= self.value else 0.0

    def mgf_point(self, t):
        return math.exp(t * self.value) if t != 0.0 else 1.0

    def mgf_jet(self, t0, order=DEFAULT_ORDER):
        # M(t) = exp(t*d): coefficients exp(t0*d) * d^k / k!.
        base = math.exp(t0 * self.value)
        coeffs = [base]
        for k in range(1, order + 1):
            coeffs.append(coeffs[-1] * self.value / k)
        return Jet(t0, tuple(coeffs))

    def _survival_jet_neg(self, t0, order):
        c = -t0
        coeffs = [
            float(gammainc(k + 1, c * self.value)) / c ** (k + 1) for k in range(order + 1)
        ]
        return Jet(t0, tuple(coeffs))

    def label(self):
        return f"deterministic(value={self.value:g})"


@dataclass(frozen=True)
class LogNormal(ServiceDistribution):
    loc: float
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"log-normal scale must be positive, got {self.scale}")

    def mean(self) -> float:
        return math.exp(self.loc + 0.5 * self.scale**2)

    def sample_n(self, rng, n):
        return rng.lognormal(self.loc, self.scale, n)

    def pdf(self, t):
        if t <= 0:
            return 0.0
        z = (math.log(t) - self.loc) / self.scale
        return math.exp(-0.5 * z * z) / (t * self.scale * math.sqrt(2 * math.pi))

    def cdf(self, t):
        if t <= 0:
            return 0.0
        z = (math.log(t) - self.loc) / self.scale
        return 0.5 * math.erfc(-z / SQRT2)

    def _quadrature_coeffs(self, t0: float, order: int, nodes: int) -> list[float]:
        x, log_w = _hermite_nodes(nodes)
        log_u = self.loc + self.scale * SQRT2 * x
        u = np.exp(log_u)
        base = log_w + t0 * u
        coeffs = []
        log_fact = 0.0
        for k in range(order + 1):
            if k > 0:
                log_fact += math.log(k)
            with np.errstate(over="ignore"):
                terms = np.exp(base + k * log_u - log_fact)
            coeffs.append(float(np.sum(terms)) / SQRT_PI)
        return coeffs

    def _exp_weighted_coeffs(self, t0: float, order: int) -> list[float]:
        """E[U^k exp(t0*U)] / k! for k = 0..order, by Gauss-Hermite.

        With U = exp(loc + scale*Z) the integrand in the standard-normal
        variable is smooth, so Hermite-weighted quadrature converges fast;
        node doubling until the per-coefficient relative change drops below
        the tolerance guards the slower convergence near t0 = 0 with large
        orders. Terms are assembled in log space: at extreme nodes the
        weight underflows or U^k overflows individually while the product
        stays negligible.
        """
        prev = None
        n = _GH_START_NODES
        while n <= _GH_MAX_NODES:
            coeffs = self._quadrature_coeffs(t0, order, n)
            if prev is not None and all(
                abs(c - p) <= _GH_RTOL * abs(c) for c, p in zip(coeffs, prev)
            ):
                return coeffs
            prev = coeffs
            n *= 2
        raise ConvergenceError(
            f"log-normal MGF quadrature did not stabilize within {_GH_MAX_NODES} nodes "
            f"(t0={t0}, order={order})"
        )

    def _check_domain(self, t):
        if t > 0:
            raise MgfDomainError(f"log-normal MGF diverges for t > 0 (got t={t})")

    def mgf_point(self, t):
        if t == 0.0:
            return 1.0
        self._check_domain(t)
        return self._exp_weighted_coeffs(t, 0)[0]

    def mgf_jet(self, t0, order=DEFAULT_ORDER):
        self._check_domain(t0)
        return Jet(t0, tuple(self._exp_weighted_coeffs(t0, order)))

    def _tail_prob_coeffs(self, t0: float, order: int, nodes: int) -> list[float]:
        c = -t0
        x, log_w = _hermite_nodes(nodes)
        w = np.exp(log_w)
        u = np.exp(self.loc + self.scale * SQRT2 * x)
        coeffs = []
        for k in range(order + 1):
            mean_p = float(np.sum(w * gammainc(k + 1, c * u))) / SQRT_PI
            coeffs.append(mean_p / c ** (k + 1))
        return coeffs

    def _survival_jet_neg(self, t0, order):
        prev = None
        n = _GH_START_NODES
        while n <= _GH_MAX_NODES:
            coeffs = self._tail_prob_coeffs(t0, order, n)
            if prev is not None and all(
                abs(c - p) <= _GH_RTOL * abs(c) for c, p in zip(coeffs, prev)
            ):
                return Jet(t0, tuple(coeffs))
            prev = coeffs
            n *= 2
        raise ConvergenceError(
            f"log-normal survival-transform quadrature did not stabilize within "
            f"{_GH_MAX_NODES} nodes (t0={t0}, order={order})"
        )

    def label(self):
        return f"lognormal(loc={self.loc:g}, scale={self.scale:g})"


_DIST_BUILDERS = {
    "exponential": (Exponential, ("rate",)),
    "gamma": (Gamma, ("shape", "rate")),
    "deterministic": (Deterministic, ("value",)),
    "lognormal": (LogNormal, ("loc", "scale")),
}

_PARAM_ALIASES = {
    "mu": "rate",
    "alpha": "loc",
    "omega": "scale",
    "sigma": "scale",
    "k": "shape",
    "beta": "rate",
    "d": "value",
}


def parse_distribution(text: str) -> ServiceDistribution:
    """Parse a spec like ``lognormal(loc=-1, scale=1)`` into a distribution.

    Accepts a few conventional aliases for the parameter names (mu, alpha,
    omega, ...).
    """
    text = text.strip()
    if "(" not in text or not text.endswith(")"):
        raise ValueError(
            f"bad distribution spec {text!r}; expected name(param=value, ...)"
        )
    name, _, arglist = text.partition("(")
    name = name.strip().lower()
    if name not in _DIST_BUILDERS:
        raise ValueError(
            f"unknown distribution {name!r}; choices: {sorted(_DIST_BUILDERS)}"
        )
    cls, fields = _DIST_BUILDERS[name]
    kwargs = {}
    body = arglist[:-1].strip()
    if body:
        for piece in body.split(","):
            key, eq, value = piece.partition("=")
            if not eq:
                raise ValueError(f"bad distribution parameter {piece!r}; expected key=value")
            key = key.strip().lower()
            key = _PARAM_ALIASES.get(key, key)
            if key not in fields:
                raise ValueError(f"unknown parameter {key!r} for {name}; expected {fields}")
            if key in kwargs:
                raise ValueError(f"duplicate parameter {key!r} for {name}")
            try:
                kwargs[key] = float(value)
            except ValueError:
                raise ValueError(f"non-numeric value {value.strip()!r} for {name}.{key}") from None
    missing = [f for f in fields if f not in kwargs]
    if missing:
        raise ValueError(f"missing parameters {missing} for {name}")
    return cls(**kwargs)
