"""Closed-form AoI/PAoI transforms and moments.

For each source of a multi-source M/G/1/1 status-update queue under the
probabilistically preemptive policy, the stationary system time T, the
interdeparture time Y, the peak age A and the age process delta have
moment generating functions that reduce to algebra over the service-time
MGF evaluated at shifted arguments:

    M_T(s)  = M_U(s - p*r_c) / M_U(-p*r_c)          (p = preemption prob,
                                                     r_c = source-c rate)
    M_Y(s)  = g_c / ((1 - h_c) * (1 - sum_{c' != c} g_c' / (1 - h_c')))
    M_A(s)  = M_T(s) * M_Y(s)
    M_d(s)  = (M_A(s) - M_T(s)) / (s * mean(Y))

with through-gain g_c = r_c * M_U(s - p*r_c) / (r - s) and self-loop gain
h_c = p*r_c * (1 - M_U(s - p*r_c)) / (p*r_c - s) (r = total rate). All
four are assembled here in jet arithmetic, so every derivative at s = 0
comes out exact rather than via finite differences.

Moments are additionally computed a second, independent way from binomial
combinations of the T and Y moments; the two routes share nothing past
the T/Y jets, so their agreement is a strong transcription check.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .jets import DEFAULT_ORDER, Jet
from .service import MgfDomainError, ServiceDistribution

__all__ = [
    "SystemConfig",
    "AoiMetrics",
    "Transform",
    "ConsistencyError",
    "OutsideConvergenceRegion",
    "system_time_mgf_jet",
    "interdeparture_mgf_jet",
    "paoi_mgf_jet",
    "aoi_mgf_jet",
    "moments",
    "moments_both_routes",
    "mgf_point_eval",
]

# The two moment routes are algebraically identical, so any disagreement
# beyond rounding means a formula transcription bug.
_ROUTE_RTOL = 1e-8

# Pointwise evaluation refuses arguments this close to the removable
# singularity of the self-loop gain.
_REMOVABLE_GUARD = 1e-9


class ConsistencyError(RuntimeError):
    """The binomial-moment route and the jet route disagree."""


class OutsideConvergenceRegion(ValueError):
    """Pointwise MGF evaluation outside the transform's convergence region."""


class Transform(enum.Enum):
    SYSTEM_TIME = "system_time"
    INTERDEPARTURE = "interdeparture"
    PAOI = "paoi"
    AOI = "aoi"


@dataclass(frozen=True)
class SystemConfig:
    """Arrival rates per source, preemption probability, shared service law."""

    arrival_rates: tuple[float, ...]
    theta: float
    service: ServiceDistribution

    def __post_init__(self):
        object.__setattr__(self, "arrival_rates", tuple(float(r) for r in self.arrival_rates))
        if len(self.arrival_rates) < 1:
            raise ValueError("need at least one source")
        if any(not (r > 0 and math.isfinite(r)) for r in self.arrival_rates):
            raise ValueError(f"arrival rates must be positive finite, got {self.arrival_rates}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"preemption probability must lie in [0, 1], got {self.theta}")

    @property
    def num_sources(self) -> int:
        return len(self.arrival_rates)

    @property
    def total_rate(self) -> float:
        return sum(self.arrival_rates)

    def _check_source(self, source: int) -> None:
        if not 0 <= source < self.num_sources:
            raise ValueError(f"source index {source} outside 0..{self.num_sources - 1}")


@dataclass(frozen=True)
class AoiMetrics:
    """Exact moments for one source; index m-1 holds the m-th moment."""

    source: int
    aoi_moments: tuple[float, ...]
    paoi_moments: tuple[float, ...]
    mean_system_time: float
    mean_interdeparture: float

    @property
    def mean_aoi(self) -> float:
        return self.aoi_moments[0]

    @property
    def mean_paoi(self) -> float:
        return self.paoi_moments[0]


def _service_shift_jet(cfg: SystemConfig, source: int, order: int) -> Jet:
    """Jet at s = 0 of s -> M_U(s - theta * rate_c)."""
    shift = -cfg.theta * cfg.arrival_rates[source]
    return cfg.service.mgf_jet(shift, order).recenter(0.0)


def system_time_mgf_jet(cfg: SystemConfig, source: int, order: int = DEFAULT_ORDER) -> Jet:
    """Jet at 0 of the system-time MGF for one source.

    A delivered packet's system time is its service time conditioned on
    surviving same-source preemption attempts, which exponentially tilts
    the service law by the thinned preemption rate.
    """
    cfg._check_source(source)
    shifted = _service_shift_jet(cfg, source, order)
    return shifted * (1.0 / shifted.coeffs[0])


def _gain_jets(cfg: SystemConfig, source: int, order: int) -> tuple[Jet, Jet]:
    """Through-gain and self-loop gain for one source, as jets at 0.

    The self-loop gain r*(1 - M_U(s - r))/(r - s) (r the thinned
    preemption rate) is assembled from the service survival transform
    rather than by dividing out (r - s) in jet arithmetic: the division
    amplifies rounding like r^-k and turns to garbage for small r, while
    the survival route is stable uniformly in r, including the
    vanishing-rate reduction.
    """
    rate = cfg.arrival_rates[source]
    preempt_rate = cfg.theta * rate
    shifted = _service_shift_jet(cfg, source, order)
    lam_minus_s = Jet.from_coeffs(
        (cfg.total_rate, -1.0) + (0.0,) * (order - 1)
    )
    through = shifted * rate / lam_minus_s
    if preempt_rate == 0.0:
        # the preemption factor vanishes identically; the algebraic limit
        # of the gain is 0, matching the non-preemptive reduction
        loop = Jet.constant(0.0, order)
    else:
        survival = cfg.service.survival_mgf_jet(-preempt_rate, order).recenter(0.0)
        loop = survival * preempt_rate
    return through, loop


def interdeparture_mgf_jet(cfg: SystemConfig, source: int, order: int = DEFAULT_ORDER) -> Jet:
    """Jet at 0 of the interdeparture-time MGF for one source."""
    cfg._check_source(source)
    gains = [_gain_jets(cfg, c, order) for c in range(cfg.num_sources)]
    through_c, loop_c = gains[source]
    detour = Jet.constant(1.0, order)
    for c, (through, loop) in enumerate(gains):
        if c != source:
            detour = detour - through / (1.0 - loop)
    return through_c / ((1.0 - loop_c) * detour)


def paoi_mgf_jet(cfg: SystemConfig, source: int, order: int = DEFAULT_ORDER) -> Jet:
    """Jet at 0 of the peak-age MGF: system time and interdeparture time
    of consecutive deliveries are independent, so the MGFs multiply."""
    return system_time_mgf_jet(cfg, source, order) * interdeparture_mgf_jet(cfg, source, order)


def aoi_mgf_jet(cfg: SystemConfig, source: int, order: int = DEFAULT_ORDER) -> Jet:
    """Jet at 0 of the stationary AoI MGF, of order ``order - 1``.

    The sawtooth decomposition gives (M_A(s) - M_T(s)) / (s * mean(Y));
    the numerator vanishes at 0 and is deflated by one order.
    """
    if order < 2:
        raise ValueError("AoI jet needs order >= 2 (deflation costs one order)")
    t_jet = system_time_mgf_jet(cfg, source, order)
    y_jet = interdeparture_mgf_jet(cfg, source, order)
    mean_y = y_jet.derivative_value(1)
    numerator = t_jet * y_jet - t_jet
    return numerator.deflate() * (1.0 / mean_y)


def _moments_from_jet(jet: Jet, max_order: int) -> tuple[float, ...]:
    return tuple(jet.derivative_value(m) for m in range(1, max_order + 1))


def moments_both_routes(
    cfg: SystemConfig, source: int, max_order: int
) -> tuple[AoiMetrics, AoiMetrics, float]:
    """Moments by the binomial route and the jet route, plus their gap.

    Route one combines T and Y moments binomially (T and Y of a delivery
    cycle are independent); route two differentiates the assembled AoI and
    peak-age jets directly. Returns (binomial, jet, max relative gap).
    """
    if max_order < 1:
        raise ValueError("moment order must be >= 1")
    cfg._check_source(source)
    order = max_order + 3
    t_jet = system_time_mgf_jet(cfg, source, order)
    y_jet = interdeparture_mgf_jet(cfg, source, order)
    t_moms = [t_jet.derivative_value(i) for i in range(order + 1)]
    y_moms = [y_jet.derivative_value(i) for i in range(order + 1)]
    mean_y = y_moms[1]

    def peak_moment(m: int) -> float:
        return sum(math.comb(m, i) * t_moms[i] * y_moms[m - i] for i in range(m + 1))

    paoi_binom = tuple(peak_moment(m) for m in range(1, max_order + 1))
    aoi_binom = tuple(
        (peak_moment(m + 1) - t_moms[m + 1]) / ((m + 1) * mean_y)
        for m in range(1, max_order + 1)
    )
    binom = AoiMetrics(source, aoi_binom, paoi_binom, t_moms[1], mean_y)

    paoi = t_jet * y_jet
    aoi = (paoi - t_jet).deflate() * (1.0 / mean_y)
    direct = AoiMetrics(
        source,
        _moments_from_jet(aoi, max_order),
        _moments_from_jet(paoi, max_order),
        t_moms[1],
        mean_y,
    )

    gap = 0.0
    for a, b in zip(
        binom.aoi_moments + binom.paoi_moments,
        direct.aoi_moments + direct.paoi_moments,
    ):
        gap = max(gap, abs(a - b) / max(abs(a), abs(b), 1e-300))
    return binom, direct, gap


def moments(cfg: SystemConfig, source: int, max_order: int = 2) -> AoiMetrics:
    """AoI and peak-age moments 1..max_order for one source.

    Computed by two independent routes that must agree; disagreement is a
    fatal internal error, not a warning.
    """
    binom, direct, gap = moments_both_routes(cfg, source, max_order)
    if gap > _ROUTE_RTOL:
        raise ConsistencyError(
            f"moment routes disagree by relative {gap:.3e} "
            f"(source {source}, orders up to {max_order})"
        )
    return direct


def _scalar_gains(cfg: SystemConfig, source: int, s: float) -> tuple[float, float]:
    rate = cfg.arrival_rates[source]
    preempt_rate = cfg.theta * rate
    if preempt_rate > 0.0 and abs(s - preempt_rate) < _REMOVABLE_GUARD:
        raise OutsideConvergenceRegion(
            f"s={s} within {_REMOVABLE_GUARD} of the removable point {preempt_rate} "
            f"for source {source}"
        )
    try:
        mu = cfg.service.mgf_point(s - preempt_rate)
    except MgfDomainError as exc:
        raise OutsideConvergenceRegion(
            f"service MGF undefined at s - theta*rate = {s - preempt_rate}: {exc}"
        ) from exc
    through = rate * mu / (cfg.total_rate - s)
    loop = 0.0 if preempt_rate == 0.0 else preempt_rate * (1.0 - mu) / (preempt_rate - s)
    return through, loop


def _system_time_point(cfg: SystemConfig, source: int, s: float) -> float:
    preempt_rate = cfg.theta * cfg.arrival_rates[source]
    try:
        return cfg.service.mgf_point(s - preempt_rate) / cfg.service.mgf_point(-preempt_rate)
    except MgfDomainError as exc:
        raise OutsideConvergenceRegion(
            f"service MGF undefined at s - theta*rate = {s - preempt_rate}: {exc}"
        ) from exc


def _interdeparture_point(cfg: SystemConfig, source: int, s: float) -> float:
    if s >= cfg.total_rate:
        raise OutsideConvergenceRegion(
            f"s={s} at or beyond the total arrival rate {cfg.total_rate}"
        )
    detour = 1.0
    for c in range(cfg.num_sources):
        if c == source:
            continue
        through, loop = _scalar_gains(cfg, c, s)
        if 1.0 - loop <= 0.0:
            raise OutsideConvergenceRegion(
                f"self-loop gain of source {c} reaches 1 at s={s}"
            )
        detour -= through / (1.0 - loop)
    if detour <= 0.0:
        raise OutsideConvergenceRegion(f"detour denominator nonpositive at s={s}")
    through_c, loop_c = _scalar_gains(cfg, source, s)
    if 1.0 - loop_c <= 0.0:
        raise OutsideConvergenceRegion(
            f"self-loop gain of source {source} reaches 1 at s={s}"
        )
    return through_c / ((1.0 - loop_c) * detour)


def mgf_point_eval(cfg: SystemConfig, source: int, s: float, which: Transform) -> float:
    """Scalar MGF value at s for one of the four transforms.

    Valid for s < 0 and for small positive s inside the convergence region;
    trips OutsideConvergenceRegion (naming the condition) otherwise. At
    s = 0 all four transforms return exactly 1.
    """
    cfg._check_source(source)
    which = Transform(which)
    if s == 0.0:
        return 1.0
    if which is Transform.SYSTEM_TIME:
        return _system_time_point(cfg, source, s)
    if which is Transform.INTERDEPARTURE:
        return _interdeparture_point(cfg, source, s)
    if which is Transform.PAOI:
        return _system_time_point(cfg, source, s) * _interdeparture_point(cfg, source, s)
    mean_y = interdeparture_mgf_jet(cfg, source, 2).derivative_value(1)
    t_val = _system_time_point(cfg, source, s)
    y_val = _interdeparture_point(cfg, source, s)
    return t_val * (y_val - 1.0) / (s * mean_y)
