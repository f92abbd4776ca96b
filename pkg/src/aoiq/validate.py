"""Cross-validation suite tying all derivation routes together.

Runs, for one experiment spec: jet normalization at s = 0, closed form
against the graph solver, the two moment routes against each other, the
sojourn-kit algebraic identities, policy-limit bit-identity of simulation
runs, analytic-vs-simulated means, and the distributional goodness-of-fit
checks. Each check reports pass/fail/skip with its measured discrepancy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import analytic, semimarkov
from .analytic import SystemConfig, moments_both_routes
from .config import ExperimentSpec
from .jets import Jet
from .sim import (
    InsufficientSamples,
    Policy,
    SimConfig,
    empirical_checks,
    run,
)

__all__ = ["ValidationCheck", "ValidationReport", "validation_suite"]

_EQUIV_HORIZON = 2000.0


@dataclass(frozen=True)
class ValidationCheck:
    name: str
    status: str  # pass | fail | skip
    discrepancy: float
    tolerance: float
    detail: str

    @property
    def passed(self) -> bool:
        return self.status != "fail"


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[ValidationCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _rel_gap(a: Jet, b: Jet, orders: int) -> float:
    gap = 0.0
    for x, y in zip(a.coeffs[: orders + 1], b.coeffs[: orders + 1]):
        gap = max(gap, abs(x - y) / max(abs(x), abs(y), 1.0))
    return gap


def _verdict(name, gap, tol, detail="") -> ValidationCheck:
    return ValidationCheck(
        name, "pass" if gap <= tol else "fail", gap, tol, detail
    )


def _check_normalization(cfg: SystemConfig) -> list[ValidationCheck]:
    out = []
    for c in range(cfg.num_sources):
        t_jet = analytic.system_time_mgf_jet(cfg, c)
        y_jet = analytic.interdeparture_mgf_jet(cfg, c)
        p_jet = analytic.paoi_mgf_jet(cfg, c)
        a_jet = analytic.aoi_mgf_jet(cfg, c)
        gap = max(abs(j.coeffs[0] - 1.0) for j in (t_jet, y_jet, p_jet))
        out.append(_verdict(f"normalization:source{c}", gap, 1e-10))
        out.append(
            _verdict(f"normalization_aoi:source{c}", abs(a_jet.coeffs[0] - 1.0), 1e-8)
        )
    return out


def _check_graph(cfg: SystemConfig) -> list[ValidationCheck]:
    out = []
    for c in range(cfg.num_sources):
        closed = analytic.interdeparture_mgf_jet(cfg, c)
        graph = semimarkov.build_interdeparture_graph(cfg, c)
        solved = semimarkov.transfer_functions(graph)["delivered"]
        out.append(
            _verdict(
                f"closed_form_vs_graph:source{c}",
                _rel_gap(closed, solved, 8),
                1e-9,
                "interdeparture MGF, orders 0..8",
            )
        )
    return out


def _check_moment_routes(cfg: SystemConfig) -> list[ValidationCheck]:
    out = []
    for c in range(cfg.num_sources):
        _, _, gap = moments_both_routes(cfg, c, 4)
        out.append(_verdict(f"moment_routes:source{c}", gap, 1e-8, "orders 1..4"))
    return out


def _check_sojourn(cfg: SystemConfig) -> list[ValidationCheck]:
    kit = semimarkov.sojourn_kit(cfg)
    gap = abs(sum(kit.race) - 1.0)
    for d, p in zip(kit.delivery, kit.preempt):
        gap = max(gap, abs(d + p - 1.0))
    out = [_verdict("sojourn:probabilities", gap, 1e-12)]
    gain_gap = 0.0
    for c in range(cfg.num_sources):
        through, loop = analytic._gain_jets(cfg, c, kit.wait_mgf[c].order)
        via_kit = kit.wait_mgf[c] * kit.race[c] * kit.delivered_mgf[c] * kit.delivery[c]
        gain_gap = max(gain_gap, _rel_gap(via_kit, through, via_kit.order))
        loop_via_kit = kit.preempted_mgf[c] * kit.preempt[c]
        if cfg.theta * cfg.arrival_rates[c] > 0:
            gain_gap = max(gain_gap, _rel_gap(loop_via_kit, loop, loop.order))
        else:
            gain_gap = max(gain_gap, max(abs(x) for x in loop_via_kit.coeffs))
    out.append(
        _verdict(
            "sojourn:gain_identities",
            gain_gap,
            1e-12,
            "arrival race * sojourn MGFs reproduce the closed-form gains",
        )
    )
    return out


def _check_policy_limits(cfg: SystemConfig, seed: int) -> list[ValidationCheck]:
    sim = SimConfig(seed=seed, horizon=_EQUIV_HORIZON, warmup_fraction=0.1)
    pairs = [
        ("theta0_vs_non_preemptive", Policy.probabilistic(0.0), Policy.non_preemptive()),
        ("theta1_vs_self_preemptive", Policy.probabilistic(1.0), Policy.self_preemptive()),
    ]
    out = []
    for name, a, b in pairs:
        same = run(cfg, a, sim).stats_identical(run(cfg, b, sim))
        out.append(
            ValidationCheck(
                f"policy_limits:{name}",
                "pass" if same else "fail",
                0.0 if same else 1.0,
                0.0,
                "bit-identical reports under shared seeds",
            )
        )
    return out


def _check_against_simulation(spec: ExperimentSpec, workers: int) -> list[ValidationCheck]:
    cfg = spec.system
    report = run(cfg, Policy.probabilistic(cfg.theta), spec.sim, workers=workers)
    out = []
    for c in range(cfg.num_sources):
        m = analytic.moments(cfg, c, 2)
        s = report.per_source[c]
        for label, sim_val, ana_val, hw in (
            ("aoi", s.time_avg_aoi, m.mean_aoi, s.aoi_ci_halfwidth),
            ("paoi", s.paoi_mean, m.mean_paoi, s.paoi_ci_halfwidth),
        ):
            band = max(0.02 * ana_val, hw if not math.isnan(hw) else 0.0)
            gap = abs(sim_val - ana_val)
            out.append(
                ValidationCheck(
                    f"analytic_vs_sim:{label}:source{c}",
                    "pass" if gap <= band else "fail",
                    gap,
                    band,
                    f"simulated {sim_val:.6g} vs analytic {ana_val:.6g}",
                )
            )
    for c in range(cfg.num_sources):
        m = analytic.moments(cfg, c, 2)
        y = analytic.interdeparture_mgf_jet(cfg, c, 4)
        ey, ey2 = y.derivative_value(1), y.derivative_value(2)
        want = (2.0 * ey * ey - ey2) / (2.0 * ey)
        got = m.mean_paoi - m.mean_aoi
        out.append(
            _verdict(
                f"peak_mean_gap_identity:source{c}",
                abs(got - want) / max(1.0, abs(want)),
                1e-8,
                "peak-minus-mean AoI equals (mean(Y)^2 - Var(Y)) / (2 mean(Y))",
            )
        )
    checks = []
    try:
        summary = empirical_checks(report, cfg, Policy.probabilistic(cfg.theta))
        for r in summary.results:
            checks.append(
                ValidationCheck(
                    f"distribution_fit:{r.name}", r.status, r.statistic, r.threshold, r.detail
                )
            )
    except InsufficientSamples as exc:
        checks.append(
            ValidationCheck("distribution_fit", "skip", math.nan, math.nan, str(exc))
        )
    return out + checks


def validation_suite(spec: ExperimentSpec, workers: int = 1) -> ValidationReport:
    """Run every cross-check for the spec's system configuration."""
    cfg = spec.system
    checks: list[ValidationCheck] = []
    checks += _check_normalization(cfg)
    checks += _check_graph(cfg)
    checks += _check_moment_routes(cfg)
    checks += _check_sojourn(cfg)
    checks += _check_policy_limits(cfg, spec.sim.seed)
    checks += _check_against_simulation(spec, workers)
    return ValidationReport(tuple(checks))
