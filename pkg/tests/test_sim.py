import math

import numpy as np
import pytest

from aoiq import (
    Deterministic,
    Exponential,
    InsufficientSamples,
    InvalidConfig,
    LogNormal,
    Policy,
    PolicyKind,
    PositiveExponentRejected,
    SimConfig,
    SystemConfig,
    Transform,
    empirical_aoi_mgf,
    empirical_checks,
    empirical_mgf,
    mgf_point_eval,
    moments,
    run,
)

ANCHOR = SystemConfig((1.0,), 1.0, Exponential(1.0))
TWO_EXP = SystemConfig((1.0, 2.0), 0.5, Exponential(1.5))


def small_sim(seed=3, horizon=4000.0, **kw):
    return SimConfig(seed=seed, horizon=horizon, **kw)


class TestConfigValidation:
    def test_stop_rule_exclusive(self):
        with pytest.raises(InvalidConfig):
            SimConfig(seed=1)
        with pytest.raises(InvalidConfig):
            SimConfig(seed=1, horizon=10.0, delivered_per_source=5)

    def test_ranges(self):
        with pytest.raises(InvalidConfig):
            SimConfig(seed=1, horizon=-1.0)
        with pytest.raises(InvalidConfig):
            SimConfig(seed=1, horizon=10.0, warmup_fraction=1.0)
        with pytest.raises(InvalidConfig):
            SimConfig(seed=1, horizon=10.0, batches=5)
        with pytest.raises(InvalidConfig):
            SimConfig(seed=1, horizon=10.0, replications=0)

    def test_policy_validation(self):
        with pytest.raises(InvalidConfig):
            Policy.probabilistic(1.5)
        with pytest.raises(InvalidConfig):
            Policy(PolicyKind.NON_PREEMPTIVE, theta=0.5)


class TestCounters:
    @pytest.mark.parametrize(
        "policy",
        [
            Policy.probabilistic(0.3),
            Policy.non_preemptive(),
            Policy.self_preemptive(),
            Policy.globally_preemptive(),
        ],
        ids=lambda p: p.label(),
    )
    def test_conservation(self, policy):
        report = run(TWO_EXP, policy, small_sim())
        for s in report.per_source:
            assert s.arrivals == s.delivered + s.preempted + s.discarded + s.in_flight
            assert s.entered_service == s.delivered + s.preempted + s.in_flight

    def test_non_preemptive_never_preempts(self):
        report = run(TWO_EXP, Policy.non_preemptive(), small_sim())
        assert all(s.preempted == 0 for s in report.per_source)

    def test_self_preemptive_only_same_source(self):
        # under self preemption busy-time bookkeeping still balances and
        # discards only happen for cross-source collisions
        report = run(TWO_EXP, Policy.self_preemptive(), small_sim())
        assert any(s.preempted > 0 for s in report.per_source)
        assert all(s.discarded > 0 for s in report.per_source)

    def test_globally_preemptive_no_discards(self):
        report = run(TWO_EXP, Policy.globally_preemptive(), small_sim())
        assert all(s.discarded == 0 for s in report.per_source)

    def test_aoi_at_least_system_time(self):
        report = run(TWO_EXP, Policy.probabilistic(0.4), small_sim(horizon=20000.0))
        for s in report.per_source:
            assert s.time_avg_aoi >= s.system_time_mean

    def test_four_source_run(self):
        # exercises the general next-event scan (neither the one- nor the
        # two-source fast path)
        cfg = SystemConfig((0.5, 1.0, 1.5, 0.3), 0.6, Exponential(2.0))
        report = run(cfg, Policy.probabilistic(0.6), small_sim(horizon=8000.0))
        assert len(report.per_source) == 4
        for s in report.per_source:
            assert s.arrivals == s.delivered + s.preempted + s.discarded + s.in_flight
            assert s.delivered > 100
        a = run(cfg, Policy.probabilistic(0.6), small_sim(horizon=8000.0))
        assert report.stats_identical(a)


class TestReproducibility:
    def test_bit_identical_reports(self):
        a = run(TWO_EXP, Policy.probabilistic(0.5), small_sim())
        b = run(TWO_EXP, Policy.probabilistic(0.5), small_sim())
        assert a.stats_identical(b)

    def test_workers_do_not_change_results(self):
        sim = small_sim(horizon=2000.0, replications=4)
        a = run(TWO_EXP, Policy.probabilistic(0.5), sim, workers=1)
        b = run(TWO_EXP, Policy.probabilistic(0.5), sim, workers=2)
        assert a.stats_identical(b)

    def test_seed_changes_results(self):
        a = run(TWO_EXP, Policy.probabilistic(0.5), small_sim(seed=1))
        b = run(TWO_EXP, Policy.probabilistic(0.5), small_sim(seed=2))
        assert not a.stats_identical(b)

    def test_policy_limit_theta_zero(self):
        sim = small_sim(seed=9)
        a = run(TWO_EXP, Policy.probabilistic(0.0), sim)
        b = run(TWO_EXP, Policy.non_preemptive(), sim)
        assert a.stats_identical(b)

    def test_policy_limit_theta_one(self):
        sim = small_sim(seed=9)
        a = run(TWO_EXP, Policy.probabilistic(1.0), sim)
        b = run(TWO_EXP, Policy.self_preemptive(), sim)
        assert a.stats_identical(b)


class TestSampleIdentities:
    def test_paoi_identity_exact(self):
        # every recorded peak equals previous system time plus the
        # interdeparture gap, bit for bit
        report = run(TWO_EXP, Policy.probabilistic(0.7), small_sim())
        for s in report.per_source:
            rec = s.delivery_records
            assert rec.shape[0] > 100
            assert np.all(rec[:, 0] + rec[:, 1] == rec[:, 2])

    def test_sawtooth_area_consistency(self):
        # with no warmup, accumulated area between first and last delivery
        # equals the closed form from the recorded samples
        cfg = SystemConfig((0.8,), 1.0, Exponential(1.0))
        report = run(cfg, Policy.probabilistic(1.0), small_sim(warmup_fraction=0.0))
        s = report.per_source[0]
        rec = s.delivery_records
        want_between = float(np.sum(rec[:, 0] * rec[:, 1] + 0.5 * rec[:, 1] ** 2))
        end, measure_from, area, first_del, last_del, last_t = s.rep_windows[0]
        tail_dt = end - last_del
        tail = last_t * tail_dt + 0.5 * tail_dt * tail_dt
        assert area - tail == pytest.approx(want_between, rel=1e-9)

    def test_delivery_dump_columns(self):
        report = run(
            TWO_EXP, Policy.probabilistic(0.5), small_sim(), collect_deliveries=True
        )
        rows = report.deliveries
        assert rows is not None and rows.shape[1] == 6
        mask = ~np.isnan(rows[:, 4])
        # system time = delivery - generation; paoi = prevT + interdep
        assert np.allclose(rows[:, 3], rows[:, 2] - rows[:, 1], rtol=0, atol=1e-12)
        delivered_total = sum(s.delivered for s in report.per_source)
        assert rows.shape[0] == delivered_total

    def test_count_stop_rule(self):
        sim = SimConfig(seed=4, delivered_per_source=500, warmup_fraction=0.0)
        report = run(TWO_EXP, Policy.probabilistic(0.5), sim)
        assert all(s.delivered >= 500 for s in report.per_source)
        assert min(s.delivered for s in report.per_source) == 500


class TestAgainstAnalytic:
    def test_anchor_aoi_and_interdeparture(self):
        sim = SimConfig(seed=21, horizon=2e5, warmup_fraction=0.1, batches=20)
        report = run(ANCHOR, Policy.probabilistic(1.0), sim)
        s = report.per_source[0]
        assert abs(s.time_avg_aoi - 2.0) < max(2 * s.aoi_ci_halfwidth, 0.04)
        assert abs(s.interdeparture_mean - 2.0) < max(
            2 * s.interdeparture_ci_halfwidth, 0.04
        )

    def test_grid_means_within_band(self):
        # a few representative configs: simulated AoI and peak age within
        # max(2%, CI) of the analytic values
        cases = [
            SystemConfig((1.0, 2.0), 0.5, Exponential(1.5)),
            SystemConfig((2.0, 6.0), 0.28, LogNormal(-1.0, 1.0)),
            SystemConfig((1.0,), 0.0, Deterministic(0.8)),
            SystemConfig((0.7, 1.1, 0.4), 1.0, Exponential(2.0)),
        ]
        sim = SimConfig(seed=6, horizon=3e4, warmup_fraction=0.1, replications=4)
        for cfg in cases:
            report = run(cfg, Policy.probabilistic(cfg.theta), sim, workers=2)
            for c in range(cfg.num_sources):
                m = moments(cfg, c, 1)
                s = report.per_source[c]
                band = max(0.02 * m.mean_aoi, s.aoi_ci_halfwidth)
                assert abs(s.time_avg_aoi - m.mean_aoi) <= band, (cfg, c)
                band = max(0.02 * m.mean_paoi, s.paoi_ci_halfwidth)
                assert abs(s.paoi_mean - m.mean_paoi) <= band, (cfg, c)

    def test_system_time_mgf_pointwise(self):
        cfg = TWO_EXP
        sim = SimConfig(seed=8, horizon=3e4, warmup_fraction=0.05)
        report = run(cfg, Policy.probabilistic(cfg.theta), sim)
        s_val = -0.7
        want = mgf_point_eval(cfg, 0, s_val, Transform.SYSTEM_TIME)
        est, se = empirical_mgf(report.per_source[0].system_times, s_val)
        assert abs(est - want) < 3 * se

    def test_aoi_mgf_pointwise(self):
        # stationary-AoI transform against the exact per-segment sawtooth
        # integral of e^{s * age}
        cfg = TWO_EXP
        sim = SimConfig(seed=13, horizon=6e4, warmup_fraction=0.05)
        report = run(cfg, Policy.probabilistic(cfg.theta), sim)
        s_val = -0.5
        want = mgf_point_eval(cfg, 0, s_val, Transform.AOI)
        est, se = empirical_aoi_mgf(report.per_source[0].delivery_records, s_val)
        assert abs(est - want) < 3 * se


class TestEmpiricalMgf:
    def test_normalization(self):
        est, se = empirical_mgf(np.ones(200), 0.0)
        assert est == 1.0 and se == 0.0

    def test_degenerate_samples(self):
        est, se = empirical_mgf(np.full(150, 2.0), -1.0)
        assert est == pytest.approx(math.exp(-2.0), rel=1e-12)
        assert se == 0.0

    def test_exponential_oracle(self):
        rng = np.random.default_rng(12)
        x = rng.exponential(1.0, 1_000_000)
        est, se = empirical_mgf(x, -1.0)
        assert abs(est - 0.5) < 3 * se

    def test_positive_exponent_rejected(self):
        with pytest.raises(PositiveExponentRejected):
            empirical_mgf(np.ones(200), 0.1)

    def test_too_few_samples(self):
        with pytest.raises(InsufficientSamples):
            empirical_mgf(np.ones(50), -1.0)


@pytest.fixture(scope="module")
def report():
    sim = SimConfig(seed=17, delivered_per_source=30_000, warmup_fraction=0.0)
    return run(TWO_EXP, Policy.probabilistic(0.5), sim)


class TestEmpiricalChecks:
    def test_all_pass_on_matched_run(self, report):
        summary = empirical_checks(report, TWO_EXP, Policy.probabilistic(0.5))
        assert summary.all_passed, summary.failures()
        names = {r.name for r in summary.results}
        assert "source0:system_time_fit" in names
        assert "source1:preemption_rate" in names

    def test_delivery_fraction_example(self, report):
        # unit-rate exponential with preemption rate 1: delivery odds 1/2
        cfg = SystemConfig((2.0, 1.0), 0.5, Exponential(1.0))
        sim = SimConfig(seed=18, delivered_per_source=20_000, warmup_fraction=0.0)
        rep = run(cfg, Policy.probabilistic(0.5), sim)
        s = rep.per_source[0]
        frac = s.delivered / (s.delivered + s.preempted)
        assert frac == pytest.approx(0.5, abs=0.01)
        summary = empirical_checks(rep, cfg, Policy.probabilistic(0.5))
        assert summary.all_passed, summary.failures()

    def test_mismatched_theory_fails(self, report):
        # same run checked against a wrong preemption probability: the
        # delivery-probability and preemption-rate checks must trip
        wrong = empirical_checks(report, TWO_EXP, Policy.probabilistic(0.9))
        failed = {r.name for r in wrong.failures()}
        assert any("delivery_probability" in n for n in failed)
        assert any("preemption_rate" in n for n in failed)

    def test_non_probabilistic_rejected(self, report):
        with pytest.raises(InvalidConfig):
            empirical_checks(report, TWO_EXP, Policy.self_preemptive())

    def test_insufficient_samples(self):
        tiny = run(TWO_EXP, Policy.probabilistic(0.5), small_sim(horizon=200.0))
        with pytest.raises(InsufficientSamples):
            empirical_checks(tiny, TWO_EXP, Policy.probabilistic(0.5))

    def test_deterministic_density_skipped(self):
        cfg = SystemConfig((1.0, 1.0), 0.5, Deterministic(0.5))
        sim = SimConfig(seed=19, delivered_per_source=15_000, warmup_fraction=0.0)
        rep = run(cfg, Policy.probabilistic(0.5), sim)
        summary = empirical_checks(rep, cfg, Policy.probabilistic(0.5))
        fits = [r for r in summary.results if "system_time_fit" in r.name]
        assert all(r.status == "skip" for r in fits)
        assert summary.all_passed

    def test_theta_zero_tilt_reduces_to_plain_law(self):
        # no preemption: system times are plain service draws
        cfg = SystemConfig((1.0, 1.0), 0.0, LogNormal(-0.5, 0.7))
        sim = SimConfig(seed=23, delivered_per_source=12_000, warmup_fraction=0.0)
        rep = run(cfg, Policy.probabilistic(0.0), sim)
        summary = empirical_checks(rep, cfg, Policy.probabilistic(0.0))
        assert summary.all_passed, summary.failures()
