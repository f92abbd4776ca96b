import pytest

import aoiq.validate as validate_mod
from aoiq import Jet, parse_spec, validation_suite

EXP_SPEC = parse_spec(
    """
    [system]
    arrival_rates = 1, 2
    theta = 0.5
    service = exponential(rate=1.5)

    [simulation]
    horizon = 20000
    seed = 42
    warmup_fraction = 0.05
    """
)


@pytest.fixture(scope="module")
def suite_report():
    return validation_suite(EXP_SPEC, workers=2)


class TestSuite:
    def test_default_suite_passes(self, suite_report):
        failures = [c for c in suite_report.checks if not c.passed]
        assert suite_report.all_passed, failures

    def test_covers_all_check_families(self, suite_report):
        names = {c.name.split(":")[0] for c in suite_report.checks}
        assert names >= {
            "normalization",
            "normalization_aoi",
            "closed_form_vs_graph",
            "moment_routes",
            "sojourn",
            "policy_limits",
            "analytic_vs_sim",
            "peak_mean_gap_identity",
            "distribution_fit",
        }

    def test_policy_limit_checks_present(self, suite_report):
        limit = [c for c in suite_report.checks if c.name.startswith("policy_limits")]
        assert len(limit) == 2
        assert all(c.passed for c in limit)


class TestMutationSensitivity:
    def test_corrupted_closed_form_detected(self, monkeypatch):
        # flip the sign of one Taylor coefficient of the closed-form
        # interdeparture transform: the graph cross-check must fail
        import aoiq.analytic as analytic_mod

        original = analytic_mod.interdeparture_mgf_jet

        def corrupted(cfg, source, order=8):
            jet = original(cfg, source, order)
            coeffs = list(jet.coeffs)
            coeffs[2] = -coeffs[2]
            return Jet.from_coeffs(coeffs, center=jet.center)

        monkeypatch.setattr(validate_mod.analytic, "interdeparture_mgf_jet", corrupted)
        checks = validate_mod._check_graph(EXP_SPEC.system)
        assert any(not c.passed for c in checks)
