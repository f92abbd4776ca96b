"""Parameter sweeps over theta or the first source's rate, to CSV rows.

One row per (grid point, mode, policy, source). The preemption-probability
sweep varies theta with rates fixed; the rate sweep varies the first
source's rate while keeping the total fixed by adjusting the second
(grid points where the second rate would be nonpositive are dropped).

The difference-ratio column compares each policy's sum average AoI against
the probabilistic policy at the same grid point and mode:
(sum - sum_prob) / sum_prob * 100, so the probabilistic rows read 0.
"""

from __future__ import annotations

import csv
import math
from typing import Iterable, Iterator

import numpy as np

from .analytic import SystemConfig, moments
from .config import ExperimentSpec
from .sim import Policy, PolicyKind, run

__all__ = ["CSV_COLUMNS", "grid_values", "iter_sweep_rows", "run_sweep", "write_rows", "format_number"]

CSV_COLUMNS = [
    "axis_value",
    "policy",
    "source",
    "mean_aoi",
    "mean_paoi",
    "aoi_m2",
    "paoi_m2",
    "ci_halfwidth",
    "sum_mean_aoi",
    "diff_ratio_pct",
    "mode",
    "remark",
]

_NO_CLOSED_FORM = "no closed form for the globally preemptive policy; simulate instead"


def format_number(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return ""
    if isinstance(value, str):
        return value
    return f"{value:.12g}"


def grid_values(spec: ExperimentSpec) -> list[float | None]:
    """Grid points of the sweep axis; [None] when not sweeping."""
    if spec.axis == "none" or spec.grid is None:
        return [None]
    start, stop, points = spec.grid
    values = [float(v) for v in np.linspace(start, stop, points)]
    if spec.axis == "lambda1":
        total = spec.system.total_rate
        values = [v for v in values if 0.0 < v < total]
    return values


def _config_at(spec: ExperimentSpec, value: float | None) -> SystemConfig:
    base = spec.system
    if value is None:
        return base
    if spec.axis == "theta":
        return SystemConfig(base.arrival_rates, value, base.service)
    total = base.total_rate
    return SystemConfig((value, total - value), base.theta, base.service)


def _policy_object(kind: PolicyKind, theta: float) -> Policy:
    if kind is PolicyKind.PROBABILISTIC:
        return Policy.probabilistic(theta)
    return Policy(kind)


def _analytic_block(cfg: SystemConfig, policies) -> dict[PolicyKind, list | None]:
    """Per-policy per-source analytic metrics; None where no closed form."""
    out: dict[PolicyKind, list | None] = {}
    theta_map = {
        PolicyKind.PROBABILISTIC: cfg.theta,
        PolicyKind.NON_PREEMPTIVE: 0.0,
        PolicyKind.SELF_PREEMPTIVE: 1.0,
    }
    for kind in policies:
        if kind is PolicyKind.GLOBALLY_PREEMPTIVE:
            out[kind] = None
            continue
        eff = SystemConfig(cfg.arrival_rates, theta_map[kind], cfg.service)
        out[kind] = [moments(eff, c, 2) for c in range(cfg.num_sources)]
    return out


def iter_sweep_rows(spec: ExperimentSpec, workers: int = 1) -> Iterator[dict]:
    """Yield CSV rows in deterministic grid/mode/policy/source order."""
    do_analytic = spec.mode in ("analytic", "both")
    do_simulate = spec.mode in ("simulate", "both")
    has_baseline = PolicyKind.PROBABILISTIC in spec.policies

    for value in grid_values(spec):
        cfg = _config_at(spec, value)
        axis_value = "" if value is None else value

        if do_analytic:
            block = _analytic_block(cfg, spec.policies)
            prob_sum = None
            if has_baseline and block[PolicyKind.PROBABILISTIC] is not None:
                prob_sum = sum(m.mean_aoi for m in block[PolicyKind.PROBABILISTIC])
            for kind in spec.policies:
                metrics = block[kind]
                if metrics is None:
                    for c in range(cfg.num_sources):
                        yield {
                            "axis_value": axis_value,
                            "policy": kind.value,
                            "source": c + 1,
                            "mean_aoi": None,
                            "mean_paoi": None,
                            "aoi_m2": None,
                            "paoi_m2": None,
                            "ci_halfwidth": None,
                            "sum_mean_aoi": None,
                            "diff_ratio_pct": None,
                            "mode": "analytic",
                            "remark": _NO_CLOSED_FORM,
                        }
                    continue
                total = sum(m.mean_aoi for m in metrics)
                ratio = None
                if prob_sum is not None:
                    ratio = (total - prob_sum) / prob_sum * 100.0
                for c, m in enumerate(metrics):
                    yield {
                        "axis_value": axis_value,
                        "policy": kind.value,
                        "source": c + 1,
                        "mean_aoi": m.aoi_moments[0],
                        "mean_paoi": m.paoi_moments[0],
                        "aoi_m2": m.aoi_moments[1],
                        "paoi_m2": m.paoi_moments[1],
                        "ci_halfwidth": None,
                        "sum_mean_aoi": total,
                        "diff_ratio_pct": ratio,
                        "mode": "analytic",
                        "remark": "",
                    }

        if do_simulate:
            reports = {
                kind: run(cfg, _policy_object(kind, cfg.theta), spec.sim, workers=workers)
                for kind in spec.policies
            }
            prob_sum = None
            if has_baseline:
                prob_sum = reports[PolicyKind.PROBABILISTIC].sum_time_avg_aoi
            for kind in spec.policies:
                report = reports[kind]
                total = report.sum_time_avg_aoi
                ratio = None
                if prob_sum is not None:
                    ratio = (total - prob_sum) / prob_sum * 100.0
                for c, s in enumerate(report.per_source):
                    yield {
                        "axis_value": axis_value,
                        "policy": kind.value,
                        "source": c + 1,
                        "mean_aoi": s.time_avg_aoi,
                        "mean_paoi": s.paoi_mean,
                        "aoi_m2": s.time_avg_aoi_sq,
                        "paoi_m2": s.paoi_moments[1],
                        "ci_halfwidth": s.aoi_ci_halfwidth,
                        "sum_mean_aoi": total,
                        "diff_ratio_pct": ratio,
                        "mode": "simulate",
                        "remark": "",
                    }


def run_sweep(spec: ExperimentSpec, workers: int = 1) -> list[dict]:
    """All sweep rows as a list (see iter_sweep_rows for streaming)."""
    return list(iter_sweep_rows(spec, workers=workers))


def write_rows(path: str, rows: Iterable[dict]) -> int:
    """Stream rows to CSV, flushing each so aborts keep partial results."""
    count = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        fh.flush()
        for row in rows:
            writer.writerow([format_number(row[col]) for col in CSV_COLUMNS])
            fh.flush()
            count += 1
    return count
