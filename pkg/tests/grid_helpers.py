"""Deterministic randomized configuration grid shared across test modules."""

import numpy as np

from aoiq import (
    Deterministic,
    Exponential,
    Gamma,
    LogNormal,
    SystemConfig,
)

THETAS = (0.0, 0.28, 0.5, 1.0)
SOURCE_COUNTS = (1, 2, 3, 4)


def _distribution(kind: str, rng) -> object:
    if kind == "exponential":
        return Exponential(rng.uniform(0.5, 2.0))
    if kind == "gamma":
        return Gamma(rng.uniform(0.7, 3.0), rng.uniform(0.5, 2.0))
    if kind == "deterministic":
        return Deterministic(rng.uniform(0.3, 1.5))
    return LogNormal(rng.uniform(-1.0, 0.0), rng.uniform(0.5, 1.0))


def config_grid(seed: int = 0) -> list[SystemConfig]:
    """64 configs covering all source counts, thetas and service variants."""
    rng = np.random.default_rng(seed)
    configs = []
    for n_src in SOURCE_COUNTS:
        for theta in THETAS:
            for kind in ("exponential", "gamma", "deterministic", "lognormal"):
                rates = tuple(rng.uniform(0.5, 3.0, n_src))
                configs.append(SystemConfig(rates, theta, _distribution(kind, rng)))
    return configs
