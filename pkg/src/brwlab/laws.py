"""Shipped environment laws used across experiments and tests."""

from __future__ import annotations

from .envmodel import EnvironmentLaw

# Deterministic environments (single component): the population total is
# then a plain branching process, which gives exact oracles.
GW_SUPERCRITICAL = EnvironmentLaw.single([0.25, 0.25, 0.5])   # mean 1.25
ALWAYS_TWO = EnvironmentLaw.single([0.0, 0.0, 1.0])           # mean 2, no deaths
GW_CRITICAL = EnvironmentLaw.single([0.25, 0.5, 0.25])        # mean 1

# Genuinely random environments (two-point mixtures).
SUBCRITICAL_MIX = EnvironmentLaw.mixture([
    (0.5, [0.7, 0.1, 0.2]),   # mean 0.5
    (0.5, [0.6, 0.4]),        # mean 0.4
])
CRITICALISH_MIX = EnvironmentLaw.mixture([
    (0.5, [0.5, 0.0, 0.5]),   # mean 1
    (0.5, [0.0, 1.0]),        # mean 1
])
# Site means 2 or 1/2 with equal weight: annealed mean 1.25, mean log 0.
DOUBLE_OR_HALF = EnvironmentLaw.mixture([
    (0.5, [0.0, 0.0, 1.0]),
    (0.5, [0.5, 0.5]),
])

SHIPPED_LAWS: dict[str, EnvironmentLaw] = {
    "gw_supercritical": GW_SUPERCRITICAL,
    "gw_critical": GW_CRITICAL,
    "always_two": ALWAYS_TWO,
    "subcritical_mix": SUBCRITICAL_MIX,
    "criticalish_mix": CRITICALISH_MIX,
    "double_or_half": DOUBLE_OR_HALF,
}
