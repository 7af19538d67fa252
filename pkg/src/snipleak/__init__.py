"""Deterministic testbed for desktop search result integration attacks.

Reconstructs a desktop search tool that splices local results into web
search pages, two published exfiltration attacks against it, and the
mitigations that narrow the leak step by step.
"""

from .harness import (
    FIXTURE_CORPUS,
    ConfigError,
    LeakClass,
    LeakReport,
    ScenarioConfig,
    attack_matrix,
    build_runtime,
    run_scenario,
)
from .searchcore import MitigationMode

__all__ = [
    "FIXTURE_CORPUS",
    "ConfigError",
    "LeakClass",
    "LeakReport",
    "MitigationMode",
    "ScenarioConfig",
    "attack_matrix",
    "build_runtime",
    "run_scenario",
]

__version__ = "0.1.0"
