"""Optimal sampling of Brownian motion and OU signals under a sample budget."""

from __future__ import annotations

from .bm_policies import (
    BmPolicyResult,
    OptimizerConfig,
    OptimizerError,
    delta_policy_coefficient,
    delta_recursion,
    deterministic_policy,
    optimal_envelope_recursion,
)
from .models import (
    DeltaThresholds,
    GriddedThresholds,
    OptimalEnvelope,
    PolicyArtifact,
    ProcessKind,
    ProcessModel,
    SeriesConfig,
    SimulationReport,
    UniformDeterministic,
    mmse_reconstruct,
    policy_from_json,
    policy_to_json,
)
from .ou_policies import GridSpec, ou_delta_optimize, ou_deterministic, ou_dp_optimal
from .simulator import SimConfig, poisson_demo, simulate_hitting_statistics, simulate_policy

__version__ = "0.1.0"

__all__ = [
    "BmPolicyResult",
    "DeltaThresholds",
    "GridSpec",
    "GriddedThresholds",
    "OptimalEnvelope",
    "OptimizerConfig",
    "OptimizerError",
    "PolicyArtifact",
    "ProcessKind",
    "ProcessModel",
    "SeriesConfig",
    "SimConfig",
    "SimulationReport",
    "UniformDeterministic",
    "delta_policy_coefficient",
    "delta_recursion",
    "deterministic_policy",
    "mmse_reconstruct",
    "optimal_envelope_recursion",
    "ou_delta_optimize",
    "ou_deterministic",
    "ou_dp_optimal",
    "poisson_demo",
    "policy_from_json",
    "policy_to_json",
    "simulate_hitting_statistics",
    "simulate_policy",
]
