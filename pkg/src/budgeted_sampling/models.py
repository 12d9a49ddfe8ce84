"""Shared domain records and the MMSE reconstruction between samples.

Every policy acts on the error signal ``e_t = x_t - xhat_t`` so the same
policy types serve Brownian motion and the Ornstein-Uhlenbeck process.
The diffusion coefficient is fixed at 1; a process with diffusion ``b``
must be run in rescaled time ``t / b**2`` before using this package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

__all__ = [
    "ProcessKind",
    "ProcessModel",
    "SeriesConfig",
    "PolicyArtifact",
    "UniformDeterministic",
    "DeltaThresholds",
    "OptimalEnvelope",
    "GriddedThresholds",
    "SimulationReport",
    "mmse_reconstruct",
    "normalize_ou",
    "policy_to_json",
    "policy_from_json",
    "policy_to_dict",
    "policy_from_dict",
]


class ProcessKind(str, Enum):
    BROWNIAN = "bm"
    OU = "ou"


@dataclass(frozen=True)
class ProcessModel:
    """Signal law ``dx = a x dt + dW`` on ``[0, horizon_T]``.

    ``drift_a < 0`` is the stable (mean-reverting) case.
    """

    kind: ProcessKind = ProcessKind.BROWNIAN
    drift_a: float = 0.0
    horizon_T: float = 1.0
    initial_state: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ProcessKind(self.kind))
        if not (self.horizon_T > 0 and math.isfinite(self.horizon_T)):
            raise ValueError(f"horizon_T must be positive and finite, got {self.horizon_T}")
        if self.kind is ProcessKind.BROWNIAN and self.drift_a != 0.0:
            raise ValueError("Brownian motion has drift_a = 0")
        if not math.isfinite(self.drift_a):
            raise ValueError("drift_a must be finite")

    @classmethod
    def brownian(cls, T: float = 1.0, x0: float = 0.0) -> ProcessModel:
        return cls(ProcessKind.BROWNIAN, 0.0, T, x0)

    @classmethod
    def ou(cls, a: float, T: float = 1.0, x0: float = 0.0) -> ProcessModel:
        return cls(ProcessKind.OU, a, T, x0)

    @property
    def a_bar(self) -> float:
        return normalize_ou(self.drift_a, self.horizon_T)


@dataclass(frozen=True)
class SeriesConfig:
    abs_tol: float = 1e-12
    max_terms: int = 200

    def __post_init__(self) -> None:
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be > 0")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


# -- policies ---------------------------------------------------------------


def _check_coeffs(name: str, values: Sequence[float]) -> tuple[float, ...]:
    arr = tuple(float(v) for v in values)
    for v in arr:
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"{name} entries must be finite and >= 0, got {v}")
    return arr


@dataclass(frozen=True)
class PolicyArtifact:
    budget: int

    kind = "abstract"

    def __post_init__(self) -> None:
        if int(self.budget) != self.budget or self.budget < 1:
            raise ValueError(f"budget must be an integer >= 1, got {self.budget}")

    @property
    def policy_id(self) -> str:
        return f"{self.kind}-N{self.budget}"


@dataclass(frozen=True)
class UniformDeterministic(PolicyArtifact):
    """Fixed sample times, absolute time units."""

    times: tuple[float, ...] = ()
    horizon: float = 1.0

    kind = "uniform"

    def __post_init__(self) -> None:
        super().__post_init__()
        times = _check_coeffs("times", self.times)
        object.__setattr__(self, "times", times)
        if len(times) != self.budget:
            raise ValueError("need exactly `budget` sample times")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("sample times must be strictly increasing")
        if times and (times[0] <= 0 or times[-1] > self.horizon):
            raise ValueError("sample times must lie in (0, horizon]")


@dataclass(frozen=True)
class DeltaThresholds(PolicyArtifact):
    """Brownian Delta sampler; stage with k samples left uses ``rho[k-1]*sqrt(time left)``."""

    rho: tuple[float, ...] = ()
    c: tuple[float, ...] = ()
    lambda_star: tuple[float, ...] = ()

    kind = "delta"

    def __post_init__(self) -> None:
        super().__post_init__()
        for name in ("rho", "c", "lambda_star"):
            object.__setattr__(self, name, _check_coeffs(name, getattr(self, name)))
        if len(self.rho) != self.budget:
            raise ValueError("rho must have length `budget`")


@dataclass(frozen=True)
class OptimalEnvelope(PolicyArtifact):
    """Brownian optimal envelopes ``|e| = sqrt(gamma[k-1] (T - t))`` with k samples left."""

    theta: tuple[float, ...] = ()
    gamma: tuple[float, ...] = ()

    kind = "envelope"

    def __post_init__(self) -> None:
        super().__post_init__()
        theta = _check_coeffs("theta", self.theta)
        gamma = _check_coeffs("gamma", self.gamma)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "gamma", gamma)
        if len(theta) != self.budget + 1 or len(gamma) != self.budget:
            raise ValueError("theta needs N+1 entries and gamma N entries")
        if theta[0] != 1.0:
            raise ValueError("theta[0] must be 1")
        if any(b >= a for a, b in zip(theta, theta[1:])):
            raise ValueError("theta must be strictly decreasing")


@dataclass(frozen=True)
class GriddedThresholds(PolicyArtifact):
    """Threshold table on the normalized horizon ``[0, 1]``.

    ``thresholds[k-1][j]`` applies when k samples remain. States are in
    normalized units ``x / sqrt(T)``. With ``hold_at_sample`` the threshold is
    looked up at the time of the previous sample and held (Delta sampling);
    otherwise it is re-read at every time step (an envelope).
    """

    time_grid: tuple[float, ...] = ()
    thresholds: tuple[tuple[float, ...], ...] = ()
    a_bar: float = 0.0
    hold_at_sample: bool = False

    kind = "gridded"

    def __post_init__(self) -> None:
        super().__post_init__()
        tg = tuple(float(t) for t in self.time_grid)
        object.__setattr__(self, "time_grid", tg)
        rows = tuple(_check_coeffs("thresholds", row) for row in self.thresholds)
        object.__setattr__(self, "thresholds", rows)
        if len(rows) != self.budget:
            raise ValueError("need one threshold row per remaining-budget level")
        if any(b <= a for a, b in zip(tg, tg[1:])):
            raise ValueError("time_grid must be strictly increasing")
        for row in rows:
            if len(row) != len(tg):
                raise ValueError("threshold rows must match the time grid")
            if any(b > a + 1e-9 * max(1.0, a) for a, b in zip(row, row[1:])):
                raise ValueError("threshold rows must be non-increasing in time")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.thresholds, dtype=float)


_POLICY_KINDS = {
    cls.kind: cls for cls in (UniformDeterministic, DeltaThresholds, OptimalEnvelope, GriddedThresholds)
}


def policy_to_dict(policy: PolicyArtifact) -> dict[str, Any]:
    """JSON document ``{kind, budget, coefficients, grid}``."""
    grid = None
    if isinstance(policy, UniformDeterministic):
        coeffs = {"times": list(policy.times), "horizon": policy.horizon}
    elif isinstance(policy, DeltaThresholds):
        coeffs = {"rho": list(policy.rho), "c": list(policy.c), "lambda_star": list(policy.lambda_star)}
    elif isinstance(policy, OptimalEnvelope):
        coeffs = {"theta": list(policy.theta), "gamma": list(policy.gamma)}
    elif isinstance(policy, GriddedThresholds):
        coeffs = {"a_bar": policy.a_bar, "hold_at_sample": policy.hold_at_sample}
        grid = {"time_grid": list(policy.time_grid), "thresholds": [list(r) for r in policy.thresholds]}
    else:
        raise TypeError(f"unknown policy type {type(policy).__name__}")
    return {"kind": policy.kind, "budget": policy.budget, "coefficients": coeffs, "grid": grid}


def policy_from_dict(doc: dict[str, Any]) -> PolicyArtifact:
    try:
        kind = doc["kind"]
        budget = int(doc["budget"])
        coeffs = doc["coefficients"]
        cls = _POLICY_KINDS[kind]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed policy document: {exc}") from exc
    if cls is GriddedThresholds:
        grid = doc.get("grid") or {}
        return GriddedThresholds(
            budget,
            time_grid=tuple(grid.get("time_grid", ())),
            thresholds=tuple(tuple(r) for r in grid.get("thresholds", ())),
            a_bar=float(coeffs.get("a_bar", 0.0)),
            hold_at_sample=bool(coeffs.get("hold_at_sample", False)),
        )
    if cls is UniformDeterministic:
        return UniformDeterministic(budget, times=tuple(coeffs["times"]), horizon=float(coeffs["horizon"]))
    return cls(budget, **{k: tuple(v) for k, v in coeffs.items()})


def policy_to_json(policy: PolicyArtifact) -> str:
    return json.dumps(policy_to_dict(policy), indent=2, sort_keys=True)


def policy_from_json(text: str) -> PolicyArtifact:
    return policy_from_dict(json.loads(text))


@dataclass(frozen=True)
class SimulationReport:
    mean_distortion: float
    std_error: float
    n_paths: int
    mean_samples_used: float
    seed: int
    policy_id: str
    budget: int = 0
    horizon: float = 1.0
    extras: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.std_error < 0:
            raise ValueError("std_error must be >= 0")
        if self.budget and not 0 <= self.mean_samples_used <= self.budget:
            raise ValueError("mean_samples_used outside [0, budget]")

    @property
    def coefficient(self) -> float:
        """Distortion as a multiple of ``T**2 / 2``."""
        return self.mean_distortion / (0.5 * self.horizon**2)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mean_distortion": self.mean_distortion,
            "coefficient": self.coefficient,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "mean_samples_used": self.mean_samples_used,
            "seed": self.seed,
            "policy_id": self.policy_id,
            "budget": self.budget,
            "horizon": self.horizon,
            "extras": dict(self.extras),
        }


# -- estimator --------------------------------------------------------------


def mmse_reconstruct(model: ProcessModel, samples: Sequence[tuple[float, float]], t: float) -> float:
    """Conditional-mean estimate of ``x_t`` from time-stamped samples.

    Zero-order hold for Brownian motion, exponential hold
    ``x_s * exp(a (t - s))`` for the OU process. Before the first sample the
    estimate propagates ``initial_state``.
    """
    if not 0.0 <= t <= model.horizon_T:
        raise ValueError(f"t={t} outside [0, {model.horizon_T}]")
    last_t, last_x = 0.0, model.initial_state
    prev = -math.inf
    for s, x in samples:
        if s < prev:
            raise ValueError("sample times must be sorted")
        prev = s
        if s > t:
            raise ValueError(f"sample at {s} lies after t={t}")
        last_t, last_x = s, x
    if model.kind is ProcessKind.BROWNIAN or model.drift_a == 0.0:
        return float(last_x)
    return float(last_x * math.exp(model.drift_a * (t - last_t)))


def normalize_ou(a: float, T: float) -> float:
    """Drift on the unit horizon: ``a_bar = a T``.

    Under ``t -> t / T`` and ``x -> x / sqrt(T)`` an OU process on ``[0, T]``
    becomes one on ``[0, 1]`` with drift ``a T``; distortions scale by ``T**2``.
    """
    if not T > 0:
        raise ValueError("T must be > 0")
    return a * T
