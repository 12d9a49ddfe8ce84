"""Sampling policies for Brownian motion under a budget of N samples.

All distortions are reported as dimensionless coefficients multiplying
``T^2 / 2``; the Brownian problem is scale free so the same coefficients
hold for any horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import bm_series
from .models import DeltaThresholds, OptimalEnvelope, PolicyArtifact, SeriesConfig, UniformDeterministic

__all__ = [
    "OptimizerConfig",
    "OptimizerError",
    "BmPolicyResult",
    "deterministic_policy",
    "delta_recursion",
    "delta_expected_samples",
    "delta_policy_coefficient",
    "snell_constant",
    "optimal_envelope_recursion",
]


class OptimizerError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    lam_min: float = 1e-2
    lam_max: float = 1e2
    n_grid: int = 400
    rel_tol: float = 1e-8

    def grid(self) -> np.ndarray:
        return np.logspace(math.log10(self.lam_min), math.log10(self.lam_max), self.n_grid)


@dataclass(frozen=True)
class BmPolicyResult:
    policy: PolicyArtifact
    analytic_distortion: float  # coefficient of T^2/2
    expected_samples: float

    def __post_init__(self) -> None:
        if not 0.0 < self.analytic_distortion <= 1.0:
            raise ValueError(f"distortion coefficient {self.analytic_distortion} outside (0, 1]")
        if not 0.0 <= self.expected_samples <= self.policy.budget:
            raise ValueError("expected_samples outside [0, N]")

    def absolute_distortion(self, T: float) -> float:
        return self.analytic_distortion * 0.5 * T * T


def _check_budget(N: int) -> None:
    if int(N) != N or N < 1:
        raise ValueError(f"budget N must be an integer >= 1, got {N}")


def deterministic_policy(T: float, N: int) -> BmPolicyResult:
    """Evenly spaced samples ``i T / (N+1)``; coefficient ``1 / (N+1)``."""
    _check_budget(N)
    if not T > 0:
        raise ValueError("T must be > 0")
    times = tuple(i * T / (N + 1) for i in range(1, N + 1))
    return BmPolicyResult(UniformDeterministic(N, times=times, horizon=T), 1.0 / (N + 1), float(N))


def _minimize_stage(alpha: float, cfg: SeriesConfig, opt: OptimizerConfig) -> tuple[float, float]:
    """Minimize ``phi + (1/2 - alpha) psi`` over lambda; returns (lambda*, value)."""
    kappa = 0.5 - alpha

    def f(lam: float) -> float:
        return bm_series.phi(lam, cfg) + kappa * bm_series.psi(lam, cfg)

    grid = opt.grid()
    values = np.array([f(x) for x in grid])
    i = int(np.argmin(values))
    if i == 0 or i == len(grid) - 1:
        raise OptimizerError(
            f"stage objective has no interior minimum on lambda in [{grid[0]:.3g}, {grid[-1]:.3g}] "
            f"(alpha={alpha:.6g}); widen OptimizerConfig bounds"
        )
    lo, mid, hi = grid[i - 1], grid[i], grid[i + 1]
    # golden section on log(lambda): the grid is log-spaced
    res = optimize.minimize_scalar(
        lambda u: f(math.exp(u)),
        bracket=(math.log(lo), math.log(mid), math.log(hi)),
        method="golden",
        tol=opt.rel_tol,
    )
    lam = math.exp(res.x)
    val = f(lam)
    if val > values[i]:
        lam, val = float(mid), float(values[i])
    return lam, val


DELTA_CONVENTIONS = ("published", "consistent")


def delta_recursion(
    N: int,
    cfg: SeriesConfig | None = None,
    opt: OptimizerConfig | None = None,
    convention: str = "published",
) -> BmPolicyResult:
    """Optimal multi-stage Delta thresholds.

    ``published``: ``c_k = min_lam phi(lam) + (1/2 - c_{k-1}) psi(lam)``
    seeded with ``c_0 = 1/2`` so that ``c_1`` minimizes ``phi`` alone. This
    reproduces the widely quoted coefficient table.

    ``consistent``: the continuation after a sample costs
    ``c_{k-1} (T - tau)^2 / 2``, so the terminal weight is ``c_{k-1} / 2`` and
    the seed is the no-sample coefficient ``c_0 = 1``. These coefficients are
    the true distortions of the resulting policies (Monte Carlo agrees); the
    published ones overstate them for ``N >= 2``.

    The stage with ``k`` samples left fires at ``|e| = rho_k sqrt(T - t_prev)``.
    """
    _check_budget(N)
    if convention not in DELTA_CONVENTIONS:
        raise ValueError(f"convention must be one of {DELTA_CONVENTIONS}")
    cfg = cfg or SeriesConfig()
    opt = opt or OptimizerConfig()
    published = convention == "published"
    c_prev = 0.5 if published else 1.0
    cs, lams, rhos = [], [], []
    for _ in range(N):
        lam, c = _minimize_stage(c_prev if published else 0.5 * c_prev, cfg, opt)
        cs.append(c)
        lams.append(lam)
        rhos.append(math.pi / (2.0 * math.sqrt(2.0 * lam)))
        c_prev = c
    expected = delta_expected_samples(N, lams, cfg)
    policy = DeltaThresholds(N, rho=tuple(rhos), c=tuple(cs), lambda_star=tuple(lams))
    return BmPolicyResult(policy, cs[-1], expected[-1])


def delta_policy_coefficient(rhos, cfg: SeriesConfig | None = None) -> list[float]:
    """True distortion coefficients of a Delta policy with fixed ``rho_1..rho_N``.

    Entry ``k-1`` is the cost (multiple of ``T^2/2``) with ``k`` samples left.
    """
    cfg = cfg or SeriesConfig()
    out, c_prev = [], 1.0
    for rho in rhos:
        if not rho > 0:
            raise ValueError("rho entries must be > 0")
        lam = math.pi**2 / (8.0 * rho * rho)
        c_prev = bm_series.phi(lam, cfg) + 0.5 * (1.0 - c_prev) * bm_series.psi(lam, cfg)
        out.append(c_prev)
    return out


def delta_expected_samples(N: int, lambda_stars, cfg: SeriesConfig | None = None) -> list[float]:
    """``E[Xi_k] = (1 + E[Xi_{k-1}]) P[tau_k <= T]`` for ``k = 1..N``."""
    cfg = cfg or SeriesConfig()
    if len(lambda_stars) < N:
        raise ValueError("need one lambda* per stage")
    out, prev = [], 0.0
    for k in range(N):
        prev = (1.0 + prev) * bm_series.firing_probability(lambda_stars[k], cfg)
        out.append(prev)
    return out


def snell_constant(beta: float) -> float:
    """Constant ``A`` making ``g - 2 x^2 (T-t) - (1-beta)(T-t)^2`` a perfect square.

    ``g(x, t) = A ((T-t)^2 + 2 x^2 (T-t) + x^4 / 3)`` solves the backward heat
    equation; ``A`` is the smaller root of ``2 A^2 - (5 + beta) A + 3 = 0``.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    s = 5.0 + beta
    A = (s - math.sqrt(s * s - 24.0)) / 4.0
    # quadratic form in (x^2, T-t): coefficients A/3, 2A-2, A-1+beta
    disc = (2 * A - 2) ** 2 - 4 * (A / 3.0) * (A - 1.0 + beta)
    if abs(disc) > 1e-12:
        raise ArithmeticError(f"perfect-square check failed, discriminant {disc:.3e}")
    return A


def optimal_envelope_recursion(N: int) -> BmPolicyResult:
    """Optimal multiple-stopping envelopes.

    ``theta_k = 1 - A(theta_{k-1})`` from ``theta_0 = 1`` and
    ``gamma_k = sqrt(3 (theta_{k-1} - theta_k) / (1 - theta_k))``. With k
    samples left the sampler fires once ``|e|^2 >= gamma_k (T - t)``.
    """
    _check_budget(N)
    theta = [1.0]
    gamma = []
    for _ in range(N):
        prev = theta[-1]
        cur = 1.0 - snell_constant(prev)
        theta.append(cur)
        gamma.append(math.sqrt(3.0 * (prev - cur) / (1.0 - cur)))
    policy = OptimalEnvelope(N, theta=tuple(theta), gamma=tuple(gamma))
    # the envelope closes at T, so every budgeted sample fires before T a.s.
    return BmPolicyResult(policy, theta[-1], float(N))
