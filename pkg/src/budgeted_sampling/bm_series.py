"""Hitting-time statistics of a symmetric level for Brownian motion.

Everything is parameterized by the dimensionless ``lam = T pi^2 / (8 delta^2)``.
For ``lam`` bounded away from zero the residue expansions
``sum (-1)^k exp(-(2k+1)^2 lam) / (2k+1)^p`` converge super-exponentially.
Below ``SMALL_LAMBDA`` they lose all precision to cancellation, so the same
quantities are evaluated from the method-of-images expansion of
``P[tau <= t]``, which converges fast in exactly that regime.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .models import SeriesConfig

__all__ = [
    "SeriesConvergenceError",
    "SMALL_LAMBDA",
    "lambda_from_delta",
    "delta_from_lambda",
    "alternating_series_constant",
    "phi",
    "psi",
    "upsilon",
    "firing_probability",
    "residual_moment_1",
    "residual_moment_2",
    "mgf_first_hitting",
]

SMALL_LAMBDA = 0.05
_DEFAULT = SeriesConfig()
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class SeriesConvergenceError(ArithmeticError):
    pass


def lambda_from_delta(delta: float, T: float) -> float:
    if not (delta > 0 and T > 0):
        raise ValueError("delta and T must be positive")
    return T * math.pi**2 / (8.0 * delta**2)


def delta_from_lambda(lam: float, T: float) -> float:
    if not (lam > 0 and T > 0):
        raise ValueError("lambda and T must be positive")
    return math.sqrt(T * math.pi**2 / (8.0 * lam))


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"lambda must be positive and finite, got {lam}")
    return lam


def _cvz_alternating(a, n: int = 40) -> float:
    # Cohen-Rodriguez Villegas-Zagier acceleration of sum (-1)^k a(k)
    d = (3.0 + math.sqrt(8.0)) ** n
    d = 0.5 * (d + 1.0 / d)
    b, c, s = -1.0, -d, 0.0
    for k in range(n):
        c = b - c
        s += c * a(k)
        b = (k + n) * (k - n) * b / ((k + 0.5) * (k + 1.0))
    return s / d


def alternating_series_constant(power: int, cfg: SeriesConfig = _DEFAULT) -> float:
    """``sum_{k>=0} (-1)^k / (2k+1)^power`` for ``power`` in {1, 3, 5}.

    Sums directly while terms stay above ``cfg.abs_tol``; if ``max_terms``
    runs out first (always for power 1), falls back to an accelerated sum.
    """
    if power not in (1, 3, 5):
        raise ValueError("power must be 1, 3 or 5")
    total = 0.0
    for k in range(cfg.max_terms):
        term = 1.0 / (2 * k + 1) ** power
        if term < cfg.abs_tol:
            return total
        total += term if k % 2 == 0 else -term
    return _cvz_alternating(lambda k: 1.0 / (2 * k + 1) ** power)


def _exp_series(lam: float, power: int, cfg: SeriesConfig) -> float:
    """``sum_k (-1)^k exp(-(2k+1)^2 lam) / (2k+1)^power``."""
    total = 0.0
    for k in range(cfg.max_terms):
        m = 2 * k + 1
        term = math.exp(-m * m * lam) / m**power
        if k % 2:
            total -= term
        else:
            total += term
        if term < cfg.abs_tol:
            return total
    raise SeriesConvergenceError(
        f"series did not reach tolerance {cfg.abs_tol} in {cfg.max_terms} terms at lambda={lam}"
    )


# -- method of images (small lambda) ----------------------------------------


def _p_hit_images(delta: float, t: float, cfg: SeriesConfig) -> float:
    # P[max_{s<=t} |B_s| >= delta] = 4 sum_n (-1)^n Phi(-(2n+1) delta / sqrt t)
    if t <= 0.0:
        return 0.0
    z = delta / math.sqrt(t)
    total = 0.0
    for n in range(cfg.max_terms):
        term = 4.0 * ndtr(-(2 * n + 1) * z)
        total += -term if n % 2 else term
        if term == 0.0 or term < 1e-17 * abs(total):
            return total
    return total


def _residual_1_images(delta: float, T: float, cfg: SeriesConfig) -> float:
    # int_0^T P[tau <= t] dt, closed form per image:
    # int_0^T Phi(-c/sqrt t) dt = (T + c^2) Phi(-c/sqrt T) - c sqrt(T) pdf(c/sqrt T)
    total = 0.0
    for n in range(cfg.max_terms):
        c = (2 * n + 1) * delta
        z = c / math.sqrt(T)
        term = 4.0 * ((T + c * c) * ndtr(-z) - c * math.sqrt(T) * math.exp(-0.5 * z * z) / _SQRT_2PI)
        total += -term if n % 2 else term
        if term == 0.0 or abs(term) < 1e-17 * abs(total):
            break
    return max(total, 0.0)


def _residual_2_images(delta: float, T: float, cfg: SeriesConfig) -> float:
    # E[((T-tau)^+)^2] = 2 int_0^T E[(t-tau)^+] dt, integrated per image in closed form
    total = 0.0
    for n in range(cfg.max_terms):
        c = (2 * n + 1) * delta
        z = c / math.sqrt(T)
        pdf = math.exp(-0.5 * z * z) / _SQRT_2PI
        g = (0.5 * T * T + c * c * T + c**4 / 6.0) * ndtr(-z) - (5.0 * c * T**1.5 + c**3 * math.sqrt(T)) / 6.0 * pdf
        term = 8.0 * g
        total += -term if n % 2 else term
        if term == 0.0 or abs(term) < 1e-17 * abs(total):
            break
    return max(total, 0.0)


# -- public quantities ------------------------------------------------------


def phi(lam: float, cfg: SeriesConfig = _DEFAULT) -> float:
    """Single-sample Delta distortion as a multiple of ``T^2/2``."""
    lam = _check_lambda(lam)
    if lam < SMALL_LAMBDA:
        delta = delta_from_lambda(lam, 1.0)
        return 1.0 - 2.0 * delta**2 * _residual_1_images(delta, 1.0, cfg)
    pi = math.pi
    return 1.0 + pi**4 / (32 * lam**2) - pi**2 / (4 * lam) - pi / lam**2 * _exp_series(lam, 3, cfg)


def psi(lam: float, cfg: SeriesConfig = _DEFAULT) -> float:
    """``-2 E[((T - tau)^+)^2] / T^2``; lies in ``[-2, 0]``."""
    lam = _check_lambda(lam)
    if lam < SMALL_LAMBDA:
        delta = delta_from_lambda(lam, 1.0)
        return -2.0 * _residual_2_images(delta, 1.0, cfg)
    pi = math.pi
    return (
        -5 * pi**4 / (96 * lam**2)
        + pi**2 / (2 * lam)
        - 2.0
        + 16.0 / (pi * lam**2) * _exp_series(lam, 5, cfg)
    )


def upsilon(lam: float, alpha: float, cfg: SeriesConfig = _DEFAULT) -> float:
    """Stage cost with terminal weight ``alpha``, as a multiple of ``T^2/2``."""
    return phi(lam, cfg) + (0.5 - alpha) * psi(lam, cfg)


def firing_probability(lam: float, cfg: SeriesConfig = _DEFAULT) -> float:
    """``P[tau_delta <= T]``."""
    lam = _check_lambda(lam)
    if lam < SMALL_LAMBDA:
        p = _p_hit_images(delta_from_lambda(lam, 1.0), 1.0, cfg)
    else:
        p = 1.0 - 4.0 / math.pi * _exp_series(lam, 1, cfg)
    return min(max(p, 0.0), 1.0)


def residual_moment_1(delta: float, T: float, cfg: SeriesConfig = _DEFAULT) -> float:
    """``E[(T - tau_delta)^+]`` from the residues at ``s_k = -(2k+1)^2 pi^2 / (8 delta^2)``."""
    lam = lambda_from_delta(delta, T)
    if lam < SMALL_LAMBDA:
        return _residual_1_images(delta, T, cfg)
    c1 = alternating_series_constant(1, cfg)
    c3 = alternating_series_constant(3, cfg)
    # sum_k (-1)^k (exp(-m lam) - 1 + m lam) / (2k+1)^3 with m = (2k+1)^2
    inner = _exp_series(lam, 3, cfg) - c3 + lam * c1
    return 4.0 * T / (math.pi * lam) * inner


def residual_moment_2(delta: float, T: float, cfg: SeriesConfig = _DEFAULT) -> float:
    """``E[((T - tau_delta)^+)^2]`` from the same residues."""
    lam = lambda_from_delta(delta, T)
    if lam < SMALL_LAMBDA:
        return _residual_2_images(delta, T, cfg)
    c1 = alternating_series_constant(1, cfg)
    c3 = alternating_series_constant(3, cfg)
    c5 = alternating_series_constant(5, cfg)
    inner = _exp_series(lam, 5, cfg) - c5 + lam * c3 - 0.5 * lam**2 * c1
    return -8.0 * T**2 / (math.pi * lam**2) * inner


def mgf_first_hitting(s: float, delta: float, w0: float = 0.0) -> float:
    """``E[exp(-s tau)]`` for the exit time of ``[-delta, delta]`` from ``w0``."""
    if s < 0:
        raise ValueError("s must be >= 0")
    if delta <= 0:
        raise ValueError("delta must be > 0")
    if abs(w0) > delta:
        raise ValueError(f"|w0|={abs(w0)} exceeds delta={delta}")
    r = math.sqrt(2.0 * s)
    if r * delta > 700.0:
        u, v = abs(w0) * r, delta * r
        return math.exp(u - v) * (1.0 + math.exp(-2.0 * u)) / (1.0 + math.exp(-2.0 * v))
    return math.cosh(w0 * r) / math.cosh(delta * r)


def phi_grid(lams: np.ndarray, cfg: SeriesConfig = _DEFAULT) -> np.ndarray:
    return np.array([phi(x, cfg) for x in np.asarray(lams, dtype=float)])


def psi_grid(lams: np.ndarray, cfg: SeriesConfig = _DEFAULT) -> np.ndarray:
    return np.array([psi(x, cfg) for x in np.asarray(lams, dtype=float)])
