"""Sampling policies for the Ornstein-Uhlenbeck process ``dx = a x dt + dW``.

Every solver runs on the unit horizon with drift ``a_bar = a T``; absolute
distortions scale by ``T^2`` and states by ``sqrt(T)``. Negative ``a`` is the
stable case.

Three families are provided:

* uniform deterministic sampling (closed form);
* Delta sampling, whose stage cost comes from a backward parabolic PDE on
  ``[-delta, delta] x [0, 1]`` and whose thresholds are found by scanning;
* the optimal policy, from backward induction on the exact AR(1)
  discretization of the error process.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import interpolate, sparse
from scipy.linalg import lapack
from scipy.special import ndtr

from .models import GriddedThresholds, normalize_ou

__all__ = [
    "GridSpec",
    "ValueGrid",
    "PdeInstabilityError",
    "GridLeakageError",
    "OuDeltaResult",
    "OuDpResult",
    "gain_weight",
    "no_sample_distortion",
    "ou_deterministic",
    "ou_delta_pde",
    "ou_delta_distortion",
    "ou_delta_optimize",
    "ou_dp_optimal",
    "gaussian_kernel",
]

log = logging.getLogger(__name__)

DELTA_SCAN = np.round(np.arange(0.05, 3.0 + 1e-9, 0.025), 10)


class PdeInstabilityError(ArithmeticError):
    pass


class GridLeakageError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Discretization of the unit horizon and the state axis.

    ``n_x`` nodes span ``[-delta, delta]`` for the PDE and
    ``[-x_half_width, x_half_width]`` for the dynamic program.
    """

    m_time: int = 2000
    x_half_width: float = 5.0
    n_x: int = 401

    def __post_init__(self) -> None:
        if self.m_time < 100:
            raise ValueError("m_time must be >= 100")
        if self.n_x < 201 or self.n_x % 2 == 0:
            raise ValueError("n_x must be odd and >= 201")
        if not self.x_half_width > 0:
            raise ValueError("x_half_width must be > 0")

    @classmethod
    def default_for(cls, a_bar: float, **kw) -> GridSpec:
        """Five standard deviations of the unsampled error at the horizon, spacing at most 0.025."""
        if "x_half_width" not in kw:
            kw["x_half_width"] = 5.0 * max(1.0, math.sqrt(gain_weight(1.0, a_bar)))
        if "n_x" not in kw:
            n = int(math.ceil(2.0 * kw["x_half_width"] / 0.025 - 1e-6)) + 1
            kw["n_x"] = max(401, n + (n % 2 == 0))
        return cls(**kw)


@dataclass
class ValueGrid:
    times: np.ndarray
    states: np.ndarray
    values: np.ndarray  # (time, state)
    thresholds: np.ndarray = field(default_factory=lambda: np.empty(0))

    def value_at_origin(self) -> np.ndarray:
        return self.values[:, len(self.states) // 2]


# -- closed forms -----------------------------------------------------------


def _expm1_over(y: np.ndarray) -> np.ndarray:
    # (e^y - 1) / y
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-8
    safe = np.where(small, 1.0, y)
    return np.where(small, 1.0 + 0.5 * y, np.expm1(safe) / safe)


def _expm1_minus_over_sq(y: np.ndarray) -> np.ndarray:
    # (e^y - 1 - y) / y^2
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-3
    safe = np.where(small, 1.0, y)
    series = 0.5 + y / 6.0 + y * y / 24.0 + y**3 / 120.0
    return np.where(small, series, (np.expm1(safe) - safe) / (safe * safe))


def gain_weight(h, a: float):
    """``int_0^h exp(2 a u) du``: the error variance after ``h`` time units."""
    h = np.asarray(h, dtype=float)
    out = h * _expm1_over(2.0 * a * h)
    return float(out) if out.ndim == 0 else out


def no_sample_distortion(h, a: float):
    """``int_0^h gain_weight(u) du``: distortion over ``h`` with no sample."""
    h = np.asarray(h, dtype=float)
    out = h * h * _expm1_minus_over_sq(2.0 * a * h)
    return float(out) if out.ndim == 0 else out


def ou_deterministic(a: float, T: float, N: int) -> float:
    """Distortion of ``N`` evenly spaced samples on ``[0, T]``.

    Each of the ``N + 1`` gaps of length ``h = T / (N+1)`` contributes
    ``(e^{2ah} - 1 - 2ah) / (4 a^2)``; ``a = 0`` gives ``T^2 / (2 (N+1))``.
    """
    if int(N) != N or N < 1:
        raise ValueError("N must be an integer >= 1")
    if not T > 0:
        raise ValueError("T must be > 0")
    return (N + 1) * no_sample_distortion(T / (N + 1), a)


# -- backward parabolic solver ---------------------------------------------


def _solve_backward(
    a: float,
    deltas: np.ndarray,
    grid: GridSpec,
    source: Callable[[float, np.ndarray], np.ndarray],
    boundary: Callable[[float], np.ndarray],
    keep_all: bool = False,
):
    """Solve ``u_t + (1/2) u_xx + a x u_x + source = 0`` backward from ``u(., 1) = 0``.

    One independent problem per entry of ``deltas`` on ``[-delta, delta]``
    with Dirichlet data ``boundary(t)``; all are stacked into one
    block-tridiagonal system. Crank-Nicolson after two backward-Euler
    half steps. Returns ``u(0, t)`` for every time level (shape
    ``(m_time + 1, B)``) and, with ``keep_all``, the full solution.
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    B, nx, M = len(deltas), grid.n_x, grid.m_time
    n_int = nx - 2
    h = 2.0 * deltas / (nx - 1)  # (B,)
    X = -deltas[:, None] + h[:, None] * np.arange(1, nx - 1)[None, :]  # interior nodes
    lo = 0.5 / h[:, None] ** 2 - a * X / (2.0 * h[:, None])
    up = 0.5 / h[:, None] ** 2 + a * X / (2.0 * h[:, None])
    di = np.broadcast_to(-1.0 / h[:, None] ** 2, X.shape)
    dt = 1.0 / M
    centre = n_int // 2

    def factor(theta_dt: float):
        dl = -theta_dt * lo[:, 1:]
        du = -theta_dt * up[:, :-1]
        # zero the couplings between stacked blocks
        dl = np.concatenate([dl, np.zeros((B, 1))], axis=1).ravel()[:-1]
        du = np.concatenate([du, np.zeros((B, 1))], axis=1).ravel()[:-1]
        d = (1.0 - theta_dt * di).ravel()
        dlf, df, duf, du2, ipiv, info = lapack.dgttrf(dl, d, du)
        if info != 0:
            raise PdeInstabilityError(f"singular time-step matrix (info={info})")
        return dlf, df, duf, du2, ipiv

    def apply_L(u: np.ndarray, bval: np.ndarray) -> np.ndarray:
        left = np.concatenate([bval[:, None], u[:, :-1]], axis=1)
        right = np.concatenate([u[:, 1:], bval[:, None]], axis=1)
        return lo * left + di * u + up * right

    def step(u, t_new, t_old, dt_, theta, fac):
        b_new, b_old = boundary(t_new), boundary(t_old)
        rhs = u + (1.0 - theta) * dt_ * apply_L(u, b_old)
        rhs = rhs + dt_ * (theta * source(t_new, X) + (1.0 - theta) * source(t_old, X))
        rhs[:, 0] += theta * dt_ * lo[:, 0] * b_new
        rhs[:, -1] += theta * dt_ * up[:, -1] * b_new
        sol, info = lapack.dgttrs(*fac[:4], fac[4], rhs.ravel())
        if info != 0:
            raise PdeInstabilityError(f"tridiagonal solve failed (info={info})")
        return sol.reshape(B, n_int)

    fac_be = factor(0.5 * dt)
    fac_cn = factor(0.5 * dt)  # theta * dt with theta = 1/2
    u = np.zeros((B, n_int))
    origin = np.empty((M + 1, B))
    origin[M] = 0.0
    full = np.empty((M + 1, B, nx)) if keep_all else None
    if keep_all:
        full[M] = 0.0
        full[M, :, 0] = full[M, :, -1] = boundary(1.0)
    for n in range(M - 1, -1, -1):
        t_old, t_new = (n + 1) * dt, n * dt
        if n >= M - 1:
            # Rannacher start: two backward-Euler half steps damp the corner
            t_mid = t_old - 0.5 * dt
            u = step(u, t_mid, t_old, 0.5 * dt, 1.0, fac_be)
            u = step(u, t_new, t_mid, 0.5 * dt, 1.0, fac_be)
        else:
            u = step(u, t_new, t_old, dt, 0.5, fac_cn)
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 1e12:
            raise PdeInstabilityError(
                f"PDE solution blew up at t={t_new:.4g} on grid m_time={M}, n_x={nx}; "
                "use more time steps"
            )
        origin[n] = u[:, centre]
        if keep_all:
            full[n, :, 1:-1] = u
            full[n, :, 0] = full[n, :, -1] = boundary(t_new)
    return origin, full


def ou_delta_pde(a: float, delta: float, grid: GridSpec | None = None) -> ValueGrid:
    """``U(x, t) = E[int_t^zeta e^{-2 a s} ds | x_t = x]`` on ``[-delta, delta] x [0, 1]``.

    ``zeta`` is the exit time of ``[-delta, delta]`` capped at 1, so ``U``
    vanishes on the lateral boundary and at ``t = 1``.
    """
    if not delta > 0:
        raise ValueError("delta must be > 0")
    grid = grid or GridSpec()
    _, full = _solve_backward(
        a,
        np.array([delta]),
        grid,
        source=lambda t, X: np.exp(-2.0 * a * t) * np.ones_like(X),
        boundary=lambda t: np.zeros(1),
        keep_all=True,
    )
    times = np.linspace(0.0, 1.0, grid.m_time + 1)
    states = np.linspace(-delta, delta, grid.n_x)
    return ValueGrid(times, states, full[:, 0, :], np.full(len(times), delta))


Continuation = Callable[[np.ndarray], np.ndarray]


def _stage_distortions(
    a: float, deltas: np.ndarray, grid: GridSpec, continuation: Continuation | None
) -> np.ndarray:
    """Unit-horizon distortion of one Delta stage for each threshold in ``deltas``.

    ``continuation(h)`` is the optimal distortion over the remaining time
    ``h`` once the stage fires (``None``: no samples remain). The cost is
    ``q(1) - delta^2 g(1) + V(0, 0)``, where ``V`` solves the stage PDE with
    source ``delta^2 e^{2a(1-t)}`` and lateral data ``continuation(1-t) - q(1-t)``.
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    d2 = deltas**2

    def source(t, X):
        return (d2 * math.exp(2.0 * a * (1.0 - t)))[:, None] * np.ones_like(X)

    if continuation is None:
        boundary = lambda t: np.zeros(len(deltas))  # noqa: E731
    else:

        def boundary(t):
            h = max(1.0 - t, 0.0)
            return np.full(len(deltas), float(continuation(h)) - no_sample_distortion(h, a))

    origin, _ = _solve_backward(a, deltas, grid, source, boundary)
    return no_sample_distortion(1.0, a) - d2 * gain_weight(1.0, a) + origin[0]


def ou_delta_distortion(
    a: float, delta: float, grid: GridSpec | None = None, continuation: Continuation | None = None
) -> float:
    """Distortion on the unit horizon of a single Delta stage with threshold ``delta``."""
    if not delta > 0:
        raise ValueError("delta must be > 0")
    return float(_stage_distortions(a, np.array([delta]), grid or GridSpec(), continuation)[0])


@dataclass
class OuDeltaResult:
    policy: GriddedThresholds
    distortion: float  # absolute, horizon T
    stage_distortions: list[float]  # unit horizon, budget 1..N
    delta_star: list[float]  # first threshold with k samples left, unit horizon
    scans: list[np.ndarray]  # per stage: rows (delta, distortion) at the full horizon
    a_bar: float
    horizon: float

    @property
    def coefficient(self) -> float:
        return self.distortion / (0.5 * self.horizon**2)


def _optimize_stage(
    b: float, grid: GridSpec, continuation: Continuation | None
) -> tuple[float, float, np.ndarray]:
    coarse = _stage_distortions(b, DELTA_SCAN, grid, continuation)
    i = int(np.argmin(coarse))
    # the cost should fall then rise; anything else is reported and the global minimum kept.
    # It is a difference of O(delta^2 g(1)) terms, so PDE error is scaled accordingly.
    tol = 1e-6 * (1.0 + DELTA_SCAN[-1] ** 2 * abs(gain_weight(1.0, b)))
    rises = np.diff(coarse[i:]) < -tol
    falls = np.diff(coarse[: i + 1]) > tol
    if rises.any() or falls.any():
        warnings.warn(f"Delta scan at a={b:.4g} is not unimodal; keeping the global minimum", RuntimeWarning)
    lo = DELTA_SCAN[max(i - 1, 0)]
    hi = DELTA_SCAN[min(i + 1, len(DELTA_SCAN) - 1)]
    fine_d = np.linspace(lo, hi, 41)
    fine = _stage_distortions(b, fine_d, grid, continuation)
    j = int(np.argmin(fine))
    d_best, v_best = float(fine_d[j]), float(fine[j])
    if 0 < j < len(fine) - 1:
        # vertex of the parabola through the three best points
        x0, x1, x2 = fine_d[j - 1 : j + 2]
        y0, y1, y2 = fine[j - 1 : j + 2]
        denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
        A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
        Bc = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
        if A > 0:
            xv = -Bc / (2 * A)
            if x0 <= xv <= x2:
                v = float(_stage_distortions(b, np.array([xv]), grid, continuation)[0])
                if v <= v_best:
                    d_best, v_best = float(xv), v
    scan = np.column_stack([DELTA_SCAN, coarse])
    return d_best, v_best, scan


def ou_delta_optimize(
    a: float, N: int, grid: GridSpec | None = None, T: float = 1.0, n_drift: int = 11, n_policy_times: int = 101
) -> OuDeltaResult:
    """Optimal multi-stage Delta sampling for the OU process.

    The stage with ``k`` samples left fires when ``|e|`` reaches a level
    chosen at the previous sample from the time remaining ``h``. By scaling,
    its optimal cost is ``h^2 j_k(a h)`` and its level ``sqrt(h) d_k(a h)``,
    so each stage is optimized on ``n_drift`` drifts spanning ``[0, a]``
    (innermost stage first) and interpolated in between.
    """
    if int(N) != N or N < 1:
        raise ValueError("N must be an integer >= 1")
    a_bar = normalize_ou(a, T)
    grid = grid or GridSpec()
    s = np.linspace(0.0, 1.0, n_drift)
    drifts = a_bar * s
    j_tables: list[np.ndarray] = []
    d_tables: list[np.ndarray] = []
    stage_costs, delta_star, scans = [], [], []
    for k in range(1, N + 1):
        if k == 1:
            cont_for = lambda b: None  # noqa: E731
        else:
            prev = _drift_interpolant(drifts, j_tables[-1])

            def cont_for(b, prev=prev):
                return lambda h: h * h * prev(b * h)

        js, ds = np.empty(n_drift), np.empty(n_drift)
        cache: dict[float, tuple[float, float, np.ndarray]] = {}
        for idx, b in enumerate(drifts):
            key = float(b)
            if key not in cache:
                cache[key] = _optimize_stage(key, grid, cont_for(key))
            ds[idx], js[idx], scan = cache[key]
        j_tables.append(js)
        d_tables.append(ds)
        stage_costs.append(float(js[-1]))
        delta_star.append(float(ds[-1]))
        scans.append(cache[float(drifts[-1])][2])
        log.info("OU Delta stage %d: delta*=%.4f cost=%.6f", k, ds[-1], js[-1])
    for k in range(1, N):
        if stage_costs[k] > stage_costs[k - 1] + 1e-9:
            warnings.warn("Delta distortion increased with budget; check the grid", RuntimeWarning)

    t_grid = np.linspace(0.0, 1.0, n_policy_times)
    h = 1.0 - t_grid
    rows = []
    for k in range(N):
        dk = _drift_interpolant(drifts, d_tables[k])
        row = np.sqrt(h) * dk(a_bar * h)
        row[-1] = 0.0
        rows.append(tuple(np.minimum.accumulate(row)))
    policy = GriddedThresholds(
        N, time_grid=tuple(t_grid), thresholds=tuple(rows), a_bar=a_bar, hold_at_sample=True
    )
    return OuDeltaResult(policy, stage_costs[-1] * T * T, stage_costs, delta_star, scans, a_bar, T)


def _drift_interpolant(drifts: np.ndarray, values: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    if np.all(drifts == drifts[0]):
        c = float(values[0])
        return lambda b: np.full(np.shape(b), c) if np.ndim(b) else c
    order = np.argsort(drifts)
    spline = interpolate.CubicSpline(drifts[order], values[order])
    return spline


# -- dynamic programming ----------------------------------------------------


def gaussian_kernel(states: np.ndarray, mean_factor: float, step_var: float, renormalize: bool = True):
    """Transition matrix of ``x' = mean_factor x + N(0, step_var)`` on a uniform grid.

    Trapezoidal weights ``pdf(x_j) dx``; for a smooth integrand this is
    spectrally accurate once the step deviation is about one grid spacing.
    Returns a CSR matrix and the row sums before renormalization.
    """
    dx = states[1] - states[0]
    sd = math.sqrt(step_var)
    half = int(math.ceil(9.0 * sd / dx)) + 1
    n = len(states)
    mu = mean_factor * states
    rows, cols, vals = [], [], []
    centre_idx = np.rint((mu - states[0]) / dx).astype(int)
    offsets = np.arange(-half, half + 1)
    J = centre_idx[:, None] + offsets[None, :]
    I = np.broadcast_to(np.arange(n)[:, None], J.shape)
    ok = (J >= 0) & (J < n)
    Jc = np.clip(J, 0, n - 1)
    z = (states[Jc] - mu[:, None]) / sd
    w = np.where(ok, np.exp(-0.5 * z * z) * dx / (sd * math.sqrt(2 * math.pi)), 0.0)
    row_sums = w.sum(axis=1)
    if renormalize:
        w = w / row_sums[:, None]
    rows, cols, vals = I[ok], J[ok], w[ok]
    K = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return K, row_sums


@dataclass
class OuDpResult:
    policy: GriddedThresholds
    distortion: float  # absolute, horizon T
    level_distortions: list[float]  # unit horizon, budget 1..N
    value_grids: list[ValueGrid]
    kernel_row_sums: np.ndarray
    a_bar: float
    horizon: float

    @property
    def coefficient(self) -> float:
        return self.distortion / (0.5 * self.horizon**2)


def _crossing(d: np.ndarray, x: np.ndarray, centre: int) -> float:
    # smallest |x| >= 0 with stop - continue >= 0, linear between nodes
    half = d[centre:]
    hit = np.nonzero(half >= 0.0)[0]
    if len(hit) == 0:
        return float(x[-1])
    i = int(hit[0])
    if i == 0:
        return 0.0
    d0, d1 = half[i - 1], half[i]
    x0, x1 = x[centre + i - 1], x[centre + i]
    return float(x0 + (x1 - x0) * (-d0) / (d1 - d0))


def ou_dp_optimal(a: float, N: int, grid: GridSpec | None = None, T: float = 1.0) -> OuDpResult:
    """Optimal N-sample policy by backward induction on the AR(1) chain.

    With ``g(h) = int_0^h e^{2au} du`` the value of ``k`` samples obeys
    ``V^k_n(x) = max(V^{k-1}_n(0) + x^2 g(1 - t_n), E[V^k_{n+1}(x_{n+1}) | x])``
    with ``V^k_M = 0``; the distortion is ``q(1) - V^k_0(0)``. Ties go to
    sampling.
    """
    if int(N) != N or N < 1:
        raise ValueError("N must be an integer >= 1")
    a_bar = normalize_ou(a, T)
    grid = grid or GridSpec.default_for(a_bar)
    M, L = grid.m_time, grid.x_half_width
    states = np.linspace(-L, L, grid.n_x)
    centre = grid.n_x // 2
    dt = 1.0 / M
    # probability the unsampled error leaves the grid before the horizon
    leak = 2.0 * ndtr(-L / math.sqrt(gain_weight(1.0, a_bar)))
    if leak > 1e-3:
        raise GridLeakageError(
            f"state grid +/-{L} loses {leak:.2e} probability mass by the horizon at a_bar={a_bar}; "
            "increase x_half_width"
        )
    K, row_sums = gaussian_kernel(states, math.exp(a_bar * dt), gain_weight(dt, a_bar))
    times = np.linspace(0.0, 1.0, M + 1)
    weights = gain_weight(1.0 - times, a_bar)
    x2 = states * states

    prev_origin = np.zeros(M + 1)  # V^{k-1}_n(0); zero with no samples
    level_costs, grids, rows = [], [], []
    q1 = no_sample_distortion(1.0, a_bar)
    for _ in range(N):
        values = np.empty((M + 1, grid.n_x))
        thr = np.empty(M + 1)
        values[M] = prev_origin[M]
        thr[M] = 0.0
        v = values[M]
        for n in range(M - 1, -1, -1):
            cont = K @ v
            stop = prev_origin[n] + x2 * weights[n]
            v = np.maximum(stop, cont)
            values[n] = v
            thr[n] = _crossing(stop - cont, states, centre)
        level_costs.append(float(q1 - values[0, centre]))
        grids.append(ValueGrid(times, states, values, thr))
        rows.append(thr)
        prev_origin = values[:, centre].copy()

    table = np.vstack(rows)
    # interpolation noise can leave ripples far below the threshold scale
    mono = np.minimum.accumulate(table, axis=1)
    if np.max(table - mono) > 1e-6:
        log.warning("DP thresholds not monotone in time (max ripple %.2e)", float(np.max(table - mono)))
    policy = GriddedThresholds(
        N, time_grid=tuple(times), thresholds=tuple(tuple(r) for r in mono), a_bar=a_bar, hold_at_sample=False
    )
    return OuDpResult(policy, level_costs[-1] * T * T, level_costs, grids, row_sums, a_bar, T)
