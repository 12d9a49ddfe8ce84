"""Monte Carlo oracle for the sampling policies.

Only the error process ``e = x - xhat`` is simulated. Between samples it
follows the exact OU transition ``e' = exp(a dt) e + N(0, g(dt))`` (Brownian
motion is ``a = 0``); at a sample it restarts from zero. The reconstruction
``xhat`` is carried alongside only so that traces can report ``x``.

Continuously monitored policies (Delta, envelopes) detect crossings inside a
step with the Brownian-bridge crossing probability of a linear boundary. When
the step ends beyond the boundary, the crossing time is located by bisecting
the bridge. Gridded envelopes from the dynamic program are monitored only at
grid times, matching the discrete-time problem they solve.

Randomness: paths are processed in fixed blocks of ``BLOCK`` paths. Block
``b`` draws its Gaussian increments from ``SeedSequence(seed,
spawn_key=(b,))`` and the occasional bridge uniforms come from a counter
hash of ``(seed, path, step, draw)``. Results therefore do not depend on
how blocks are distributed over workers.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .models import (
    DeltaThresholds,
    GriddedThresholds,
    OptimalEnvelope,
    PolicyArtifact,
    ProcessKind,
    ProcessModel,
    SimulationReport,
    UniformDeterministic,
)

__all__ = [
    "BLOCK",
    "SimConfig",
    "IncompatiblePolicyError",
    "HittingStatistics",
    "PoissonDemoResult",
    "simulate_policy",
    "simulate_hitting_statistics",
    "poisson_demo",
    "write_trace_csv",
]

log = logging.getLogger(__name__)

BLOCK = 4096
_CHUNK = 128  # time steps per batch of Gaussian draws
_BISECT_DEPTH = 10
_A_BAR_TOL = 1e-4

# policy modes understood by the kernel
_SCHEDULED, _DELTA, _ENVELOPE, _GRID_HOLD, _GRID_DISCRETE = range(5)


class IncompatiblePolicyError(ValueError):
    """Policy family cannot drive the given process model."""


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    dt: float = 1e-4  # as a fraction of the horizon
    seed: int = 0
    antithetic: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ValueError("n_paths must be an integer >= 1")
        if not 0 < self.dt <= 0.01:
            raise ValueError("dt must lie in (0, 0.01] (fraction of the horizon)")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be an unsigned integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


# -- counter-based uniforms ---------------------------------------------------

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)


@njit(cache=True, inline="always")
def _mix(z):
    z = z + _GOLD
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def _uniform(seed, path, step, draw):
    h = _mix(seed ^ _mix(np.uint64(path) ^ _mix(np.uint64(step) * np.uint64(64) + np.uint64(draw))))
    return (np.float64(h >> _S11) + 0.5) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _normal(seed, path, step, draw):
    u1 = _uniform(seed, path, step, draw)
    u2 = _uniform(seed, path, step, draw + 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


# -- kernel -------------------------------------------------------------------


@njit(cache=True)
def _interp(row, grid, t):
    n = grid.shape[0]
    if t <= grid[0]:
        return row[0]
    if t >= grid[n - 1]:
        return row[n - 1]
    i = np.searchsorted(grid, t) - 1
    w = (t - grid[i]) / (grid[i + 1] - grid[i])
    return row[i] * (1.0 - w) + row[i + 1] * w


@njit(cache=True)
def _bound(mode, level, gamma, T, t):
    if mode == _ENVELOPE:
        r = gamma * (T - t)
        return math.sqrt(r) if r > 0.0 else 0.0
    return level


@njit(cache=True)
def _stage(mode, k, tprev, T, coef, rows, tg):
    """(level, gamma) for the stage with ``k`` samples left that began at ``tprev``."""
    if mode == _DELTA:
        return coef[k - 1] * math.sqrt(max(T - tprev, 0.0)), 0.0
    if mode == _ENVELOPE:
        return 0.0, coef[k - 1]
    if mode == _GRID_HOLD:
        return math.sqrt(T) * _interp(rows[k - 1], tg, tprev / T), 0.0
    return 0.0, 0.0


@njit(cache=True)
def _bridge_cross(xa, xb, ba, bb, h):
    """Probabilities that a bridge from xa to xb crosses +b(t) and -b(t)."""
    pu = math.exp(-2.0 * (ba - xa) * (bb - xb) / h)
    pl = math.exp(-2.0 * (ba + xa) * (bb + xb) / h)
    return pu, pl


@njit(cache=True)
def _locate(mode, level, gamma, T, ta, xa, tb, xb, seed, path, step, draw):
    """First crossing in (ta, tb] given that xb lies beyond the boundary."""
    for _ in range(_BISECT_DEPTH):
        tm = 0.5 * (ta + tb)
        xm = 0.5 * (xa + xb) + 0.5 * math.sqrt(tb - ta) * _normal(seed, path, step, draw)
        draw += 2
        bm = _bound(mode, level, gamma, T, tm)
        if abs(xm) >= bm:
            tb, xb = tm, xm
            continue
        ba = _bound(mode, level, gamma, T, ta)
        pu, pl = _bridge_cross(xa, xm, ba, bm, tm - ta)
        u = _uniform(seed, path, step, draw)
        draw += 1
        if u < pu + pl:
            tc = 0.5 * (ta + tm)
            return tc, (1.0 if u < pu else -1.0) * _bound(mode, level, gamma, T, tc), draw
        ta, xa = tm, xm
    tc = 0.5 * (ta + tb)
    return tc, math.copysign(_bound(mode, level, gamma, T, tc), xb), draw


@njit(cache=True, nogil=True)
def _advance(
    Z, j0, tgrid, decay, sd, sched, a, T, mode, coef, rows, tg,
    e, xh, J, left, tprev, nsamp, seed, path0, trace,
):
    n_chunk, P = Z.shape
    n_trace = trace.shape[0]
    for p in range(P):
        ep, xp, Jp, kp, tp, np_ = e[p], xh[p], J[p], left[p], tprev[p], nsamp[p]
        level, gamma = _stage(mode, kp, tp, T, coef, rows, tg) if kp > 0 else (0.0, 0.0)
        for jj in range(n_chunk):
            j = j0 + jj
            t0, t1 = tgrid[j], tgrid[j + 1]
            ta, ea = t0, ep
            eb = decay[j] * ep + sd[j] * Z[jj, p]
            xb_hat = decay[j] * xp
            draw = 0
            while True:
                if kp == 0 or mode == _SCHEDULED or mode == _GRID_DISCRETE:
                    Jp += 0.5 * (ea * ea + eb * eb) * (t1 - ta)
                    fire = False
                    if kp > 0:
                        if mode == _SCHEDULED:
                            fire = sched[j + 1]
                        else:
                            fire = abs(eb) >= math.sqrt(T) * _interp(rows[kp - 1], tg, t1 / T)
                    if fire and t1 < T:
                        xb_hat += eb
                        eb = 0.0
                        kp -= 1
                        np_ += 1
                        tp = t1
                    break
                ba = _bound(mode, level, gamma, T, ta)
                bb = _bound(mode, level, gamma, T, t1)
                if abs(eb) >= bb:
                    tc, ec, draw = _locate(mode, level, gamma, T, ta, ea, t1, eb, seed, path0 + p, j, draw)
                else:
                    pu, pl = _bridge_cross(ea, eb, ba, bb, t1 - ta)
                    if pu + pl < 1e-300:
                        Jp += 0.5 * (ea * ea + eb * eb) * (t1 - ta)
                        break
                    u = _uniform(seed, path0 + p, j, draw)
                    draw += 1
                    if u >= pu + pl:
                        Jp += 0.5 * (ea * ea + eb * eb) * (t1 - ta)
                        break
                    tc = 0.5 * (ta + t1)
                    ec = (1.0 if u < pu else -1.0) * _bound(mode, level, gamma, T, tc)
                # sample at tc: reconstruction jumps by the error, error restarts at zero
                Jp += 0.5 * (ea * ea + ec * ec) * (tc - ta)
                carry = math.exp(a * (t1 - tc)) * ec
                eb -= carry
                xb_hat += carry
                kp -= 1
                np_ += 1
                tp = tc
                ta, ea = tc, 0.0
                if kp > 0:
                    level, gamma = _stage(mode, kp, tp, T, coef, rows, tg)
            ep, xp = eb, xb_hat
            if p < n_trace:
                trace[p, j + 1, 0] = ep + xp
                trace[p, j + 1, 1] = xp
                trace[p, j + 1, 2] = Jp
        e[p], xh[p], J[p], left[p], tprev[p], nsamp[p] = ep, xp, Jp, kp, tp, np_


# -- helpers --------------------------------------------------------------------


def _g(a: float, h):
    """Variance of the OU error after time h."""
    if a == 0.0:
        return np.asarray(h, dtype=float)
    return np.expm1(2.0 * a * np.asarray(h, dtype=float)) / (2.0 * a)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _blocks(n_paths: int) -> list[tuple[int, int]]:
    return [(b, min(BLOCK, n_paths - b * BLOCK)) for b in range((n_paths + BLOCK - 1) // BLOCK)]


def _draw(rng: np.random.Generator, shape: tuple[int, int], antithetic: bool) -> np.ndarray:
    n, P = shape
    if not antithetic:
        return rng.standard_normal(shape)
    half = rng.standard_normal((n, (P + 1) // 2))
    return np.concatenate([half, -half], axis=1)[:, :P]


@dataclass(frozen=True)
class _Plan:
    mode: int
    tgrid: np.ndarray
    sched: np.ndarray
    coef: np.ndarray
    rows: np.ndarray
    tg: np.ndarray


def _time_grid(T: float, dt_frac: float, extra=()) -> np.ndarray:
    m = max(1, int(round(1.0 / dt_frac)))
    grid = np.linspace(0.0, T, m + 1)
    if len(extra):
        grid = np.union1d(grid, np.asarray(extra, dtype=float))
        keep = np.concatenate([[True], np.diff(grid) > 1e-12 * T])
        grid = grid[keep]
        grid[-1] = T
    return grid


def _plan(model: ProcessModel, policy: PolicyArtifact, cfg: SimConfig) -> _Plan:
    T = model.horizon_T
    empty = np.zeros((1, 1))
    none = np.zeros(1)
    if isinstance(policy, UniformDeterministic):
        if not math.isclose(policy.horizon, T, rel_tol=1e-12):
            raise IncompatiblePolicyError(f"policy horizon {policy.horizon} differs from model horizon {T}")
        tgrid = _time_grid(T, cfg.dt, policy.times)
        sched = np.zeros(len(tgrid), dtype=np.bool_)
        idx = np.searchsorted(tgrid, np.asarray(policy.times) - 1e-12 * T)
        sched[idx] = True
        return _Plan(_SCHEDULED, tgrid, sched, none, empty, none)
    sched = np.zeros(1, dtype=np.bool_)
    tgrid = _time_grid(T, cfg.dt)
    if isinstance(policy, (DeltaThresholds, OptimalEnvelope)):
        if model.kind is not ProcessKind.BROWNIAN:
            raise IncompatiblePolicyError(f"{policy.kind} policies are Brownian-only; use a gridded OU policy")
        if isinstance(policy, DeltaThresholds):
            return _Plan(_DELTA, tgrid, sched, np.asarray(policy.rho, float), empty, none)
        return _Plan(_ENVELOPE, tgrid, sched, np.asarray(policy.gamma, float), empty, none)
    if isinstance(policy, GriddedThresholds):
        if abs(policy.a_bar - model.a_bar) > _A_BAR_TOL * max(1.0, abs(model.a_bar)):
            raise IncompatiblePolicyError(
                f"policy computed for a_bar={policy.a_bar:g}, model has a_bar={model.a_bar:g}"
            )
        mode = _GRID_HOLD if policy.hold_at_sample else _GRID_DISCRETE
        return _Plan(mode, tgrid, sched, none, policy.as_array(), np.asarray(policy.time_grid, float))
    raise IncompatiblePolicyError(f"unsupported policy type {type(policy).__name__}")


def _coarseness(plan: _Plan, T: float) -> float:
    """sqrt(dt) relative to the smallest threshold scale of the policy."""
    dt = float(np.max(np.diff(plan.tgrid)))
    if plan.mode == _DELTA:
        scale = float(np.min(plan.coef)) * math.sqrt(T)
    elif plan.mode == _ENVELOPE:
        scale = math.sqrt(float(np.min(plan.coef)) * T)
    elif plan.mode in (_GRID_HOLD, _GRID_DISCRETE):
        mid = plan.rows[:, plan.tg <= 0.5]
        scale = float(np.min(mid)) * math.sqrt(T) if mid.size else math.sqrt(T)
    else:
        return 0.0
    return math.sqrt(dt) / scale if scale > 0 else math.inf


def _run_block(model, plan, budget, cfg, block, size, n_trace):
    T, a = model.horizon_T, model.drift_a
    steps = np.diff(plan.tgrid)
    decay = np.exp(a * steps)
    sd = np.sqrt(_g(a, steps))
    rng = _block_rng(cfg.seed, block)
    e = np.zeros(size)
    xh = np.full(size, float(model.initial_state))
    J = np.zeros(size)
    left = np.full(size, budget, dtype=np.int64)
    tprev = np.zeros(size)
    nsamp = np.zeros(size, dtype=np.int64)
    trace = np.zeros((n_trace, len(plan.tgrid), 3))
    trace[:, 0, 0] = trace[:, 0, 1] = model.initial_state
    seed = np.uint64(cfg.seed)
    n_steps = len(steps)
    for j0 in range(0, n_steps, _CHUNK):
        Z = _draw(rng, (min(_CHUNK, n_steps - j0), size), cfg.antithetic)
        _advance(
            Z, j0, plan.tgrid, decay, sd, plan.sched, a, T, plan.mode, plan.coef, plan.rows, plan.tg,
            e, xh, J, left, tprev, nsamp, seed, block * BLOCK, trace,
        )
    return J, nsamp, trace


def _map_blocks(job, n_paths: int, workers: int) -> list:
    blocks = _blocks(n_paths)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(job, blocks))
    return [job(bs) for bs in blocks]


def _mean_se(values: list[np.ndarray], antithetic: bool) -> tuple[float, float]:
    """Mean and standard error; antithetic pairs are averaged before the variance."""
    x = np.concatenate(values)
    mean = math.fsum(x) / len(x)
    if antithetic:
        pairs = []
        for v in values:
            h = (len(v) + 1) // 2
            m = len(v) // 2
            pairs.append(0.5 * (v[:m] + v[h:h + m]))
        pm = np.concatenate(pairs)
        if len(pm) < 2:
            return mean, 0.0
        pm_mean = math.fsum(pm) / len(pm)
        return mean, math.sqrt(math.fsum((pm - pm_mean) ** 2) / (len(pm) - 1) / len(pm))
    if len(x) < 2:
        return mean, 0.0
    return mean, math.sqrt(math.fsum((x - mean) ** 2) / (len(x) - 1) / len(x))


def simulate_policy(
    model: ProcessModel,
    policy: PolicyArtifact,
    cfg: SimConfig | None = None,
    trace_path: str | Path | None = None,
    trace_paths: int = 1,
) -> SimulationReport:
    """Monte Carlo estimate of ``E int_0^T (x - xhat)^2 dt`` under ``policy``.

    ``cfg.dt`` is a fraction of the horizon. With ``trace_path`` the first
    ``trace_paths`` paths are written there as CSV.
    """
    cfg = cfg or SimConfig()
    plan = _plan(model, policy, cfg)
    ratio = _coarseness(plan, model.horizon_T)
    if ratio > 0.1:
        log.warning("dt is coarse relative to the policy thresholds: sqrt(dt)/threshold = %.3g", ratio)
    n_trace = min(trace_paths, BLOCK, cfg.n_paths) if trace_path is not None else 0

    def job(bs):
        b, size = bs
        return _run_block(model, plan, policy.budget, cfg, b, size, n_trace if b == 0 else 0)

    results = _map_blocks(job, cfg.n_paths, cfg.workers)
    mean, se = _mean_se([r[0] for r in results], cfg.antithetic)
    used = np.concatenate([r[1] for r in results]).astype(float)
    if trace_path is not None:
        write_trace_csv(trace_path, plan.tgrid, results[0][2])
    return SimulationReport(
        mean_distortion=mean,
        std_error=se,
        n_paths=cfg.n_paths,
        mean_samples_used=math.fsum(used) / len(used),
        seed=cfg.seed,
        policy_id=policy.policy_id,
        budget=policy.budget,
        horizon=model.horizon_T,
        extras={"dt": cfg.dt * model.horizon_T, "samples_used_std": float(np.std(used)), "coarseness": ratio},
    )


def write_trace_csv(path: str | Path, tgrid: np.ndarray, trace: np.ndarray) -> None:
    """Per-path trace with columns ``path, t, x, xhat, cumulative_distortion``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "t", "x", "xhat", "cumulative_distortion"])
        for p in range(trace.shape[0]):
            for j, t in enumerate(tgrid):
                w.writerow([p, repr(float(t)), repr(float(trace[p, j, 0])), repr(float(trace[p, j, 1])),
                            repr(float(trace[p, j, 2]))])


# -- hitting statistics of a fixed level ------------------------------------------


@dataclass(frozen=True)
class HittingStatistics:
    """First exit of ``[-delta, delta]`` by a standard Brownian motion from 0."""

    p_fire: float
    p_fire_se: float
    mean_residual: float
    mean_residual_se: float
    mean_residual_sq: float
    mean_residual_sq_se: float
    mgf_at_s: float
    mgf_at_s_se: float
    n_paths: int


@njit(cache=True, nogil=True)
def _hit_advance(Z, j0, dt, level, e, tau, ids, seed):
    n_chunk, P = Z.shape
    sq = math.sqrt(dt)
    for p in range(P):
        ep = e[p]
        for jj in range(n_chunk):
            j = j0 + jj
            ta = j * dt
            tb = ta + dt
            eb = ep + sq * Z[jj, p]
            if abs(eb) >= level:
                tc, _, _ = _locate(_DELTA, level, 0.0, 0.0, ta, ep, tb, eb, seed, ids[p], j, 0)
                tau[p] = tc
                break
            pu, pl = _bridge_cross(ep, eb, level, level, dt)
            if pu + pl > 1e-300 and _uniform(seed, ids[p], j, 0) < pu + pl:
                tau[p] = ta + 0.5 * dt
                break
            ep = eb
        e[p] = ep


def _hit_block(delta, t_max, cfg, block, size, dt):
    rng = _block_rng(cfg.seed, block)
    seed = np.uint64(cfg.seed)
    ids = np.arange(block * BLOCK, block * BLOCK + size, dtype=np.int64)
    e = np.zeros(size)
    tau_all = np.full(size, np.inf)
    tau = np.full(size, np.inf)
    pos = np.arange(size)
    n_steps = int(math.ceil(t_max / dt - 1e-9))
    for j0 in range(0, n_steps, _CHUNK):
        Z = _draw(rng, (min(_CHUNK, n_steps - j0), len(pos)), cfg.antithetic)
        _hit_advance(Z, j0, dt, delta, e, tau, ids, seed)
        done = np.isfinite(tau)
        tau_all[pos[done]] = tau[done]
        keep = ~done
        if not keep.any():
            break
        pos, e, tau, ids = pos[keep], e[keep], tau[keep], ids[keep]
    return tau_all


def simulate_hitting_statistics(delta: float, T: float, s: float, cfg: SimConfig | None = None) -> HittingStatistics:
    """Monte Carlo ``P[tau <= T]``, ``E(T - tau)^+``, ``E((T - tau)^+)^2`` and ``E exp(-s tau)``.

    Paths are followed past ``T`` until they exit (at most ``50 delta^2``, where
    the survival probability is below ``1e-26``) so the transform is not
    truncated. ``cfg.dt`` is a fraction of ``T``.
    """
    if not delta > 0:
        raise ValueError("delta must be > 0")
    if not T > 0:
        raise ValueError("T must be > 0")
    if s < 0:
        raise ValueError("s must be >= 0")
    cfg = cfg or SimConfig(n_paths=1_000_000, dt=1e-3)
    dt = cfg.dt * T
    t_max = T if s == 0 else max(T, 50.0 * delta * delta)
    taus = _map_blocks(lambda bs: _hit_block(delta, t_max, cfg, bs[0], bs[1], dt), cfg.n_paths, cfg.workers)
    fired = [(t <= T).astype(float) for t in taus]
    r1 = [np.maximum(T - t, 0.0) for t in taus]
    r2 = [x * x for x in r1]
    mgf = [np.ones_like(t) if s == 0 else np.exp(-s * np.minimum(t, t_max)) for t in taus]
    stats = [_mean_se(v, cfg.antithetic) for v in (fired, r1, r2, mgf)]
    return HittingStatistics(*[x for pair in stats for x in pair], n_paths=cfg.n_paths)


# -- Poisson counter demonstration ----------------------------------------------------


@dataclass(frozen=True)
class PoissonDemoResult:
    adaptive_distortion: float
    adaptive_distortion_se: float
    deterministic_distortion: float
    deterministic_distortion_se: float
    adaptive_rate: float
    adaptive_rate_se: float
    n_paths: int
    adaptive_costs: np.ndarray = field(repr=False, compare=False, default=None)
    deterministic_costs: np.ndarray = field(repr=False, compare=False, default=None)
    adaptive_samples: np.ndarray = field(repr=False, compare=False, default=None)


@njit(cache=True)
def _jump_sampled_cost(jumps, n_jumps, T):
    """``int_0^T (N_t - N_last)^2 dt`` when a sample is taken at every jump."""
    total = 0.0
    held = 0.0  # counter value carried by the last sample
    count = 0.0
    t = 0.0
    for i in range(n_jumps + 1):
        nxt = jumps[i] if i < n_jumps else T
        total += (nxt - t) * (count - held) ** 2
        t = nxt
        if i < n_jumps:
            count += 1.0
            held = count  # sample at the jump sees the new value
    return total


@njit(cache=True)
def _periodic_cost(jumps, n_jumps, rate, T):
    """Exact ``int_0^T (N_t - N_d - rate (t - d))^2 dt`` with samples every ``1/rate``."""
    period = 1.0 / rate
    total = 0.0
    jp = 0
    d = 0.0
    while d < T:
        end = min(d + period, T)
        c = 0.0  # jumps since the last sample
        t = d
        while True:
            nxt = jumps[jp] if jp < n_jumps and jumps[jp] < end else end
            # error c - rate (u - d) on [t, nxt]
            u0, u1 = c - rate * (t - d), c - rate * (nxt - d)
            total += (nxt - t) * (u0 * u0 + u0 * u1 + u1 * u1) / 3.0
            t = nxt
            if nxt >= end:
                break
            c += 1.0
            jp += 1
        d = end
    return total


def poisson_demo(rate: float, T: float, cfg: SimConfig | None = None) -> PoissonDemoResult:
    """Counting process sampled at its jumps versus periodically at the same mean rate.

    Sampling at every jump leaves an identically zero error. Periodic
    sampling with the linear-drift estimate ``N_d + rate (t - d)`` does not.
    """
    if not rate > 0:
        raise ValueError("rate must be > 0")
    if not T > 0:
        raise ValueError("T must be > 0")
    cfg = cfg or SimConfig(n_paths=10_000)

    def job(bs):
        b, size = bs
        rng = _block_rng(cfg.seed, b)
        counts = rng.poisson(rate * T, size)
        adaptive = np.zeros(size)
        periodic = np.empty(size)
        for i, n in enumerate(counts):
            jumps = np.sort(rng.uniform(0.0, T, n))
            adaptive[i] = _jump_sampled_cost(jumps, n, T)
            periodic[i] = _periodic_cost(jumps, n, rate, T)
        return adaptive, periodic, counts

    results = _map_blocks(job, cfg.n_paths, cfg.workers)
    a_mean, a_se = _mean_se([r[0] for r in results], False)
    d_mean, d_se = _mean_se([r[1] for r in results], False)
    r_mean, r_se = _mean_se([r[2] / T for r in results], False)
    return PoissonDemoResult(
        a_mean, a_se, d_mean, d_se, r_mean, r_se, cfg.n_paths,
        adaptive_costs=np.concatenate([r[0] for r in results]),
        deterministic_costs=np.concatenate([r[1] for r in results]),
        adaptive_samples=np.concatenate([r[2] for r in results]),
    )
