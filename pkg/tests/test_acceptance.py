"""Acceptance suite: one test per criterion at its stated tolerance.

Each test records a PASS/FAIL line that pytest prints in the
"acceptance criteria" summary section. Run on its own with

    python3 -m pytest tests/test_acceptance.py -v

The Monte Carlo criteria take a few minutes on a single core.
"""

from __future__ import annotations

import csv
import filecmp
import math
import time
from functools import lru_cache

import numpy as np
import pytest

from budgeted_sampling import bm_series, cli
from budgeted_sampling.bm_policies import (
    delta_recursion,
    deterministic_policy,
    optimal_envelope_recursion,
)
from budgeted_sampling.models import DeltaThresholds, ProcessModel, SeriesConfig, UniformDeterministic
from budgeted_sampling.ou_policies import GridSpec, ou_delta_optimize, ou_deterministic, ou_dp_optimal
from budgeted_sampling.simulator import SimConfig, poisson_demo, simulate_hitting_statistics, simulate_policy

TABLE_C = [0.3953, 0.3471, 0.3219, 0.3078, 0.2995]
TABLE_RHO = [0.9391, 0.8743, 0.8401, 0.8208, 0.8094]
COARSE = GridSpec(m_time=400, n_x=201)


def record(log, n, ok, detail):
    log.append((n, bool(ok), detail))
    assert ok, f"criterion {n}: {detail}"


@lru_cache(maxsize=None)
def bm_mc(kind: str):
    """Criterion-5 runs: 1e5 paths at dt = 1e-4; returns (report, seconds)."""
    policy = {
        "uniform": lambda: deterministic_policy(1.0, 3).policy,
        "envelope": lambda: optimal_envelope_recursion(1).policy,
        "delta": lambda: DeltaThresholds(1, rho=(0.9391,)),
    }[kind]()
    t0 = time.perf_counter()
    rep = simulate_policy(ProcessModel.brownian(), policy, SimConfig(n_paths=100_000, dt=1e-4, seed=2024))
    return rep, time.perf_counter() - t0


def test_criterion_01_delta_table(acceptance_log):
    t0 = time.perf_counter()
    res = delta_recursion(5)
    elapsed = time.perf_counter() - t0
    c, rho = np.array(res.policy.c), np.array(res.policy.rho)
    ok = (
        np.all(np.abs(c - TABLE_C) <= 5e-4)
        and np.all(np.abs(rho - TABLE_RHO) <= 1e-3)
        and elapsed < 1.0
    )
    record(acceptance_log, 1, ok,
           f"c={np.round(c, 4).tolist()} rho={np.round(rho, 4).tolist()} in {elapsed:.3f}s")


def test_criterion_02_single_sample_optimum(acceptance_log):
    res = delta_recursion(1)
    c1, rho1 = res.policy.c[0], res.policy.rho[0]
    ok = min(abs(c1 - 0.3953), abs(c1 - 0.3952)) <= 5e-4 and abs(rho1 - 0.9391) <= 1e-3
    record(acceptance_log, 2, ok, f"min phi={c1:.5f} at delta*/sqrt(T)={rho1:.5f}")


def test_criterion_03_envelope_recursion(acceptance_log):
    res = optimal_envelope_recursion(40)
    th, ga = res.policy.theta, res.policy.gamma
    scaled = 41 * th[40]
    ok = (
        abs(th[1] - (math.sqrt(3) - 1) / 2) <= 1e-12
        and abs(ga[0] - math.sqrt(3)) <= 1e-12
        and all(b < a for a, b in zip(th, th[1:]))
        and 0.30 <= scaled <= 0.40
    )
    record(acceptance_log, 3, ok, f"theta1={th[1]:.15f} gamma1={ga[0]:.15f} 41*theta40={scaled:.4f}")


def test_criterion_04_series_machinery(acceptance_log):
    s3 = bm_series.alternating_series_constant(3)
    s5 = bm_series.alternating_series_constant(5)
    e3, e5 = abs(s3 - math.pi**3 / 32), abs(s5 - 5 * math.pi**5 / 1536)
    p, q = bm_series.phi(1e4), bm_series.psi(1e4)
    ok = e3 <= 1e-10 and e5 <= 1e-10 and abs(p - 1) < 1e-3 and abs(q + 2) < 1e-3
    record(acceptance_log, 4, ok, f"|S3 err|={e3:.1e} |S5 err|={e5:.1e} phi(1e4)={p:.6f} psi(1e4)={q:.6f}")


@pytest.mark.slow
def test_criterion_05_bm_monte_carlo(acceptance_log):
    targets = {"uniform": 0.125, "envelope": 0.18301, "delta": 0.19765}
    parts, ok = [], True
    for kind, target in targets.items():
        rep, secs = bm_mc(kind)
        z = (rep.mean_distortion - target) / rep.std_error
        ok &= abs(z) < 3 and secs < 120
        parts.append(f"{kind} {rep.mean_distortion:.5f}+/-{rep.std_error:.5f} (z={z:+.2f}, {secs:.0f}s)")
    record(acceptance_log, 5, ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_06_hitting_cross_validation(acceptance_log):
    h = simulate_hitting_statistics(1.0, 1.0, 1.0, SimConfig(n_paths=1_000_000, dt=1e-3, seed=606))
    lam = bm_series.lambda_from_delta(1.0, 1.0)
    pairs = {
        "E(T-tau)+": (bm_series.residual_moment_1(1.0, 1.0), h.mean_residual, h.mean_residual_se),
        "E((T-tau)+)^2": (bm_series.residual_moment_2(1.0, 1.0), h.mean_residual_sq, h.mean_residual_sq_se),
        "P[tau<=T]": (bm_series.firing_probability(lam), h.p_fire, h.p_fire_se),
        "E exp(-tau)": (bm_series.mgf_first_hitting(1.0, 1.0), h.mgf_at_s, h.mgf_at_s_se),
    }
    zs = {k: (mc - ref) / se for k, (ref, mc, se) in pairs.items()}
    ok = all(abs(z) < 3 for z in zs.values())
    record(acceptance_log, 6, ok, " ".join(f"{k}: z={z:+.2f}" for k, z in zs.items()))


def test_criterion_07_delta_floor(acceptance_log):
    c = delta_recursion(50).policy.c
    loses = all(c[n - 1] > 1.0 / (n + 1) for n in range(2, 51))
    ok = 0.28 <= c[49] <= 0.30 and loses
    record(acceptance_log, 7, ok, f"c_50={c[49]:.4f}; c_N > 1/(N+1) for N=2..50: {loses} (published recursion)")


def test_criterion_08_ou_brownian_continuity(acceptance_log):
    theta = optimal_envelope_recursion(3).policy.theta
    delta_bm = delta_recursion(3, convention="consistent").policy.c
    worst = {"deterministic": 0.0, "delta": 0.0, "dp": 0.0}
    for a in (1e-6, -1e-6):
        for n in (1, 2, 3):
            det = ou_deterministic(a, 1.0, n) / 0.5
            worst["deterministic"] = max(worst["deterministic"], abs(det * (n + 1) - 1))
        dp = ou_dp_optimal(a, 3)
        for n in (1, 2, 3):
            worst["dp"] = max(worst["dp"], abs(2 * dp.level_distortions[n - 1] / theta[n] - 1))
        de = ou_delta_optimize(a, 3, COARSE, n_drift=2)
        for n in (1, 2, 3):
            worst["delta"] = max(worst["delta"], abs(2 * de.stage_distortions[n - 1] / delta_bm[n - 1] - 1))
    # discrete monitoring lowers the boundary by O(sqrt(dt)); refine time and state together
    env = ou_dp_optimal(1e-6, 1, GridSpec(m_time=8000, n_x=801))
    t = np.array(env.policy.time_grid)
    keep = t <= 0.95
    exact = np.sqrt(np.sqrt(3.0) * (1.0 - t[keep]))
    sup = float(np.max(np.abs(np.array(env.policy.thresholds[0])[keep] - exact) / exact))
    ok = max(worst.values()) < 0.02 and sup < 0.05
    record(acceptance_log, 8, ok,
           " ".join(f"{k} max rel err={v:.2%}" for k, v in worst.items())
           + f"; envelope sup-norm rel err={sup:.2%} (Delta compared with the self-consistent BM recursion)")


@pytest.mark.slow
def test_criterion_09_ou_monte_carlo(acceptance_log):
    parts, ok = [], True
    det = ou_deterministic(1.0, 1.0, 1)
    rep = simulate_policy(ProcessModel.ou(1.0), UniformDeterministic(1, times=(0.5,), horizon=1.0),
                          SimConfig(n_paths=100_000, dt=1e-3, seed=909))
    z = (rep.mean_distortion - det) / rep.std_error
    ok &= abs(det - 0.359141) < 1e-6 and abs(z) < 3
    parts.append(f"det(a=1)={det:.6f} z={z:+.2f}")
    grid = GridSpec.default_for(-1.0)
    delta = ou_delta_optimize(-1.0, 3, COARSE, n_drift=5)
    model = ProcessModel.ou(-1.0)
    for n in (1, 2, 3):
        dp = ou_dp_optimal(-1.0, n, grid)
        rep = simulate_policy(model, dp.policy, SimConfig(n_paths=100_000, dt=1.0 / grid.m_time, seed=900 + n))
        z = (rep.mean_distortion - dp.distortion) / rep.std_error
        others = min(ou_deterministic(-1.0, 1.0, n), delta.stage_distortions[n - 1])
        ok &= abs(z) < 3 and dp.distortion <= others
        parts.append(f"DP N={n} {dp.distortion:.5f} z={z:+.2f} <= {others:.5f}")
    record(acceptance_log, 9, ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_10_discrepancies_surfaced(acceptance_log, tmp_path):
    code = cli.main(["table1", "--n-max", "5", "--paths", "100000", "--dt", "1e-3", "--seed", "10",
                     "--out-dir", str(tmp_path)])
    rows = list(csv.DictReader((tmp_path / "table1.csv").open()))
    r1 = rows[0]
    p_series = float(r1["p_fire_series"])
    mc, se = float(r1["E_Xi_montecarlo"]), float(r1["E_Xi_montecarlo_se"])
    published = float(r1["E_Xi_published"])
    has_cols = all(k in r1 for k in ("E_Xi_series", "E_Xi_montecarlo", "E_Xi_published", "footnote"))
    env, _ = bm_mc("envelope")
    z_half = (env.mean_distortion - 0.5 * 0.3660254) / env.std_error
    z_full = (env.mean_distortion - 0.3660254) / env.std_error
    ok = (
        code == 0
        and has_cols
        and bool(r1["footnote"])
        and abs(p_series - 0.69) < 0.01
        and abs(mc - p_series) < 3 * se
        and abs(mc - published) > 3 * se
        and abs(z_half) < 3
        and abs(z_full) > 3
    )
    record(acceptance_log, 10, ok,
           f"p_fire series={p_series:.4f}, E[Xi_1] MC={mc:.4f}+/-{se:.4f}, published={published}; "
           f"envelope N=1 MC vs 0.183: z={z_half:+.2f}, vs 0.366: z={z_full:+.1f}")


def test_criterion_11_poisson_demo(acceptance_log):
    res = poisson_demo(2.0, 5.0, SimConfig(n_paths=20_000, seed=11))
    z_rate = (res.adaptive_rate - 2.0) / res.adaptive_rate_se
    sep = res.deterministic_distortion / res.deterministic_distortion_se
    ok = res.adaptive_distortion == 0.0 and abs(z_rate) < 3 and sep > 3
    record(acceptance_log, 11, ok,
           f"adaptive={res.adaptive_distortion}, rate={res.adaptive_rate:.4f} (z={z_rate:+.2f}), "
           f"periodic={res.deterministic_distortion:.4f} ({sep:.0f} SE from 0)")


def test_criterion_12_reproducibility(acceptance_log, tmp_path):
    small = ["--paths", "3000", "--dt", "2e-3", "--seed", "12"]
    commands = [
        ["table1", "--n-max", "2", *small],
        ["compare", "bm", "--n-max", "2", *small],
        ["compare", "ou", "--a", "-1", "--n-max", "2", "--grid-m", "400", "--grid-nx", "201", "--n-drift", "3",
         *small],
        ["policy", "ou", "--optimal", "--a", "-1", "--n", "2", "--grid-m", "400"],
        ["poisson-demo", "--rate", "2", "--horizon", "5", *small],
        ["hitting-stats", "--delta", "0.8", *small, "--format", "json"],
    ]
    policy_file = tmp_path / "pol.json"
    policy_file.write_text(
        '{"budget": 2, "coefficients": {"gamma": [1.7320508075688772, 0.777799054800853], '
        '"theta": [1.0, 0.3660254037844386, 0.20588682550820692]}, "grid": null, "kind": "envelope"}'
    )
    commands.append(["simulate", "bm", "--policy", str(policy_file), "--trace", "2", *small])
    bad = []
    for i, argv in enumerate(commands):
        dirs = []
        for rep, workers in (("a", "1"), ("b", "1"), ("c", "3")):
            out = tmp_path / f"{i}{rep}"
            if cli.main([*argv, "--workers", workers, "--out-dir", str(out)]) != 0:
                bad.append(f"{argv[0]} failed")
            dirs.append(out)
        names = sorted(p.name for p in dirs[0].iterdir())
        for other in dirs[1:]:
            if sorted(p.name for p in other.iterdir()) != names:
                bad.append(f"{argv[0]}: file sets differ")
                continue
            for name in names:
                if name == "manifest.json" and other.name.endswith("c"):
                    continue  # records the worker count
                if not filecmp.cmp(dirs[0] / name, other / name, shallow=False):
                    bad.append(f"{argv[0]}: {name} differs in {other.name}")
    record(acceptance_log, 12, not bad,
           f"{len(commands)} commands x 3 runs (1, 1, 3 workers) byte-identical" if not bad else "; ".join(bad))


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
