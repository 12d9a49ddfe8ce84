"""Command-line entry point: ``budgeted-sampling <command> [flags]``.

Every command writes its artifacts into ``--out-dir`` and finishes by
writing ``manifest.json`` there. Outputs contain no timestamps or host
information, so re-running with the same flags reproduces them byte for
byte.

Numeric defaults for the OU grid and the series come from, in order of
precedence: command-line flags, the JSON file given by ``--config``, and
the built-in defaults.

Exit status: 0 on success, 1 on a numerical failure, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import __version__, bm_policies, bm_series, ou_policies
from .models import (
    DeltaThresholds,
    PolicyArtifact,
    ProcessModel,
    SeriesConfig,
    UniformDeterministic,
    policy_from_json,
    policy_to_json,
)
from .simulator import (
    IncompatiblePolicyError,
    SimConfig,
    poisson_demo,
    simulate_hitting_statistics,
    simulate_policy,
)

log = logging.getLogger("budgeted_sampling")

# published reference values for multi-stage Delta sampling, reported side by side
PUBLISHED_C = (0.3953, 0.3471, 0.3219, 0.3078, 0.2995)
PUBLISHED_RHO = (0.9391, 0.8743, 0.8401, 0.8208, 0.8094)
PUBLISHED_E_XI = (0.9767, 1.9306, 2.8622, 3.7541, 4.4803)

TABLE1_FOOTNOTE = (
    "E_Xi_published disagrees with E_Xi_series and E_Xi_montecarlo: the optimal single-stage "
    "threshold fires with probability p_fire_series (about 0.69), not 0.98. c_N follows the "
    "published recursion; c_N_consistent uses the continuation weight c_(N-1)/2 and "
    "c_N_of_policy is the exact cost of the rho_N policy, which the Monte Carlo run confirms."
)


class UsageError(ValueError):
    pass


@dataclass
class RunManifest:
    command: str
    parameters: dict[str, str]
    artifacts: list[str] = field(default_factory=list)
    tool_version: str = __version__
    seed: int = 0


# -- output helpers -------------------------------------------------------------


def _fmt(v: Any) -> Any:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return v


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_table(out: Path, stem: str, fmt: str, columns: Sequence[str], rows: list[dict], extra=None) -> Path:
    if fmt == "json":
        doc = {"columns": list(columns), "rows": rows}
        if extra:
            doc.update(extra)
        path = out / f"{stem}.json"
        _atomic_write(path, _json_text(doc))
        return path
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row.get(k, "")) for k in columns})
    path = out / f"{stem}.csv"
    _atomic_write(path, buf.getvalue())
    return path


class _Run:
    """Collects artifacts and writes the manifest last."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out = Path(args.out_dir)
        self.artifacts: list[Path] = []

    def add(self, path: Path) -> Path:
        self.artifacts.append(path)
        return path

    def finish(self) -> None:
        params = {
            k: str(v)
            for k, v in sorted(vars(self.args).items())
            if k not in ("func", "out_dir") and v is not None
        }
        manifest = RunManifest(
            command=self.args.command,
            parameters=params,
            artifacts=sorted(p.name for p in self.artifacts),
            seed=self.args.seed,
        )
        _atomic_write(self.out / "manifest.json", _json_text(asdict(manifest)))


# -- configuration --------------------------------------------------------------


def _load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(doc) - {"grid", "series", "n_drift"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return doc


def _grid(args, a_bar: float) -> ou_policies.GridSpec:
    cfg = _load_config(args.config).get("grid", {})
    kw = {}
    for key, flag in (("m_time", args.grid_m), ("n_x", args.grid_nx), ("x_half_width", args.grid_width)):
        value = flag if flag is not None else cfg.get(key)
        if value is not None:
            kw[key] = value
    return ou_policies.GridSpec.default_for(a_bar, **kw)


def _series(args) -> SeriesConfig:
    return SeriesConfig(**_load_config(args.config).get("series", {}))


def _n_drift(args) -> int:
    if args.n_drift is not None:
        return args.n_drift
    return int(_load_config(args.config).get("n_drift", 11))


def _sim(args, dt: float | None = None) -> SimConfig:
    return SimConfig(n_paths=args.paths, dt=dt if dt is not None else args.dt, seed=args.seed,
                     antithetic=args.antithetic, workers=args.workers)


# -- commands -------------------------------------------------------------------


def cmd_table1(args) -> int:
    run = _Run(args)
    cfg = _series(args)
    pub = bm_policies.delta_recursion(args.n_max, cfg)
    con = bm_policies.delta_recursion(args.n_max, cfg, convention="consistent")
    true_c = bm_policies.delta_policy_coefficient(pub.policy.rho, cfg)
    e_series = bm_policies.delta_expected_samples(args.n_max, pub.policy.lambda_star, cfg)
    rows = []
    model = ProcessModel.brownian()
    for n in range(1, args.n_max + 1):
        pol = DeltaThresholds(n, rho=pub.policy.rho[:n], c=pub.policy.c[:n], lambda_star=pub.policy.lambda_star[:n])
        rep = simulate_policy(model, pol, _sim(args))
        rows.append({
            "N": n,
            "c_N": pub.policy.c[n - 1],
            "rho_N": pub.policy.rho[n - 1],
            "lambda_star_N": pub.policy.lambda_star[n - 1],
            "p_fire_series": bm_series.firing_probability(pub.policy.lambda_star[n - 1], cfg),
            "E_Xi_series": e_series[n - 1],
            "E_Xi_montecarlo": rep.mean_samples_used,
            "E_Xi_montecarlo_se": rep.extras["samples_used_std"] / math.sqrt(rep.n_paths),
            "E_Xi_published": PUBLISHED_E_XI[n - 1] if n <= len(PUBLISHED_E_XI) else "",
            "c_N_of_policy": true_c[n - 1],
            "c_N_montecarlo": rep.coefficient,
            "c_N_montecarlo_se": rep.std_error / 0.5,
            "c_N_consistent": con.policy.c[n - 1],
            "rho_N_consistent": con.policy.rho[n - 1],
            "footnote": TABLE1_FOOTNOTE if n == 1 else "",
        })
        print(f"N={n}: c_N={rows[-1]['c_N']:.4f} rho_N={rows[-1]['rho_N']:.4f} "
              f"E[Xi] series={e_series[n - 1]:.4f} mc={rep.mean_samples_used:.4f}")
    run.add(_write_table(run.out, "table1", args.format, list(rows[0]), rows, {"footnote": TABLE1_FOOTNOTE}))
    run.finish()
    return 0


def _bm_compare_rows(args) -> list[dict]:
    T = args.horizon
    cfg = _series(args)
    model = ProcessModel.brownian(T)
    delta = bm_policies.delta_recursion(args.n_max, cfg)
    delta_c = bm_policies.delta_recursion(args.n_max, cfg, convention="consistent")
    env = bm_policies.optimal_envelope_recursion(args.n_max)
    rows = []
    for n in range(1, args.n_max + 1):
        det = bm_policies.deterministic_policy(T, n)
        pols = {
            "deterministic": (det.policy, det.analytic_distortion),
            "delta": (DeltaThresholds(n, rho=delta.policy.rho[:n]), delta.policy.c[n - 1]),
            "delta_consistent": (DeltaThresholds(n, rho=delta_c.policy.rho[:n]), delta_c.policy.c[n - 1]),
            "optimal": (bm_policies.optimal_envelope_recursion(n).policy, env.policy.theta[n]),
        }
        rows.append(_compare_row(args, model, n, pols))
    return rows


def _ou_compare_rows(args) -> list[dict]:
    T, a = args.horizon, args.a
    a_bar = a * T
    model = ProcessModel.ou(a, T)
    grid = _grid(args, a_bar)
    delta = ou_policies.ou_delta_optimize(a, args.n_max, grid, T=T, n_drift=_n_drift(args))
    rows = []
    for n in range(1, args.n_max + 1):
        dp = ou_policies.ou_dp_optimal(a, n, grid, T=T)
        times = tuple(i * T / (n + 1) for i in range(1, n + 1))
        sub = delta.policy
        dpol = type(sub)(n, time_grid=sub.time_grid, thresholds=sub.thresholds[:n], a_bar=sub.a_bar,
                         hold_at_sample=True)
        half = 0.5 * T * T
        pols = {
            "deterministic": (UniformDeterministic(n, times=times, horizon=T),
                              ou_policies.ou_deterministic(a, T, n) / half),
            "delta": (dpol, delta.stage_distortions[n - 1] * T * T / half),
            "optimal": (dp.policy, dp.distortion / half),
        }
        rows.append(_compare_row(args, model, n, pols, dt={"optimal": 1.0 / grid.m_time}))
    return rows


def _compare_row(args, model, n, pols, dt=None) -> dict:
    half = 0.5 * model.horizon_T**2
    row: dict[str, Any] = {"N": n, "horizon": model.horizon_T}
    for name, (pol, coeff) in pols.items():
        row[name] = coeff
        row[f"{name}_abs"] = coeff * half
    for name, (pol, _) in pols.items():
        if args.paths > 0:
            rep = simulate_policy(model, pol, _sim(args, (dt or {}).get(name)))
            row[f"{name}_mc"] = rep.coefficient
            row[f"{name}_mc_se"] = rep.std_error / half
    return row


def cmd_compare(args) -> int:
    if args.process == "bm" and args.a not in (None, 0.0):
        raise UsageError("--a applies to the ou process only")
    if args.process == "ou" and args.a is None:
        raise UsageError("--a is required for the ou process")
    run = _Run(args)
    rows = _bm_compare_rows(args) if args.process == "bm" else _ou_compare_rows(args)
    for r in rows:
        print("N={N}: ".format(**r) + " ".join(
            f"{k}={r[k]:.4f}" for k in ("deterministic", "delta", "optimal")))
    run.add(_write_table(run.out, f"compare_{args.process}", args.format, list(rows[0]), rows))
    run.finish()
    return 0


def cmd_policy(args) -> int:
    run = _Run(args)
    T = args.horizon
    if args.process == "bm":
        if args.a not in (None, 0.0):
            raise UsageError("--a applies to the ou process only")
        if args.family == "deterministic":
            res = bm_policies.deterministic_policy(T, args.n)
        elif args.family == "delta":
            res = bm_policies.delta_recursion(args.n, _series(args), convention=args.convention)
        else:
            res = bm_policies.optimal_envelope_recursion(args.n)
        policy, coeff = res.policy, res.analytic_distortion
    else:
        if args.a is None:
            raise UsageError("--a is required for the ou process")
        a_bar = args.a * T
        if args.family == "deterministic":
            times = tuple(i * T / (args.n + 1) for i in range(1, args.n + 1))
            policy = UniformDeterministic(args.n, times=times, horizon=T)
            coeff = ou_policies.ou_deterministic(args.a, T, args.n) / (0.5 * T * T)
        elif args.family == "delta":
            res = ou_policies.ou_delta_optimize(args.a, args.n, _grid(args, a_bar), T=T, n_drift=_n_drift(args))
            policy, coeff = res.policy, res.coefficient
        else:
            res = ou_policies.ou_dp_optimal(args.a, args.n, _grid(args, a_bar), T=T)
            policy, coeff = res.policy, res.coefficient
    path = run.add(run.out / f"policy_{args.process}_{args.family}_N{args.n}.json")
    _atomic_write(path, policy_to_json(policy) + "\n")
    print(f"{policy.policy_id}: distortion coefficient {coeff:.6f}, absolute {coeff * 0.5 * T * T:.6f}")
    run.finish()
    return 0


def _read_policy(path: str) -> PolicyArtifact:
    try:
        return policy_from_json(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read policy file {path}: {exc}") from exc
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid policy file {path}: {exc}") from exc


def cmd_simulate(args) -> int:
    run = _Run(args)
    policy = _read_policy(args.policy)
    if args.process == "bm":
        if args.a not in (None, 0.0):
            raise UsageError("--a applies to the ou process only")
        model = ProcessModel.brownian(args.horizon)
    else:
        if args.a is None:
            raise UsageError("--a is required for the ou process")
        model = ProcessModel.ou(args.a, args.horizon)
    trace = run.out / "trace.csv" if args.trace else None
    if trace is not None:
        trace.parent.mkdir(parents=True, exist_ok=True)
    report = simulate_policy(model, policy, _sim(args), trace_path=trace, trace_paths=args.trace or 1)
    if trace is not None:
        run.add(trace)
    doc = report.to_dict()
    if args.format == "json":
        path = run.add(run.out / "simulation.json")
        _atomic_write(path, _json_text(doc))
    else:
        flat = {k: v for k, v in doc.items() if k != "extras"}
        flat.update({f"extras_{k}": v for k, v in sorted(doc["extras"].items())})
        run.add(_write_table(run.out, "simulation", "csv", list(flat), [flat]))
    print(f"{report.policy_id}: distortion {report.mean_distortion:.6f} +/- {report.std_error:.6f} "
          f"(coefficient {report.coefficient:.6f}), samples used {report.mean_samples_used:.4f}")
    run.finish()
    return 0


def cmd_poisson_demo(args) -> int:
    run = _Run(args)
    res = poisson_demo(args.rate, args.horizon, _sim(args))
    rows = []
    for i in range(len(res.adaptive_costs)):
        rows.append({
            "path": i,
            "adaptive_samples": int(res.adaptive_samples[i]),
            "adaptive_distortion": float(res.adaptive_costs[i]),
            "deterministic_distortion": float(res.deterministic_costs[i]),
        })
    run.add(_write_table(run.out, "poisson_demo", args.format, list(rows[0]), rows))
    summary = {
        "rate": args.rate,
        "horizon": args.horizon,
        "adaptive_distortion": res.adaptive_distortion,
        "adaptive_distortion_se": res.adaptive_distortion_se,
        "adaptive_rate": res.adaptive_rate,
        "adaptive_rate_se": res.adaptive_rate_se,
        "deterministic_distortion": res.deterministic_distortion,
        "deterministic_distortion_se": res.deterministic_distortion_se,
        "n_paths": res.n_paths,
    }
    run.add(run.out / "poisson_summary.json")
    _atomic_write(run.out / "poisson_summary.json", _json_text(summary))
    print(f"adaptive distortion {res.adaptive_distortion:g}, rate {res.adaptive_rate:.4f} +/- "
          f"{res.adaptive_rate_se:.4f}; periodic distortion {res.deterministic_distortion:.4f} +/- "
          f"{res.deterministic_distortion_se:.4f}")
    run.finish()
    return 0


def cmd_hitting_stats(args) -> int:
    run = _Run(args)
    cfg = _series(args)
    d, T, s = args.delta, args.horizon, args.s
    h = simulate_hitting_statistics(d, T, s, _sim(args))
    lam = bm_series.lambda_from_delta(d, T)
    series = {
        "p_fire": bm_series.firing_probability(lam, cfg),
        "mean_residual": bm_series.residual_moment_1(d, T, cfg),
        "mean_residual_sq": bm_series.residual_moment_2(d, T, cfg),
        "mgf_at_s": bm_series.mgf_first_hitting(s, d),
    }
    rows = []
    for name, ref in series.items():
        mc, se = getattr(h, name), getattr(h, f"{name}_se")
        z = (mc - ref) / se if se > 0 else (0.0 if mc == ref else math.inf)
        rows.append({"statistic": name, "series": ref, "montecarlo": mc, "std_error": se, "z_score": z})
        print(f"{name}: series {ref:.6f}, mc {mc:.6f} +/- {se:.6f} (z={z:+.2f})")
    run.add(_write_table(run.out, "hitting_stats", args.format, list(rows[0]), rows))
    run.finish()
    return 0


# -- parser ---------------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a positive number: {text}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text}")
    return v


def _finite_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be finite: {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=_nonneg_int, default=0, help="root RNG seed (default 0)")
    g.add_argument("--paths", type=_nonneg_int, default=100_000, help="Monte Carlo paths (default 100000)")
    g.add_argument("--dt", type=_positive_float, default=1e-4, help="time step as a fraction of the horizon")
    g.add_argument("--out-dir", default=".", help="directory for artifacts and manifest.json")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--config", help="JSON file with 'grid', 'series' and 'n_drift' defaults")
    g.add_argument("--workers", type=_positive_int, default=1, help="threads for Monte Carlo blocks")
    g.add_argument("--antithetic", action="store_true", help="antithetic Gaussian increments")
    g.add_argument("--grid-m", type=int, help="OU time steps on the unit horizon")
    g.add_argument("--grid-nx", type=int, help="OU state nodes (odd)")
    g.add_argument("--grid-width", type=_positive_float, help="OU dynamic-program state half-width")
    g.add_argument("--n-drift", type=_positive_int, help="OU Delta drift interpolation nodes")
    g.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="budgeted-sampling", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("table1", parents=[common], help="multi-stage Delta coefficients and sample counts")
    s.add_argument("--n-max", type=_positive_int, default=5)
    s.set_defaults(func=cmd_table1)

    s = sub.add_parser("compare", parents=[common], help="deterministic vs Delta vs optimal distortions")
    s.add_argument("process", choices=("bm", "ou"))
    s.add_argument("--a", type=_finite_float, help="OU drift (dx = a x dt + dW)")
    s.add_argument("--n-max", type=_positive_int, default=5)
    s.add_argument("--horizon", type=_positive_float, default=1.0)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("policy", parents=[common], help="compute a policy and write it as JSON")
    s.add_argument("process", choices=("bm", "ou"))
    fam = s.add_mutually_exclusive_group(required=True)
    fam.add_argument("--deterministic", dest="family", action="store_const", const="deterministic")
    fam.add_argument("--delta", dest="family", action="store_const", const="delta")
    fam.add_argument("--optimal", dest="family", action="store_const", const="optimal")
    s.add_argument("--n", type=_positive_int, required=True, help="sample budget")
    s.add_argument("--a", type=_finite_float, help="OU drift")
    s.add_argument("--horizon", type=_positive_float, default=1.0)
    s.add_argument("--convention", choices=bm_policies.DELTA_CONVENTIONS, default="published",
                   help="Brownian Delta recursion variant")
    s.set_defaults(func=cmd_policy)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo distortion of a policy file")
    s.add_argument("process", choices=("bm", "ou"))
    s.add_argument("--policy", required=True, help="policy JSON written by the policy command")
    s.add_argument("--a", type=_finite_float, help="OU drift")
    s.add_argument("--horizon", type=_positive_float, default=1.0)
    s.add_argument("--trace", type=_nonneg_int, default=0, help="write the first K paths to trace.csv")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("poisson-demo", parents=[common], help="jump-triggered vs periodic sampling of a counter")
    s.add_argument("--rate", type=_positive_float, default=1.0)
    s.add_argument("--horizon", type=_positive_float, default=1.0)
    s.set_defaults(func=cmd_poisson_demo)

    s = sub.add_parser("hitting-stats", parents=[common], help="series vs Monte Carlo level-crossing statistics")
    s.add_argument("--delta", type=_positive_float, default=1.0)
    s.add_argument("--horizon", type=_positive_float, default=1.0)
    s.add_argument("--s", type=float, default=1.0, help="transform argument (>= 0)")
    s.set_defaults(func=cmd_hitting_stats)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    needs_paths = args.command in ("table1", "simulate", "poisson-demo", "hitting-stats")
    if needs_paths and args.paths < 1:
        parser.error("--paths must be >= 1 for this command")
    try:
        return args.func(args)
    except (UsageError, IncompatiblePolicyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, bm_policies.OptimizerError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
