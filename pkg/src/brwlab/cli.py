"""Command-line entry point.

Every subcommand reads a JSON config (environment law plus defaults),
prints a summary document to stdout and writes CSV tables to the output
directory. Given the same config, seed and subcommand, the tables are
byte-identical across runs and pool sizes; the summary differs only in
its wall_clock_s field.

Exit codes: 0 success, 1 config error, 2 positive-mean check failed,
3 degeneracy check failed, 4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import experiments, polymer, renorm
from .config import ConfigError, RunConfig, parse_config
from .envmodel import QuenchedEnvironment
from .particles import Configuration, TruncationBox, run
from .renorm import BlockEventSpec, diamond
from .streams import replica_seeds as _replica_seeds

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HYP1 = 2
EXIT_HYP2 = 3
EXIT_RUNTIME = 4

_EPILOG = """\
exit codes:
  0  success
  1  config unreadable, malformed, or containing unknown keys
  2  environment law has a zero-mean component (required by the subcommand)
  3  environment law is degenerate (extinction or growth impossible)
  4  runtime failure
"""


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path: Path, meta: dict, header: list[str], rows) -> None:
    lines = ["# " + " ".join(f"{k}={_fmt(v)}" for k, v in meta.items())]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class OutputBundle:
    """What one subcommand run produced: the summary and its CSV tables."""

    summary: dict
    tables: list[str] = field(default_factory=list)
    exit_code: int = EXIT_OK


LAST_BUNDLE: OutputBundle | None = None


class _Emitter:
    """Collects tables and the summary for one subcommand run."""

    def __init__(self, experiment: str, args, cfg: RunConfig):
        self.experiment = experiment
        self.cfg = cfg
        self.seed = cfg.seed if args.seed is None else args.seed
        out = args.out or cfg.out or "out"
        self.out_dir = Path(out)
        self.tables: list[str] = []
        self.started = time.perf_counter()

    def meta(self, **extra) -> dict:
        base = {"experiment": self.experiment, "seed": self.seed}
        base.update(extra)
        return base

    def table(self, name: str, header: list[str], rows, **meta) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        write_table(path, self.meta(**meta), header, rows)
        self.tables.append(str(path))

    def finish(self, results: dict, params: dict, code: int = EXIT_OK) -> int:
        global LAST_BUNDLE
        summary = {
            "experiment": self.experiment,
            "seed": self.seed,
            "params": params,
            "config": self.cfg.echo(),
            "validation": self.cfg.validation.as_dict(),
            "results": results,
            "tables": self.tables,
            "wall_clock_s": round(time.perf_counter() - self.started, 3),
        }
        LAST_BUNDLE = OutputBundle(summary=summary, tables=list(self.tables),
                                   exit_code=code)
        print(json.dumps(summary, indent=2, sort_keys=True))
        return code


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _require_hyp1(cfg: RunConfig) -> int | None:
    if not cfg.validation.hyp1_ok:
        return _fail("environment law fails the positive-mean check: "
                     + "; ".join(cfg.validation.messages), EXIT_HYP1)
    return None


def _param(args, cfg: RunConfig, name: str, default):
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    if name in cfg.params:
        return cfg.params[name]
    return default


def _parse_initial(specs, d: int) -> Configuration:
    if not specs:
        return Configuration.point((0,) * d, 1)
    entries: list[str] = []
    for spec in specs:
        entries.extend(s for s in spec.split(";") if s.strip())
    if len(entries) == 1 and entries[0].strip().startswith("diamond:"):
        n = int(entries[0].strip().split(":", 1)[1])
        return diamond(n, d).as_configuration()
    sites: dict[tuple, int] = {}
    for entry in entries:
        site, sep, count = entry.strip().rpartition(":")
        if not sep:
            raise ConfigError(f"initial entry {entry!r} is not site:count or diamond:n")
        coords = tuple(int(v) for v in site.split(","))
        if len(coords) != d:
            raise ConfigError(f"initial site {coords} has dimension {len(coords)}, "
                              f"config says {d}")
        sites[coords] = sites.get(coords, 0) + int(count)
    return Configuration.from_sites(sites)


def _parse_box(text: str | None, cfg_params: dict) -> TruncationBox:
    if text is None:
        text = str(cfg_params.get("box", "none"))
    if text == "none":
        return TruncationBox.none()
    return TruncationBox.cube(int(text))


def _parse_cap(value) -> int | None:
    if value is None or value == "none":
        return None
    return int(value)


# ---------------------------------------------------------------------------
# subcommand handlers

def _cmd_validate(args, cfg: RunConfig) -> int:
    em = _Emitter("validate", args, cfg)
    report = cfg.validation
    code = EXIT_OK
    if not report.hyp1_ok:
        code = EXIT_HYP1
    elif not report.hyp2_ok:
        code = EXIT_HYP2
    return em.finish(report.as_dict(), {}, code)


def _cmd_simulate(args, cfg: RunConfig) -> int:
    em = _Emitter("simulate", args, cfg)
    d = cfg.dimension
    A = _parse_initial(args.initial, d)
    box = _parse_box(args.box, cfg.params)
    horizon = int(_param(args, cfg, "horizon", cfg.horizon))
    cap = _parse_cap(args.cap if args.cap is not None else cfg.cap)
    replicas = int(args.replicas or cfg.replicas)
    ceiling = args.site_ceiling
    rows = []
    survived = 0
    for r in range(replicas):
        env_seed, dyn_seed = _replica_seeds(em.seed, r)
        env = QuenchedEnvironment(cfg.law, seed=env_seed, dimension=d)
        traj = run(env, A, horizon, box, cap, dyn_seed, site_ceiling=ceiling)
        survived += traj.capped or traj.tau is None
        rows.append((r, traj.tau, traj.capped, traj.final.total,
                     traj.final.occupied))
    em.table("simulate_replicas.csv",
             ["replica", "tau", "capped", "final_total", "final_occupied"],
             rows, horizon=horizon, cap=cap, replicas=replicas)
    em.table("simulate_summary.csv", ["survived_fraction", "replicas"],
             [(survived / replicas, replicas)],
             horizon=horizon, cap=cap)
    params = {"horizon": horizon, "cap": cap, "replicas": replicas,
              "initial": A.as_dict_str(), "box": repr(box)}
    return em.finish({"survived_fraction": survived / replicas}, params)


def _cmd_polymer(args, cfg: RunConfig) -> int:
    gate = _require_hyp1(cfg)
    if gate is not None:
        return gate
    em = _Emitter("polymer", args, cfg)
    t = int(_param(args, cfg, "t", 50))
    env = QuenchedEnvironment(cfg.law, seed=em.seed, dimension=cfg.dimension)
    curve = polymer.partition_function_curve(env, t)
    em.table("polymer_curve.csv", ["u", "log_Z"],
             [(u + 1, curve[u]) for u in range(t)], t=t)
    return em.finish({"log_Z_t": float(curve[-1]), "t": t}, {"t": t})


def _cmd_free_energy(args, cfg: RunConfig) -> int:
    gate = _require_hyp1(cfg)
    if gate is not None:
        return gate
    em = _Emitter("free-energy", args, cfg)
    t = int(_param(args, cfg, "t", 100))
    method = args.method or cfg.params.get("method", "slope")
    replicas = int(args.replicas or cfg.replicas)
    est = polymer.free_energy(cfg.law, cfg.dimension, t, replicas, em.seed,
                              method=method)
    curves = polymer.per_replica_curves(cfg.law, cfg.dimension, t, replicas,
                                        em.seed)
    u0 = (t + 1) // 2
    us = np.arange(u0, t + 1, dtype=np.float64)
    rows = []
    for r in range(replicas):
        slope = float(np.dot(us - us.mean(),
                             curves[r, u0 - 1:] - curves[r, u0 - 1:].mean())
                      / np.dot(us - us.mean(), us - us.mean()))
        rows.append((r, em.seed + r, curves[r, -1], curves[r, -1] / t, slope))
    em.table("free_energy_replicas.csv",
             ["replica", "env_seed", "log_Z_t", "psi_point", "psi_slope"],
             rows, t=t, method=method, replicas=replicas)
    em.table("free_energy_estimate.csv",
             ["psi_hat", "std_error", "t", "replicas", "method"],
             [(est.psi_hat, est.std_error, t, replicas, method)])
    results = {"psi_hat": est.psi_hat, "std_error": est.std_error,
               "method": est.method, "t": t, "replicas": replicas}
    return em.finish(results, {"t": t, "method": method, "replicas": replicas})


def _cmd_survival(args, cfg: RunConfig) -> int:
    em = _Emitter("survival", args, cfg)
    d = cfg.dimension
    A = _parse_initial(args.initial, d)
    horizon = int(_param(args, cfg, "horizon", cfg.horizon))
    cap = _parse_cap(args.cap if args.cap is not None else cfg.cap)
    replicas = int(args.replicas or cfg.replicas)
    records = experiments.survival_runs(
        cfg.law, A, d, horizon, cap, replicas, em.seed,
        quenched_seed=args.quenched_seed, threads=args.threads)
    est = experiments.stats.bernoulli_estimate(
        sum(r.survived for r in records), replicas)
    em.table("survival_replicas.csv",
             ["replica", "survived", "tau", "capped", "final_total",
              "final_occupied"],
             [(r.replica, r.survived, r.tau, r.capped, r.final_total,
               r.final_occupied) for r in records],
             horizon=horizon, cap=cap, replicas=replicas)
    em.table("survival_estimate.csv",
             ["proxy", "std_error", "wilson_low", "wilson_high", "replicas"],
             [(est.mean, est.std_error, est.wilson_low, est.wilson_high,
               est.replicas)], horizon=horizon, cap=cap)
    params = {"horizon": horizon, "cap": cap, "replicas": replicas,
              "initial": A.as_dict_str(),
              "quenched_seed": args.quenched_seed}
    return em.finish({"proxy": est.as_dict()}, params)


def _cmd_sweep_rho(args, cfg: RunConfig) -> int:
    gate = _require_hyp1(cfg)
    if gate is not None:
        return gate
    em = _Emitter("sweep-rho", args, cfg)
    grid_text = args.rho_grid or cfg.params.get("rho_grid", "0.4,0.6,0.8,1.0")
    if isinstance(grid_text, str):
        grid = tuple(float(x) for x in grid_text.split(","))
    else:
        grid = tuple(float(x) for x in grid_text)
    horizon = int(_param(args, cfg, "horizon", cfg.horizon))
    cap = _parse_cap(args.cap if args.cap is not None else cfg.cap)
    replicas = int(args.replicas or cfg.replicas)
    t_polymer = int(_param(args, cfg, "t_polymer", 100))
    psi_replicas = int(_param(args, cfg, "psi_replicas", 200))
    result = experiments.rho_sweep(cfg.law, cfg.dimension, grid, horizon, cap,
                                   replicas, t_polymer, em.seed,
                                   psi_replicas=psi_replicas,
                                   threads=args.threads)
    em.table("sweep_rho.csv", ["rho", "proxy", "wilson_low", "wilson_high"],
             [(rho, e.mean, e.wilson_low, e.wilson_high)
              for rho, e in zip(result.rho_grid, result.survival_proxy)],
             horizon=horizon, cap=cap, replicas=replicas,
             t_polymer=t_polymer)
    em.table("sweep_rho_prediction.csv",
             ["psi_hat", "psi_std_error", "rho_c_predicted"],
             [(result.psi_hat.psi_hat, result.psi_hat.std_error,
               result.rho_c_predicted)],
             t_polymer=t_polymer, psi_replicas=psi_replicas)
    results = {
        "rho_c_predicted": result.rho_c_predicted,
        "psi_hat": result.psi_hat.psi_hat,
        "psi_std_error": result.psi_hat.std_error,
        "proxies": {str(rho): e.as_dict()
                    for rho, e in zip(result.rho_grid, result.survival_proxy)},
        "warnings": list(result.warnings),
    }
    params = {"rho_grid": list(grid), "horizon": horizon, "cap": cap,
              "replicas": replicas, "t_polymer": t_polymer,
              "psi_replicas": psi_replicas}
    return em.finish(results, params)


def _cmd_block_event(args, cfg: RunConfig) -> int:
    em = _Emitter("block-event", args, cfg)
    d = cfg.dimension
    n = int(_param(args, cfg, "n", 4))
    L = int(_param(args, cfg, "L", 12))
    T = int(_param(args, cfg, "T", 40))
    replicas = int(args.replicas or cfg.replicas)
    spec = BlockEventSpec(n=n, L=L, T=T, d=d)
    initial = None
    if args.initial_n is not None:
        initial = diamond(int(args.initial_n), d).as_configuration()
    est, results = renorm.block_event_probability(
        cfg.law, spec, replicas, em.seed, initial=initial,
        site_ceiling=args.site_ceiling, threads=args.threads)
    header = ["replica", "occurred", "witness_t"] + [f"witness_x{j}" for j in range(d)]
    rows = []
    for r, res in enumerate(results):
        if res.witness is None:
            rows.append((r, res.occurred, None) + (None,) * d)
        else:
            rows.append((r, res.occurred, res.witness[0]) + tuple(res.witness[1]))
    em.table("block_event_replicas.csv", header, rows,
             n=n, L=L, T=T, replicas=replicas)
    em.table("block_event_estimate.csv",
             ["probability", "std_error", "wilson_low", "wilson_high",
              "replicas"],
             [(est.mean, est.std_error, est.wilson_low, est.wilson_high,
               est.replicas)], n=n, L=L, T=T)
    results_doc = {"probability": est.as_dict(), "n": n, "L": L, "T": T}
    params = {"n": n, "L": L, "T": T, "replicas": replicas,
              "initial_n": args.initial_n, "site_ceiling": args.site_ceiling}
    return em.finish(results_doc, params)


def _cmd_fkg_test(args, cfg: RunConfig) -> int:
    em = _Emitter("fkg-test", args, cfg)
    d = cfg.dimension
    t = int(_param(args, cfg, "t", 20))
    replicas = int(args.replicas or cfg.replicas)
    A = _parse_initial(args.initial, d)
    cap = _parse_cap(args.cap if args.cap is not None else cfg.cap)
    try:
        if args.f or args.g:
            if not (args.f and args.g):
                return _fail("--f and --g must be given together", EXIT_CONFIG)
            reports = [experiments.fkg_test(cfg.law, d, A, t, args.f, args.g,
                                            replicas, em.seed, cap=cap,
                                            threads=args.threads)]
        else:
            reports = experiments.fkg_suite(cfg.law, d, A, t,
                                            experiments.default_catalog(d),
                                            replicas, em.seed, cap=cap,
                                            threads=args.threads)
    except experiments.CatalogError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    em.table("fkg_pairs.csv",
             ["f", "g", "covariance", "std_error", "replicas", "passed"],
             [(r.f_spec, r.g_spec, r.covariance, r.std_error, r.replicas,
               r.passed) for r in reports],
             t=t, replicas=replicas)
    results = {"pairs": len(reports),
               "all_passed": all(r.passed for r in reports),
               "min_covariance": min(r.covariance for r in reports)}
    return em.finish(results, {"t": t, "replicas": replicas,
                               "initial": A.as_dict_str()})


def _cmd_diagnostics(args, cfg: RunConfig) -> int:
    em = _Emitter("diagnostics", args, cfg)
    kwargs = {}
    for f in ("replicas", "growth_horizon", "seed_spread_n", "diamond_grid",
              "survival_horizon", "cap", "saturation_t", "saturation_N",
              "saturation_grid", "seed_spread_grid"):
        if f in cfg.params:
            v = cfg.params[f]
            kwargs[f] = tuple(v) if isinstance(v, list) else v
    if args.replicas:
        kwargs["replicas"] = args.replicas
    options = experiments.DiagnosticsOptions(**kwargs)
    bundle = experiments.diagnostics(cfg.law, cfg.dimension, em.seed, options)
    em.table("diagnostics_growth.csv", ["t", "mean_population_alive"],
             list(zip(bundle.growth.times, bundle.growth.mean_alive)),
             replicas_alive=bundle.growth.replicas_alive)
    for name, curve, col in (
            ("diagnostics_seed_spread.csv", bundle.seed_spread, "N"),
            ("diagnostics_diamond_survival.csv", bundle.diamond_survival, "n"),
            ("diagnostics_truncation_saturation.csv",
             bundle.truncation_saturation, "L")):
        em.table(name, [col, "probability", "wilson_low", "wilson_high"],
                 [(g, e.mean, e.wilson_low, e.wilson_high)
                  for g, e in zip(curve.grid, curve.estimates)])
    results = {
        "growth_replicas_alive": bundle.growth.replicas_alive,
        "seed_spread": [e.mean for e in bundle.seed_spread.estimates],
        "diamond_survival": [e.mean for e in bundle.diamond_survival.estimates],
        "truncation_saturation": [e.mean
                                  for e in bundle.truncation_saturation.estimates],
    }
    return em.finish(results, {"options": str(options)})


_HANDLERS = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "polymer": _cmd_polymer,
    "free-energy": _cmd_free_energy,
    "survival": _cmd_survival,
    "sweep-rho": _cmd_sweep_rho,
    "block-event": _cmd_block_event,
    "fkg-test": _cmd_fkg_test,
    "diagnostics": _cmd_diagnostics,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brwlab",
        description="Branching random walks in random environments: "
                    "simulation and verification lab",
        epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides config)")
        p.add_argument("--out", default=None, help="table output directory")
        p.add_argument("--replicas", type=int, default=None)
        p.add_argument("--threads", type=int,
                       default=max(1, os.cpu_count() or 1),
                       help="worker pool size (results are pool-size independent)")
        return p

    common(sub.add_parser("validate", help="check the environment law"))

    p = common(sub.add_parser("simulate", help="raw particle runs"))
    p.add_argument("--initial", action="append",
                   help="site:count (';'-separated, repeatable) or diamond:n")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--box", default=None, help="cube radius L or 'none'")
    p.add_argument("--cap", default=None, help="population cap or 'none'")
    p.add_argument("--site-ceiling", type=int, default=None)

    p = common(sub.add_parser("polymer", help="exact quenched partition function"))
    p.add_argument("--t", type=int, default=None)

    p = common(sub.add_parser("free-energy", help="free energy estimate"))
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--method", choices=["point", "slope"], default=None)

    p = common(sub.add_parser("survival", help="survival proxy probability"))
    p.add_argument("--initial", action="append")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--cap", default=None)
    p.add_argument("--quenched-seed", type=int, default=None,
                   help="fix the environment seed (quenched mode)")

    p = common(sub.add_parser("sweep-rho", help="coupled thinning sweep"))
    p.add_argument("--rho-grid", default=None, help="comma-separated, ascending")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--cap", default=None)
    p.add_argument("--t-polymer", type=int, default=None)
    p.add_argument("--psi-replicas", type=int, default=None)

    p = common(sub.add_parser("block-event", help="block occupation probability"))
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--site-ceiling", type=int, default=renorm.DEFAULT_SITE_CEILING)
    p.add_argument("--initial-n", type=int, default=None,
                   help="seed with a smaller diamond (coupled comparisons)")

    p = common(sub.add_parser("fkg-test", help="monotone-functional covariance"))
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--f", default=None)
    p.add_argument("--g", default=None)
    p.add_argument("--initial", action="append")
    p.add_argument("--cap", default=None)

    common(sub.add_parser("diagnostics", help="finite-scale diagnostic curves"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    try:
        return _HANDLERS[args.command](args, cfg)
    except ConfigError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    except polymer.PolymerError as exc:
        if "mean" in str(exc):
            return _fail(str(exc), EXIT_HYP1)
        return _fail(str(exc), EXIT_RUNTIME)
    except Exception as exc:  # noqa: BLE001 - map to the documented exit code
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
