"""Monte Carlo experiment harness.

Annealed sampling draws a fresh environment per replica; the seed ladder
(master seed, purpose, replica index) makes every experiment a pure
function of its arguments, independent of scheduling. Sweeps over the
thinning parameter share all streams across grid points, so the survival
proxy is monotone in rho replica by replica, exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import stats, streams
from .envmodel import EnvironmentLaw, QuenchedEnvironment, perturb, validate
from .parallel import pmap
from .particles import Configuration, TruncationBox, run
from .polymer import FreeEnergyEstimate, free_energy
from .renorm import diamond


class CatalogError(ValueError):
    """Requested functional is outside the certified monotone catalog."""


class MonotonicityError(RuntimeError):
    """A coupled sweep violated an exact ordering; indicates a bug."""


# ---------------------------------------------------------------------------
# survival proxy

@dataclass(frozen=True)
class SurvivalRecord:
    replica: int
    survived: bool
    tau: int | None
    capped: bool
    final_total: int
    final_occupied: int


def survival_runs(law: EnvironmentLaw, A: Configuration, d: int, horizon: int,
                  cap: int | None, replicas: int, master_seed: int, *,
                  quenched_seed: int | None = None,
                  site_ceiling: int | None = None,
                  threads: int = 1) -> list[SurvivalRecord]:
    """One proxy run per replica; survived means alive at the horizon or capped."""
    if A.total < 1:
        raise ValueError("survival statistics need a nonempty initial configuration")
    box = TruncationBox.none()

    def one(r: int) -> SurvivalRecord:
        env_seed, dyn_seed = streams.replica_seeds(master_seed, r)
        if quenched_seed is not None:
            env_seed = quenched_seed
        env = QuenchedEnvironment(law, seed=env_seed, dimension=d)
        traj = run(env, A, horizon, box, cap, dyn_seed, site_ceiling=site_ceiling)
        survived = traj.capped or traj.tau is None
        return SurvivalRecord(replica=r, survived=survived, tau=traj.tau,
                              capped=traj.capped, final_total=traj.final.total,
                              final_occupied=traj.final.occupied)

    return pmap(one, range(replicas), threads)


def survival_probability(law: EnvironmentLaw, A: Configuration, d: int,
                         horizon: int, cap: int | None, replicas: int,
                         master_seed: int, *, quenched_seed: int | None = None,
                         site_ceiling: int | None = None,
                         threads: int = 1) -> stats.MCEstimate:
    records = survival_runs(law, A, d, horizon, cap, replicas, master_seed,
                            quenched_seed=quenched_seed, site_ceiling=site_ceiling,
                            threads=threads)
    return stats.bernoulli_estimate(sum(r.survived for r in records), replicas)


# ---------------------------------------------------------------------------
# thinning sweep with critical-point prediction

@dataclass(frozen=True)
class SweepResult:
    rho_grid: tuple[float, ...]
    survival_proxy: tuple[stats.MCEstimate, ...]
    psi_hat: FreeEnergyEstimate
    rho_c_predicted: float
    psi_nonpositive: bool
    warnings: tuple[str, ...] = ()
    survived: np.ndarray = field(repr=False, default=None)  # (replicas, n_rho)


def rho_sweep(law: EnvironmentLaw, d: int, rho_grid, horizon: int,
              cap: int | None, replicas: int, t_polymer: int, master_seed: int,
              *, psi_replicas: int = 200, method: str = "slope",
              site_ceiling: int | None = None, threads: int = 1) -> SweepResult:
    """Coupled survival sweep over thinning parameters.

    All rho values share environments and dynamics streams, so survival
    flags are nondecreasing in rho for every replica (asserted). The
    predicted critical thinning is exp(-psi_hat) when psi_hat > 0, else 1.
    """
    rho_grid = tuple(float(r) for r in rho_grid)
    if any(not 0.0 < r <= 1.0 for r in rho_grid):
        raise ValueError("rho grid must lie in (0, 1]")
    if sorted(rho_grid) != list(rho_grid):
        raise ValueError("rho grid must be sorted ascending")
    report = validate(law)
    if not report.hyp1_ok:
        raise ValueError("rho sweep needs a law with positive component means: "
                         + "; ".join(report.messages))
    warnings = tuple(report.messages) if not report.hyp2_ok else ()
    psi = free_energy(law, d, t_polymer, psi_replicas,
                      streams.derive_seed(master_seed, "sweep-psi"), method=method)
    psi_nonpositive = psi.psi_hat <= 0.0
    rho_c = 1.0 if psi_nonpositive else min(1.0, math.exp(-psi.psi_hat))
    if psi_nonpositive:
        warnings = warnings + (
            f"estimated free energy {psi.psi_hat:.4g} <= 0: no nontrivial "
            "critical thinning predicted",)

    laws = [perturb(law, r) for r in rho_grid]
    A = Configuration.point(0, 1, dimension=d)
    box = TruncationBox.none()

    def one(r: int) -> np.ndarray:
        env_seed, dyn_seed = streams.replica_seeds(master_seed, r)
        row = np.zeros(len(laws), dtype=bool)
        for j, thinned in enumerate(laws):
            env = QuenchedEnvironment(thinned, seed=env_seed, dimension=d)
            traj = run(env, A, horizon, box, cap, dyn_seed,
                       site_ceiling=site_ceiling)
            row[j] = traj.capped or traj.tau is None
        if np.any(row[:-1] & ~row[1:]):
            raise MonotonicityError(f"replica {r}: survival not monotone in rho")
        return row

    survived = np.array(pmap(one, range(replicas), threads), dtype=bool)
    survived = survived.reshape(replicas, len(laws))
    estimates = tuple(stats.bernoulli_estimate(int(survived[:, j].sum()), replicas)
                      for j in range(len(rho_grid)))
    return SweepResult(rho_grid=rho_grid, survival_proxy=estimates, psi_hat=psi,
                       rho_c_predicted=rho_c, psi_nonpositive=psi_nonpositive,
                       warnings=warnings, survived=survived)


# ---------------------------------------------------------------------------
# FKG covariance tests on a closed catalog of monotone functionals

@dataclass(frozen=True)
class Functional:
    """Monotone functional of a configuration, from the fixed catalog."""

    spec: str
    kind: str
    params: tuple

    def __call__(self, cfg: Configuration) -> float:
        if self.kind == "total":
            return float(cfg.total)
        if self.kind == "occupied":
            return float(cfg.occupied)
        if self.kind == "site":
            return float(tuple(self.params) in cfg.occupied_set())
        if self.kind == "halfspace":
            axis, c = self.params
            if cfg.is_empty():
                return 0.0
            sel = cfg.coords[:, axis] >= c
            return float(cfg.counts[sel].sum())
        if self.kind == "total_capped":
            return float(min(cfg.total, self.params[0]))
        if self.kind == "occupied_capped":
            return float(min(cfg.occupied, self.params[0]))
        raise AssertionError(self.kind)


def parse_functional(spec: str, d: int) -> Functional:
    """Parse a catalog entry; anything else is refused.

    Catalog: ``total``, ``occupied``, ``site:<x1,..,xd>``,
    ``halfspace:<axis>:<c>``, ``total_capped:<M>``, ``occupied_capped:<M>``.
    All are nondecreasing in the particle configuration.
    """
    parts = spec.split(":")
    kind = parts[0]
    try:
        if kind in ("total", "occupied") and len(parts) == 1:
            return Functional(spec, kind, ())
        if kind == "site" and len(parts) == 2:
            x = tuple(int(v) for v in parts[1].split(","))
            if len(x) != d:
                raise CatalogError(f"site {x} has dimension {len(x)}, expected {d}")
            return Functional(spec, kind, x)
        if kind == "halfspace" and len(parts) == 3:
            axis, c = int(parts[1]), int(parts[2])
            if not 0 <= axis < d:
                raise CatalogError(f"axis {axis} out of range for dimension {d}")
            return Functional(spec, kind, (axis, c))
        if kind in ("total_capped", "occupied_capped") and len(parts) == 2:
            m = int(parts[1])
            if m < 1:
                raise CatalogError("cap must be >= 1")
            return Functional(spec, kind, (m,))
    except CatalogError:
        raise
    except ValueError as exc:
        raise CatalogError(f"malformed functional {spec!r}: {exc}") from exc
    raise CatalogError(f"functional {spec!r} is not in the monotone catalog; "
                       "refusing (monotonicity cannot be certified)")


def default_catalog(d: int) -> list[str]:
    origin = ",".join(["0"] * d)
    return ["total", "occupied", f"site:{origin}", "halfspace:0:1",
            "total_capped:8", "occupied_capped:4"]


@dataclass(frozen=True)
class FKGReport:
    f_spec: str
    g_spec: str
    covariance: float
    std_error: float
    replicas: int
    passed: bool


def _functional_matrix(law: EnvironmentLaw, d: int, A: Configuration, t: int,
                       funcs: list[Functional], replicas: int, master_seed: int,
                       cap: int | None, threads: int = 1) -> np.ndarray:
    box = TruncationBox.none()

    def one(r: int) -> list[float]:
        env_seed, dyn_seed = streams.replica_seeds(master_seed, r)
        env = QuenchedEnvironment(law, seed=env_seed, dimension=d)
        traj = run(env, A, t, box, cap, dyn_seed)
        if traj.capped:
            raise RuntimeError(f"replica {r} hit the population cap before time {t}; "
                               "raise the cap or lower t")
        cfg = traj.config_at(t)
        return [f(cfg) for f in funcs]

    return np.array(pmap(one, range(replicas), threads), dtype=np.float64)


def _covariance_report(f_spec, g_spec, fv, gv) -> FKGReport:
    n = fv.size
    prod = (fv - fv.mean()) * (gv - gv.mean())
    cov = float(prod.sum() / (n - 1))
    se = float(prod.std(ddof=1) / math.sqrt(n))
    return FKGReport(f_spec=f_spec, g_spec=g_spec, covariance=cov, std_error=se,
                     replicas=n, passed=cov >= -3.0 * se)


def fkg_test(law: EnvironmentLaw, d: int, A: Configuration, t: int,
             f_spec: str, g_spec: str, replicas: int, master_seed: int, *,
             cap: int | None = None, threads: int = 1) -> FKGReport:
    """Estimate Cov(f, g) at time t under the annealed law.

    Both functionals are nondecreasing, so the true covariance is
    nonnegative; the test passes when the estimate is >= -3 SE.
    """
    funcs = [parse_functional(f_spec, d), parse_functional(g_spec, d)]
    values = _functional_matrix(law, d, A, t, funcs, replicas, master_seed, cap,
                                threads)
    return _covariance_report(f_spec, g_spec, values[:, 0], values[:, 1])


def fkg_suite(law: EnvironmentLaw, d: int, A: Configuration, t: int,
              specs, replicas: int, master_seed: int, *,
              cap: int | None = None, threads: int = 1) -> list[FKGReport]:
    """All unordered pairs (including diagonal) from one set of runs."""
    funcs = [parse_functional(s, d) for s in specs]
    values = _functional_matrix(law, d, A, t, funcs, replicas, master_seed, cap,
                                threads)
    reports = []
    for i in range(len(funcs)):
        for j in range(i, len(funcs)):
            reports.append(_covariance_report(funcs[i].spec, funcs[j].spec,
                                              values[:, i], values[:, j]))
    return reports


# ---------------------------------------------------------------------------
# diagnostics curves

@dataclass(frozen=True)
class DiagnosticsOptions:
    replicas: int = 400
    growth_horizon: int = 30
    seed_spread_n: int = 2
    seed_spread_grid: tuple[int, ...] = (0, 1, 2, 4, 8, 16, 32)
    diamond_grid: tuple[int, ...] = (0, 2, 4, 6)
    survival_horizon: int = 100
    cap: int = 100_000
    saturation_t: int = 20
    saturation_N: int = 10
    saturation_grid: tuple[int, ...] = (2, 4, 8, 16)


@dataclass(frozen=True)
class Curve:
    grid: tuple
    estimates: tuple  # MCEstimate per grid point


@dataclass(frozen=True)
class GrowthCurve:
    times: tuple[int, ...]
    mean_alive: tuple[float, ...]
    replicas_alive: int


@dataclass(frozen=True)
class DiagnosticsBundle:
    growth: GrowthCurve
    seed_spread: Curve
    diamond_survival: Curve
    truncation_saturation: Curve


def diagnostics(law: EnvironmentLaw, d: int, master_seed: int,
                options: DiagnosticsOptions = DiagnosticsOptions()
                ) -> DiagnosticsBundle:
    """Four finite-scale diagnostic curves.

    growth: mean population against time among replicas alive at the
    horizon. seed_spread: probability that N particles seeded at the
    origin fill the forward diamond translate within the corridor box by
    time 2n, against N (coupled: exactly monotone per replica).
    diamond_survival: survival proxy against the radius of the initial
    diamond (coupled). truncation_saturation: probability the truncated
    population at a fixed time reaches N, against the box radius
    (coupled).
    """
    opt = options
    R = opt.replicas

    # (a) conditional growth
    box_none = TruncationBox.none()
    A0 = Configuration.point(0, 1, dimension=d)
    sums = np.zeros(opt.growth_horizon + 1, dtype=np.float64)
    alive = 0
    for r in range(R):
        env_seed, dyn_seed = streams.replica_seeds(master_seed, r)
        env = QuenchedEnvironment(law, seed=env_seed, dimension=d)
        traj = run(env, A0, opt.growth_horizon, box_none, opt.cap, dyn_seed)
        if traj.tau is None and not traj.capped:
            alive += 1
            sums += traj.totals
    growth = GrowthCurve(times=tuple(range(opt.growth_horizon + 1)),
                         mean_alive=tuple((sums / alive) if alive else sums),
                         replicas_alive=alive)

    # (b) many seeds fill a forward diamond inside the corridor
    n = opt.seed_spread_n
    if n % 2 or n < 2:
        raise ValueError("seed_spread_n must be a positive even integer")
    corridor = TruncationBox.explicit(
        [x for x in _corridor_sites(n, d)], dimension=d)
    dia = diamond(n, d)
    target = [tuple(int(v) for v in s) for s in dia.sites + _e1(n, d)]
    hits = np.zeros(len(opt.seed_spread_grid), dtype=np.int64)
    for r in range(R):
        env_seed, dyn_seed = streams.replica_seeds(master_seed, r)
        env = QuenchedEnvironment(law, seed=env_seed, dimension=d)
        prev = False
        for j, N in enumerate(opt.seed_spread_grid):
            if N == 0:
                ok = False
            else:
                A = Configuration.point((0,) * d, N)
                traj = run(env, A, 2 * n, corridor, None, dyn_seed)
                occ = traj.config_at(2 * n).occupied_set()
                ok = all(s in occ for s in target)
            if prev and not ok:
                raise MonotonicityError(f"seed_spread not monotone at replica {r}")
            prev = ok
            hits[j] += ok
    seed_spread = Curve(grid=opt.seed_spread_grid,
                        estimates=tuple(stats.bernoulli_estimate(int(h), R) for h in hits))

    # (c) survival proxy from growing diamonds
    hits = np.zeros(len(opt.diamond_grid), dtype=np.int64)
    for r in range(R):
        env_seed, dyn_seed = streams.replica_seeds(master_seed, r)
        env = QuenchedEnvironment(law, seed=env_seed, dimension=d)
        prev = False
        for j, nn in enumerate(opt.diamond_grid):
            A = diamond(nn, d).as_configuration()
            traj = run(env, A, opt.survival_horizon, box_none, opt.cap, dyn_seed)
            ok = traj.capped or traj.tau is None
            if prev and not ok:
                raise MonotonicityError(f"diamond_survival not monotone at replica {r}")
            prev = ok
            hits[j] += ok
    diamond_survival = Curve(grid=opt.diamond_grid,
                             estimates=tuple(stats.bernoulli_estimate(int(h), R) for h in hits))

    # (d) truncated population saturation in the box radius
    hits = np.zeros(len(opt.saturation_grid), dtype=np.int64)
    t_obs, N_obs = opt.saturation_t, opt.saturation_N
    if opt.cap is not None and N_obs > opt.cap:
        raise ValueError("saturation threshold exceeds the cap")
    for r in range(R):
        env_seed, dyn_seed = streams.replica_seeds(master_seed, r)
        env = QuenchedEnvironment(law, seed=env_seed, dimension=d)
        prev = False
        for j, L in enumerate(opt.saturation_grid):
            traj = run(env, A0, t_obs, TruncationBox.cube(L), opt.cap, dyn_seed)
            if traj.capped:
                ok = True
            elif traj.tau is not None and traj.tau <= t_obs:
                ok = False
            else:
                ok = traj.total_at(t_obs) >= N_obs
            if prev and not ok:
                raise MonotonicityError(f"truncation_saturation not monotone at replica {r}")
            prev = ok
            hits[j] += ok
    truncation_saturation = Curve(grid=opt.saturation_grid,
                                  estimates=tuple(stats.bernoulli_estimate(int(h), R)
                                                  for h in hits))

    return DiagnosticsBundle(growth=growth, seed_spread=seed_spread,
                             diamond_survival=diamond_survival,
                             truncation_saturation=truncation_saturation)


def _e1(n: int, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=np.int64)
    v[0] = n
    return v


def _corridor_sites(n: int, d: int):
    import itertools
    first = range(0, 2 * n + 1)
    rest = [range(-n, n + 1)] * (d - 1)
    return itertools.product(first, *rest)
