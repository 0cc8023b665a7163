"""Monte Carlo studies: simulated estimation runs against the bounds.

Each experiment repeats the estimation K times with per-run seeds derived
from a master seed by a stable 64-bit mix, so runs can be distributed
across workers without changing any result.  Truths are drawn from the
prior by default (the Van Trees / Ziv-Zakai bounds constrain the
prior-averaged risk); a fixed-at-mean mode mimics a lab run at a set
phase.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__ as _VERSION
from .angles import wrap_pi
from .bounds import BoundRecord, ZZSettings, bound_records
from .interferometer import InterferometerSpec, PhasePair, fisher_correlation, fisher_many
from .particle_filter import ResampleParams, run_estimation_with_particles
from .priors import GaussianPrior, Prior, RectPrior, gamma_from, sample

TRUTH_MODES = ("draw-from-prior", "fixed-at-mean")
MAX_PROBES = 10_000

_MIX = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def derive_seed(master_seed: int, run_index: int) -> int:
    """Stable 64-bit mix of (master_seed, run_index); splitmix64 finalizer."""
    z = (master_seed ^ ((run_index + 1) * _MIX)) & _MASK
    z = (z + _MIX) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    """Everything one Monte Carlo study needs, including bound toggles."""

    prior: Prior
    n_schedule: tuple[int, ...]
    interferometer: InterferometerSpec = field(default_factory=InterferometerSpec)
    k: int = 300
    master_seed: int = 2026
    truth_mode: str = "draw-from-prior"
    m_particles: int = 1600
    resample: ResampleParams = ResampleParams()
    compute_crb: bool = True
    compute_vt: bool = True
    compute_zz: bool = True
    zz_settings: ZZSettings = ZZSettings()
    config_id: str = "default"

    def __post_init__(self):
        sched = tuple(int(n) for n in self.n_schedule)
        if not sched:
            raise ValueError("n_schedule must not be empty")
        if any(n < 1 for n in sched) or any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("n_schedule must be strictly increasing positive integers")
        if sched[-1] > MAX_PROBES:
            raise ValueError(f"n_schedule entries must be <= {MAX_PROBES}")
        if self.k < 1:
            raise ValueError(f"repetitions k must be >= 1, got {self.k}")
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be nonnegative, got {self.master_seed}")
        if self.truth_mode not in TRUTH_MODES:
            raise ValueError(f"truth_mode must be one of {TRUTH_MODES}, got {self.truth_mode!r}")
        if self.m_particles < 2:
            raise ValueError("m_particles must be >= 2")
        object.__setattr__(self, "n_schedule", sched)


@dataclass(frozen=True, eq=False)
class AggregateRecord:
    """Across-run aggregates at one probe count, with bound values attached."""

    n: int
    v_mean: float
    v_stderr: float
    mse_mean: float
    v_crb: float | None
    v_vt: float | None
    v_zz: float | None


@dataclass(frozen=True, eq=False)
class ParticleCloud:
    """Final posterior particle cloud of one run."""

    run_index: int
    positions: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    spec: ExperimentSpec
    records: list[AggregateRecord]
    bounds: list[BoundRecord]
    clouds: list[ParticleCloud] | None = None


def _single_run(spec: ExperimentSpec, run_index: int, keep_cloud: bool):
    seed = derive_seed(spec.master_seed, run_index)
    rng = np.random.default_rng(seed)
    if spec.truth_mode == "draw-from-prior":
        truth = PhasePair(*sample(spec.prior, rng))
    else:
        truth = PhasePair(*spec.prior.mu)
    try:
        traj, ps = run_estimation_with_particles(
            spec.interferometer, spec.prior, truth, spec.n_schedule[-1], rng,
            m=spec.m_particles, params=spec.resample,
        )
    except Exception as exc:
        raise RuntimeError(f"run {run_index} (seed {seed}) failed: {exc}") from exc
    v = np.array([np.trace(traj[n].sigma) for n in spec.n_schedule])
    err = np.array([
        np.sum(wrap_pi(traj[n].phi_hat - truth.as_array()) ** 2) for n in spec.n_schedule
    ])
    cloud = ParticleCloud(run_index, ps.positions, ps.weights) if keep_cloud else None
    return v, err, cloud


def run_monte_carlo(spec: ExperimentSpec, *, threads: int = 1,
                    collect_clouds: bool = False) -> MonteCarloResult:
    """Run K estimation experiments and aggregate against the bounds."""
    indices = range(spec.k)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _single_run(spec, r, collect_clouds), indices))
    else:
        results = [_single_run(spec, r, collect_clouds) for r in indices]
    v = np.stack([res[0] for res in results])        # (k, len(schedule))
    err = np.stack([res[1] for res in results])
    clouds = [res[2] for res in results] if collect_clouds else None

    brecords = bound_records(
        spec.interferometer, spec.prior, spec.n_schedule, spec.zz_settings,
        crb=spec.compute_crb, vt=spec.compute_vt, zz=spec.compute_zz, threads=threads,
    )
    records = []
    for j, n in enumerate(spec.n_schedule):
        stderr = float(v[:, j].std(ddof=1) / np.sqrt(spec.k)) if spec.k > 1 else 0.0
        records.append(AggregateRecord(
            n=n,
            v_mean=float(v[:, j].mean()),
            v_stderr=stderr,
            mse_mean=float(err[:, j].mean()),
            v_crb=brecords[j].v_crb,
            v_vt=brecords[j].v_vt,
            v_zz=brecords[j].v_zz,
        ))
    return MonteCarloResult(spec, records, brecords, clouds)


def _require_gaussian(prior: Prior, what: str) -> GaussianPrior:
    if not isinstance(prior, GaussianPrior):
        raise ValueError(f"{what} needs a Gaussian base prior")
    return prior


def sweep_rho(base: ExperimentSpec, rho_list, *, threads: int = 1) -> dict[float, MonteCarloResult]:
    """One Monte Carlo study per prior correlation, sharing the master seed."""
    prior = _require_gaussian(base.prior, "sweep_rho")
    out = {}
    for rho in rho_list:
        rho = float(rho)
        if not -1.0 < rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {rho}")
        sub = replace(base, prior=GaussianPrior(prior.mu, gamma_from(prior.sigma, rho)),
                      config_id=f"{base.config_id}:rho={rho:+.3g}")
        out[rho] = run_monte_carlo(sub, threads=threads)
    return out


def sweep_sigma(base: ExperimentSpec, sigma_list, *, threads: int = 1,
                cloud_extremes: bool = True) -> dict[float, MonteCarloResult]:
    """One study per prior width; final particle clouds kept for the extremes."""
    prior = _require_gaussian(base.prior, "sweep_sigma")
    sigmas = [float(s) for s in sigma_list]
    if any(s <= 0 for s in sigmas):
        raise ValueError("sigma values must be positive")
    extremes = {min(sigmas), max(sigmas)} if cloud_extremes else set()
    out = {}
    for sig in sigmas:
        sub = replace(base, prior=GaussianPrior(prior.mu, gamma_from(sig, prior.rho)),
                      config_id=f"{base.config_id}:sigma={sig:g}")
        out[sig] = run_monte_carlo(sub, threads=threads, collect_clouds=sig in extremes)
    return out


def rect_prior_run(base: ExperimentSpec, delta_list, *, threads: int = 1) -> dict[float, MonteCarloResult]:
    """One study per rectangular-prior width; only the ZZ bound applies."""
    out = {}
    for delta in delta_list:
        delta = float(delta)
        if delta <= 0:
            raise ValueError(f"delta must be positive, got {delta}")
        sub = replace(base, prior=RectPrior(base.prior.mu, delta), compute_vt=False,
                      config_id=f"{base.config_id}:delta={delta:g}")
        out[delta] = run_monte_carlo(sub, threads=threads)
    return out


RHO_RULES = ("matched", "zero", "anti")


@dataclass(frozen=True, eq=False)
class GapGrid:
    """Relative gaps (v_mean - v_zz)/v_zz at N = 1 over a grid of prior means."""

    mu1_values: np.ndarray
    mu2_values: np.ndarray
    rho_rule: str
    rho: np.ndarray       # (len(mu1), len(mu2))
    gaps: np.ndarray
    v_mean: np.ndarray
    v_stderr: np.ndarray
    v_zz: np.ndarray


def n1_gap_grid(base: ExperimentSpec, mu1_values, mu2_values, rho_rule: str,
                *, threads: int = 1) -> GapGrid:
    """Single-probe tightness of the ZZ bound across prior means.

    The prior correlation at each grid point follows ``rho_rule``:
    "matched" sets rho to the Fisher correlation at the mean, "zero" leaves
    the prior uncorrelated, "anti" flips the sign of the matched value.
    """
    if rho_rule not in RHO_RULES:
        raise ValueError(f"rho_rule must be one of {RHO_RULES}, got {rho_rule!r}")
    prior = _require_gaussian(base.prior, "n1_gap_grid")
    mu1_values = np.asarray(mu1_values, dtype=float)
    mu2_values = np.asarray(mu2_values, dtype=float)
    shape = (len(mu1_values), len(mu2_values))
    rho = np.empty(shape)
    gaps = np.empty(shape)
    v_mean = np.empty(shape)
    v_stderr = np.empty(shape)
    v_zz = np.empty(shape)
    for i, mu1 in enumerate(mu1_values):
        for j, mu2 in enumerate(mu2_values):
            mu = np.array([mu1, mu2])
            if rho_rule == "zero":
                r = 0.0
            else:
                nu = fisher_correlation(fisher_many(base.interferometer, mu))
                r = nu if rho_rule == "matched" else -nu
            if not -1.0 < r < 1.0:
                raise ValueError(
                    f"rho rule {rho_rule!r} gives {r} at mu={mu}, not a valid Pearson coefficient"
                )
            sub = replace(
                base, prior=GaussianPrior(mu, gamma_from(prior.sigma, r)),
                n_schedule=(1,), compute_zz=True,
                config_id=f"{base.config_id}:{rho_rule}:mu=({mu1:g},{mu2:g})",
            )
            res = run_monte_carlo(sub, threads=threads)
            rec = res.records[0]
            rho[i, j] = r
            v_mean[i, j] = rec.v_mean
            v_stderr[i, j] = rec.v_stderr
            v_zz[i, j] = rec.v_zz
            gaps[i, j] = (rec.v_mean - rec.v_zz) / rec.v_zz
    return GapGrid(mu1_values, mu2_values, rho_rule, rho, gaps, v_mean, v_stderr, v_zz)


def cluster_count(positions: np.ndarray, weights: np.ndarray,
                  linkage_radius: float = 0.3, mass_floor: float = 0.01) -> int:
    """Number of weight-bearing modes in a particle cloud.

    Single-linkage clustering at ``linkage_radius`` on deviations unwrapped
    about the circular mean; clusters below ``mass_floor`` of the total
    weight do not count.
    """
    from scipy.cluster.hierarchy import fcluster, linkage

    positions = np.asarray(positions, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if positions.shape[0] == 1:
        return 1
    z = weights @ np.exp(1j * positions)
    d = wrap_pi(positions - np.angle(z))
    labels = fcluster(linkage(d, method="single"), t=linkage_radius, criterion="distance")
    total = weights.sum()
    count = 0
    for lab in np.unique(labels):
        if weights[labels == lab].sum() >= mass_floor * total:
            count += 1
    return count


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

AGGREGATE_CSV_COLUMNS = ("config_id", "n", "v_mean", "v_stderr", "mse_mean",
                         "v_crb", "v_vt", "v_zz")
BOUND_CSV_COLUMNS = ("n", "v_crb", "v_vt", "v_zz", "u1x", "u1y", "u2x", "u2y")


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def spec_to_dict(spec: ExperimentSpec) -> dict:
    """JSON-ready description of an experiment (for provenance manifests)."""
    u_a = spec.interferometer.u_a
    u_b = spec.interferometer.u_b
    as_pairs = lambda u: [[[float(u[j, k].real), float(u[j, k].imag)] for k in range(3)]
                          for j in range(3)]
    if isinstance(spec.prior, GaussianPrior):
        prior = {"family": "gaussian", "mu": [float(x) for x in spec.prior.mu],
                 "sigma": spec.prior.sigma, "rho": spec.prior.rho}
    else:
        prior = {"family": "rect", "mu": [float(x) for x in spec.prior.mu],
                 "delta": spec.prior.delta}
    zz = spec.zz_settings
    return {
        "config_id": spec.config_id,
        "interferometer": {"u_a": as_pairs(u_a), "u_b": as_pairs(u_b),
                           "input_port": spec.interferometer.input_port},
        "prior": prior,
        "run": {"n_schedule": list(spec.n_schedule), "repetitions": spec.k,
                "master_seed": spec.master_seed, "truth_mode": spec.truth_mode},
        "particles": {"count": spec.m_particles, "shrinkage": spec.resample.a,
                      "resample_threshold": spec.resample.threshold_fraction},
        "bounds": {"crb": spec.compute_crb, "van_trees": spec.compute_vt,
                   "ziv_zakai": spec.compute_zz,
                   "ziv_zakai_settings": {
                       "tau_points": zz.tau_points, "t_range": zz.t_range,
                       "t_tolerance": zz.t_tolerance, "quad_grid": zz.quad_grid,
                       "support_radius": zz.support_radius, "pe_form": zz.pe_form}},
    }


def export_records(result: MonteCarloResult, path: str | Path, fmt: str = "csv") -> None:
    """Write the aggregate records; JSON embeds the full experiment description."""
    path = Path(path)
    try:
        if fmt == "csv":
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(AGGREGATE_CSV_COLUMNS)
                for rec in result.records:
                    writer.writerow([
                        result.spec.config_id, rec.n, _fmt(rec.v_mean), _fmt(rec.v_stderr),
                        _fmt(rec.mse_mean), _fmt(rec.v_crb), _fmt(rec.v_vt), _fmt(rec.v_zz),
                    ])
        elif fmt == "json":
            doc = {
                "artifact_version": _VERSION,
                "spec": spec_to_dict(result.spec),
                "records": [
                    {"n": rec.n, "v_mean": rec.v_mean, "v_stderr": rec.v_stderr,
                     "mse_mean": rec.mse_mean, "v_crb": rec.v_crb, "v_vt": rec.v_vt,
                     "v_zz": rec.v_zz}
                    for rec in result.records
                ],
            }
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2)
                fh.write("\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write records to {path}: {exc}") from exc


def parse_records_csv(path: str | Path) -> list[AggregateRecord]:
    """Read back a CSV written by :func:`export_records`."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(AggregateRecord(
                n=int(row["n"]),
                v_mean=float(row["v_mean"]),
                v_stderr=float(row["v_stderr"]),
                mse_mean=float(row["mse_mean"]),
                v_crb=float(row["v_crb"]) if row["v_crb"] else None,
                v_vt=float(row["v_vt"]) if row["v_vt"] else None,
                v_zz=float(row["v_zz"]) if row["v_zz"] else None,
            ))
    return out


def export_bound_records(records: list[BoundRecord], path: str | Path, fmt: str = "csv",
                         settings: ZZSettings | None = None) -> None:
    """Write a bound table; JSON embeds the ZZ settings used."""
    path = Path(path)
    try:
        if fmt == "csv":
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(BOUND_CSV_COLUMNS)
                for rec in records:
                    writer.writerow([
                        rec.n, _fmt(rec.v_crb), _fmt(rec.v_vt), _fmt(rec.v_zz),
                        _fmt(rec.u1[0]), _fmt(rec.u1[1]), _fmt(rec.u2[0]), _fmt(rec.u2[1]),
                    ])
        elif fmt == "json":
            settings = settings or ZZSettings()
            doc = {
                "artifact_version": _VERSION,
                "ziv_zakai_settings": {
                    "tau_points": settings.tau_points, "t_range": settings.t_range,
                    "t_tolerance": settings.t_tolerance, "quad_grid": settings.quad_grid,
                    "support_radius": settings.support_radius, "pe_form": settings.pe_form},
                "records": [
                    {"n": rec.n, "v_crb": rec.v_crb, "v_vt": rec.v_vt, "v_zz": rec.v_zz,
                     "u1": [float(rec.u1[0]), float(rec.u1[1])],
                     "u2": [float(rec.u2[0]), float(rec.u2[1])]}
                    for rec in records
                ],
            }
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2)
                fh.write("\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write bound records to {path}: {exc}") from exc


def export_particle_cloud(cloud: ParticleCloud, path: str | Path) -> None:
    """Write one particle cloud as (phi1, phi2, weight) CSV triples."""
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["phi1", "phi2", "weight"])
            for (p1, p2), w in zip(cloud.positions, cloud.weights):
                writer.writerow([repr(float(p1)), repr(float(p2)), repr(float(w))])
    except OSError as exc:
        raise OSError(f"cannot write particle cloud to {path}: {exc}") from exc


def export_gap_grid(grid: GapGrid, path: str | Path) -> None:
    """Write an N=1 gap grid as CSV rows (mu1, mu2, rho, v_mean, v_stderr, v_zz, gap)."""
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["mu1", "mu2", "rho", "v_mean", "v_stderr", "v_zz", "gap"])
            for i, mu1 in enumerate(grid.mu1_values):
                for j, mu2 in enumerate(grid.mu2_values):
                    writer.writerow([
                        repr(float(mu1)), repr(float(mu2)), repr(float(grid.rho[i, j])),
                        repr(float(grid.v_mean[i, j])), repr(float(grid.v_stderr[i, j])),
                        repr(float(grid.v_zz[i, j])), repr(float(grid.gaps[i, j])),
                    ])
    except OSError as exc:
        raise OSError(f"cannot write gap grid to {path}: {exc}") from exc
