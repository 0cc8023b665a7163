"""Particle approximation of the phase posterior.

The posterior over (phi1, phi2) is tracked as a weighted cloud of
particles: Bayes updates just reweight the cloud, and a shrinkage
resampling step (bootstrap draw, contract toward the mean by ``a``,
re-inflate with Gaussian jitter of covariance (1-a^2)*Sigma) restores
diversity once the effective sample size drops below a threshold.  The
shrinkage construction preserves the first two posterior moments in
expectation.  Estimates use circular statistics because the phases are
periodic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .angles import wrap_pi, wrap_two_pi
from .interferometer import InterferometerSpec, PhasePair, likelihood, likelihood_many, sample_outcome
from .priors import Prior, sample as sample_prior

DEFAULT_PARTICLE_COUNT = 1600
RESULTANT_FLOOR = 1e-9
JITTER_FLOOR = 1e-12


class DegeneratePosteriorError(RuntimeError):
    """All particle weights vanished: the model assigns probability 0 everywhere."""


class UndefinedMeanError(RuntimeError):
    """Circular mean undefined: per-component resultant length is ~0."""


@dataclass(frozen=True, eq=False)
class ParticleSet:
    """Weighted particles: positions (m, 2) wrapped to [0, 2*pi), weights sum to 1."""

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = wrap_two_pi(np.asarray(self.positions, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError(f"positions must have shape (m, 2), got {pos.shape}")
        if w.shape != (pos.shape[0],):
            raise ValueError("weights must be one per particle")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class ResampleParams:
    """Shrinkage factor ``a`` and the ESS trigger as a fraction of the particle count."""

    a: float = 0.98
    threshold_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise ValueError(f"a must lie in [0, 1], got {self.a}")
        if not 0.0 < self.threshold_fraction <= 1.0:
            raise ValueError(
                f"threshold_fraction must lie in (0, 1], got {self.threshold_fraction}"
            )


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    """Circular mean, circular covariance and effective sample size of a cloud."""

    phi_hat: np.ndarray
    sigma: np.ndarray
    ess: float

    @property
    def total_variance(self) -> float:
        return float(np.trace(self.sigma))


def init_particles(prior: Prior, m: int = DEFAULT_PARTICLE_COUNT,
                   rng: np.random.Generator | None = None) -> ParticleSet:
    """Draw ``m`` particles from the prior with uniform weights."""
    if m < 2:
        raise ValueError(f"need at least 2 particles, got {m}")
    if rng is None:
        rng = np.random.default_rng()
    positions = sample_prior(prior, rng, size=m)
    return ParticleSet(positions, np.full(m, 1.0 / m))


def bayes_update(ps: ParticleSet, outcome: int, spec: InterferometerSpec) -> ParticleSet:
    """Multiply weights by the outcome likelihood at each particle and renormalize."""
    probs = likelihood_many(spec, ps.positions)[:, outcome]
    w = ps.weights * probs
    total = w.sum()
    if total <= 0.0:
        raise DegeneratePosteriorError(
            f"outcome {outcome} has zero likelihood at every particle"
        )
    return ParticleSet(ps.positions, w / total)


def ess(ps: ParticleSet) -> float:
    """Effective sample size 1 / sum(w_i^2)."""
    return float(1.0 / np.sum(ps.weights**2))


def circular_mean(ps: ParticleSet) -> np.ndarray:
    """Per-component circular mean arg(sum_i w_i e^{i y_ij}), wrapped to [0, 2*pi)."""
    z = ps.weights @ np.exp(1j * ps.positions)
    if np.any(np.abs(z) < RESULTANT_FLOOR):
        raise UndefinedMeanError("resultant length ~0; particles are spread around the circle")
    return wrap_two_pi(np.angle(z))


def _weighted_second_moment(w: np.ndarray, d: np.ndarray) -> np.ndarray:
    c00 = float(np.sum(w * d[:, 0] ** 2))
    c11 = float(np.sum(w * d[:, 1] ** 2))
    c01 = float(np.sum(w * d[:, 0] * d[:, 1]))
    return np.array([[c00, c01], [c01, c11]])


def circular_covariance(ps: ParticleSet) -> np.ndarray:
    """Weighted second moment of deviations unwrapped into (-pi, pi] about the circular mean."""
    mean = circular_mean(ps)
    return _weighted_second_moment(ps.weights, wrap_pi(ps.positions - mean))


def summarize(ps: ParticleSet) -> PosteriorSummary:
    """Posterior summary of a particle cloud."""
    mean = circular_mean(ps)
    sigma = _weighted_second_moment(ps.weights, wrap_pi(ps.positions - mean))
    return PosteriorSummary(mean, sigma, ess(ps))


def liu_west_resample(ps: ParticleSet, params: ResampleParams = ResampleParams(),
                      rng: np.random.Generator | None = None) -> ParticleSet:
    """Bootstrap-resample positions by weight, shrink toward the circular mean,
    jitter with covariance (1 - a^2) * Sigma, and reset weights to uniform."""
    if rng is None:
        rng = np.random.default_rng()
    mean = circular_mean(ps)
    cov = circular_covariance(ps)
    idx = rng.choice(ps.m, size=ps.m, p=ps.weights)
    # Shrinkage acts on the wrapped deviation so clouds straddling 0/2*pi behave.
    shrunk = mean + params.a * wrap_pi(ps.positions[idx] - mean)
    scale = 1.0 - params.a**2
    if scale > 0.0:
        if np.linalg.eigvalsh(cov)[0] < JITTER_FLOOR:
            cov = cov + JITTER_FLOOR * np.eye(2)
        chol = np.linalg.cholesky(scale * cov)
        shrunk = shrunk + rng.standard_normal((ps.m, 2)) @ chol.T
    return ParticleSet(shrunk, np.full(ps.m, 1.0 / ps.m))


def run_estimation(spec: InterferometerSpec, prior: Prior, phi_true: PhasePair,
                   n: int, rng: np.random.Generator, *,
                   m: int = DEFAULT_PARTICLE_COUNT,
                   params: ResampleParams = ResampleParams()) -> list[PosteriorSummary]:
    """Simulate ``n`` probes at ``phi_true`` and track the posterior.

    Returns n+1 summaries; element 0 summarizes the freshly drawn prior cloud.
    """
    summaries, _ = run_estimation_with_particles(
        spec, prior, phi_true, n, rng, m=m, params=params
    )
    return summaries


def run_estimation_with_particles(
    spec: InterferometerSpec, prior: Prior, phi_true: PhasePair, n: int,
    rng: np.random.Generator, *, m: int = DEFAULT_PARTICLE_COUNT,
    params: ResampleParams = ResampleParams(),
) -> tuple[list[PosteriorSummary], ParticleSet]:
    """Like :func:`run_estimation` but also returns the final particle cloud."""
    if n < 0:
        raise ValueError(f"probe count must be >= 0, got {n}")
    ps = init_particles(prior, m, rng)
    summaries = [summarize(ps)]
    true_dist = likelihood(spec, phi_true)
    threshold = params.threshold_fraction * m
    for _ in range(n):
        outcome = sample_outcome(true_dist, rng)
        ps = bayes_update(ps, outcome, spec)
        if ess(ps) < threshold:
            ps = liu_west_resample(ps, params, rng)
        summaries.append(summarize(ps))
    return summaries, ps


def export_trajectory(summaries: list[PosteriorSummary], path: str | Path) -> None:
    """Write one CSV row per step: k, phi1_hat, phi2_hat, sigma11, sigma12, sigma22, ess."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "phi1_hat", "phi2_hat", "sigma11", "sigma12", "sigma22", "ess"])
        for k, s in enumerate(summaries):
            writer.writerow([
                k,
                repr(float(s.phi_hat[0])), repr(float(s.phi_hat[1])),
                repr(float(s.sigma[0, 0])), repr(float(s.sigma[0, 1])),
                repr(float(s.sigma[1, 1])), repr(float(s.ess)),
            ])
