"""A-priori distributions over the two phases.

Priors live on the plane, not the torus: the widths studied here
(sigma <= 0.4, delta <= 0.6) leave negligible mass beyond +-pi, and the
plane is what makes the Gaussian information matrix and the rectangular
density well defined.  Wrapping happens only where the periodic
likelihood is evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


class NonDerivablePriorError(ValueError):
    """Raised when an operation needs a differentiable prior density."""


def gamma_from(sigma: float, rho: float) -> np.ndarray:
    """Covariance sigma^2 * [[1, rho], [rho, 1]] from width and Pearson coefficient."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if abs(rho) >= 1:
        raise ValueError(f"|rho| must be < 1 for a non-singular covariance, got {rho}")
    return sigma**2 * np.array([[1.0, rho], [rho, 1.0]])


def pearson(gamma: np.ndarray) -> float:
    """Pearson coefficient gamma[0,1]/sqrt(gamma[0,0]*gamma[1,1])."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma[0, 0] <= 0 or gamma[1, 1] <= 0:
        raise ValueError("covariance needs a positive diagonal")
    return float(gamma[0, 1] / np.sqrt(gamma[0, 0] * gamma[1, 1]))


@dataclass(frozen=True, eq=False)
class GaussianPrior:
    """Bivariate normal prior with mean ``mu`` and covariance ``gamma``."""

    mu: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(2)
        gamma = np.asarray(self.gamma, dtype=float).reshape(2, 2)
        if np.max(np.abs(gamma - gamma.T)) > 1e-12:
            raise ValueError("gamma must be symmetric")
        if np.linalg.eigvalsh(gamma)[0] <= 0:
            raise ValueError("gamma must be positive definite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma", gamma)

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.gamma[0, 0]))

    @property
    def rho(self) -> float:
        return pearson(self.gamma)


@dataclass(frozen=True, eq=False)
class RectPrior:
    """Uniform prior on an axis-aligned square of side ``delta`` centered at ``mu``."""

    mu: np.ndarray
    delta: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(2)
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "delta", float(self.delta))


Prior = Union[GaussianPrior, RectPrior]


def gaussian_prior(mu, sigma: float, rho: float = 0.0) -> GaussianPrior:
    """Convenience constructor from (mu, sigma, rho)."""
    return GaussianPrior(np.asarray(mu, dtype=float), gamma_from(sigma, rho))


def covariance(prior: Prior) -> np.ndarray:
    """Covariance matrix of the prior ((delta^2/12) I for the rectangle)."""
    if isinstance(prior, GaussianPrior):
        return prior.gamma.copy()
    return (prior.delta**2 / 12.0) * np.eye(2)


def density(prior: Prior, phi: np.ndarray) -> np.ndarray | float:
    """Normalized prior density at ``phi`` (shape (..., 2); vectorized)."""
    phi = np.asarray(phi, dtype=float)
    d = phi - prior.mu
    if isinstance(prior, GaussianPrior):
        inv = np.linalg.inv(prior.gamma)
        q = inv[0, 0] * d[..., 0] ** 2 + 2 * inv[0, 1] * d[..., 0] * d[..., 1] + inv[1, 1] * d[..., 1] ** 2
        norm = 1.0 / (2 * np.pi * np.sqrt(np.linalg.det(prior.gamma)))
        out = norm * np.exp(-0.5 * q)
    else:
        half = prior.delta / 2.0
        inside = (np.abs(d[..., 0]) <= half) & (np.abs(d[..., 1]) <= half)
        out = np.where(inside, 1.0 / prior.delta**2, 0.0)
    return float(out) if out.ndim == 0 else out


def sample(prior: Prior, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from the prior: shape (2,) for size=None, else (size, 2)."""
    m = 1 if size is None else int(size)
    if isinstance(prior, GaussianPrior):
        chol = np.linalg.cholesky(prior.gamma)
        draws = prior.mu + rng.standard_normal((m, 2)) @ chol.T
    else:
        draws = prior.mu + prior.delta * (rng.random((m, 2)) - 0.5)
    return draws[0] if size is None else draws


def prior_information_matrix(prior: Prior, method: str = "analytic") -> np.ndarray:
    """Information carried by the prior: integral of (dA dA^T)/A over the plane.

    For a normalized Gaussian this equals gamma^{-1}; ``method="quadrature"``
    evaluates the integral numerically instead (validation path).  The
    rectangular prior is not differentiable and has no such matrix.
    """
    if isinstance(prior, RectPrior):
        raise NonDerivablePriorError(
            "rectangular prior is not differentiable; its information matrix is undefined"
        )
    if method == "analytic":
        return np.linalg.inv(prior.gamma)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")

    from scipy.integrate import dblquad

    inv = np.linalg.inv(prior.gamma)
    sig = np.sqrt(np.diag(prior.gamma))
    lo = prior.mu - 6 * sig
    hi = prior.mu + 6 * sig

    def integrand(i, j):
        def f(y, x):
            phi = np.array([x, y])
            g = inv @ (phi - prior.mu)
            return density(prior, phi) * g[i] * g[j]

        return f

    out = np.empty((2, 2))
    for i in range(2):
        for j in range(i, 2):
            val, _ = dblquad(integrand(i, j), lo[0], hi[0], lo[1], hi[1],
                             epsabs=1e-10, epsrel=1e-8)
            out[i, j] = out[j, i] = val
    return out
