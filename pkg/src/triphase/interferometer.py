"""Forward model of a three-mode interferometer.

A single photon enters one port of an input unitary ``u_a``, the three
internal arms pick up phases ``(phi1, 0, phi2)`` relative to the central
reference arm, and an output unitary ``u_b`` recombines the modes before
detection.  Everything downstream (Bayesian updates, information bounds)
only needs the 3-outcome detection probabilities produced here, plus
their derivatives with respect to the two phases.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .angles import wrap_two_pi

UNITARY_ATOL = 1e-10
# Outcomes with probability below this are dropped from Fisher sums: at an
# interior zero of a smooth nonnegative probability the gradient vanishes,
# so the dropped term's limit is 0.
FISHER_PROB_FLOOR = 1e-12


def require_unitary(u: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Return ``u`` as a complex 3x3 array, raising if it is not unitary."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (3, 3):
        raise ValueError(f"{name} must be 3x3, got shape {u.shape}")
    dev = np.max(np.abs(u.conj().T @ u - np.eye(3)))
    if dev > UNITARY_ATOL:
        raise ValueError(f"{name} is not unitary: max |U^dag U - I| = {dev:.3e}")
    return u


def dft_tritter() -> np.ndarray:
    """Balanced three-mode splitter: F[j,k] = exp(2*pi*i*j*k/3)/sqrt(3)."""
    j, k = np.meshgrid(np.arange(3), np.arange(3), indexing="ij")
    return np.exp(2j * np.pi * j * k / 3) / np.sqrt(3)


@dataclass(frozen=True)
class PhasePair:
    """The two unknown phases, stored wrapped into [0, 2*pi)."""

    phi1: float
    phi2: float

    def __post_init__(self):
        object.__setattr__(self, "phi1", float(wrap_two_pi(self.phi1)))
        object.__setattr__(self, "phi2", float(wrap_two_pi(self.phi2)))

    def as_array(self) -> np.ndarray:
        return np.array([self.phi1, self.phi2])


@dataclass(frozen=True, eq=False)
class InterferometerSpec:
    """Input/output unitaries plus the injection port.

    Defaults describe the ideal device: balanced discrete-Fourier
    tritters on both sides, photon injected in the first port.
    """

    u_a: np.ndarray = field(default_factory=dft_tritter)
    u_b: np.ndarray = field(default_factory=dft_tritter)
    input_port: int = 0

    def __post_init__(self):
        object.__setattr__(self, "u_a", require_unitary(self.u_a, "u_a"))
        object.__setattr__(self, "u_b", require_unitary(self.u_b, "u_b"))
        if self.input_port not in (0, 1, 2):
            raise ValueError(f"input_port must be 0, 1 or 2, got {self.input_port}")

    def amplitude_coeffs(self) -> np.ndarray:
        """3x3 matrix C with amp_x = C[x,0]*e^{i*phi1} + C[x,1] + C[x,2]*e^{i*phi2}."""
        return self.u_b * self.u_a[:, self.input_port][None, :]


def phase_screen(phi: PhasePair) -> np.ndarray:
    """Diagonal phase unitary diag(e^{i*phi1}, 1, e^{i*phi2}); arm 1 is the reference."""
    return np.diag([np.exp(1j * phi.phi1), 1.0, np.exp(1j * phi.phi2)])


def likelihood(spec: InterferometerSpec, phi: PhasePair) -> np.ndarray:
    """Detection probabilities p(x|phi) for the three output modes."""
    return likelihood_many(spec, phi.as_array())


def likelihood_many(spec: InterferometerSpec, phi: np.ndarray) -> np.ndarray:
    """Vectorized likelihood: ``phi`` has shape (..., 2), result (..., 3)."""
    phi = np.asarray(phi, dtype=float)
    c = spec.amplitude_coeffs()
    e1 = np.exp(1j * phi[..., 0])
    e2 = np.exp(1j * phi[..., 1])
    amp = c[:, 0] * e1[..., None] + c[:, 1] + c[:, 2] * e2[..., None]
    return amp.real**2 + amp.imag**2


def sample_outcome(dist: np.ndarray, rng: np.random.Generator) -> int:
    """Draw an outcome index in {0,1,2} from a 3-outcome distribution."""
    edges = np.cumsum(dist)
    x = int(np.searchsorted(edges, rng.random(), side="right"))
    return min(x, 2)


def fisher_matrix(spec: InterferometerSpec, phi: PhasePair) -> np.ndarray:
    """Fisher information of the phase pair from analytic amplitude derivatives.

    F[i,j] = sum_x d_i p(x|phi) d_j p(x|phi) / p(x|phi), skipping outcomes
    with p(x|phi) < FISHER_PROB_FLOOR.
    """
    return fisher_many(spec, phi.as_array())


def fisher_many(spec: InterferometerSpec, phi: np.ndarray) -> np.ndarray:
    """Vectorized Fisher matrix: ``phi`` shape (..., 2), result (..., 2, 2)."""
    phi = np.asarray(phi, dtype=float)
    c = spec.amplitude_coeffs()
    e1 = np.exp(1j * phi[..., 0])
    e2 = np.exp(1j * phi[..., 1])
    amp = c[:, 0] * e1[..., None] + c[:, 1] + c[:, 2] * e2[..., None]
    p = amp.real**2 + amp.imag**2
    # d amp / d phi_1 = i e^{i phi1} C[:,0];  d p = 2 Re[conj(amp) d amp]
    d1 = 2.0 * np.real(np.conj(amp) * (1j * e1[..., None] * c[:, 0]))
    d2 = 2.0 * np.real(np.conj(amp) * (1j * e2[..., None] * c[:, 2]))
    keep = p >= FISHER_PROB_FLOOR
    inv_p = np.where(keep, 1.0 / np.where(keep, p, 1.0), 0.0)
    f = np.empty(phi.shape[:-1] + (2, 2))
    f[..., 0, 0] = np.sum(d1 * d1 * inv_p, axis=-1)
    f[..., 0, 1] = np.sum(d1 * d2 * inv_p, axis=-1)
    f[..., 1, 0] = f[..., 0, 1]
    f[..., 1, 1] = np.sum(d2 * d2 * inv_p, axis=-1)
    return f


def fisher_correlation(f: np.ndarray) -> float:
    """Correlation coefficient -F[0,1]/sqrt(F[0,0]*F[1,1]) of a Fisher matrix.

    The sign flip makes the value comparable with the Pearson coefficient of
    a covariance matrix, since covariances come from inverting F.
    """
    f = np.asarray(f, dtype=float)
    if f[0, 0] <= 0 or f[1, 1] <= 0:
        raise ValueError(
            "Fisher matrix has a non-positive diagonal; the phase point is uninformative"
        )
    return float(-f[0, 1] / np.sqrt(f[0, 0] * f[1, 1]))


def load_unitary(path: str | Path) -> np.ndarray:
    """Load a 3x3 unitary from a JSON file.

    Schema: ``{"unitary": [[[re, im], ...3 entries], ...3 rows]}``.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "unitary" not in doc:
        raise ValueError(f"{path}: expected a JSON object with a 'unitary' key")
    rows = doc["unitary"]
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: 'unitary' must be a 3x3 array of [re, im] pairs") from exc
    if arr.shape != (3, 3, 2):
        raise ValueError(
            f"{path}: 'unitary' must be a 3x3 array of [re, im] pairs, got shape {arr.shape}"
        )
    return require_unitary(arr[..., 0] + 1j * arr[..., 1], str(path))


def save_unitary(u: np.ndarray, path: str | Path) -> None:
    """Write a unitary in the schema read by :func:`load_unitary`."""
    u = require_unitary(u)
    rows = [[[float(u[j, k].real), float(u[j, k].imag)] for k in range(3)] for j in range(3)]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"unitary": rows}, fh, indent=2)
        fh.write("\n")
