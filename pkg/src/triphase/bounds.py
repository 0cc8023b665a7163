"""Lower bounds on the Bayes risk of two-phase estimation.

Three bounds are provided, all as total variances (trace of a 2x2
covariance bound):

* Cramer-Rao: Tr[F(phi)^-1]/N from the local Fisher information.
* Van Trees: Tr[H^-1]/N, where H averages the Fisher matrix over the
  prior and adds the prior's own information matrix divided by N.
  Requires a differentiable prior.
* Ziv-Zakai (multiparameter, scalar form): for a unit direction u,

      Z(u) = 1/2 * int_0^pi tau * max_{v: u.v = 1}
             int [A(phi) + A(phi + v*tau)] * P_e(phi, phi + v*tau) dphi dtau

  where P_e is the minimum error probability of deciding between the two
  displaced phase settings from N probe outcomes.  The total-variance
  bound sums Z over two orthonormal directions.

P_e is evaluated exactly over the multinomial sufficient statistic: the
probability of an N-outcome string depends only on the outcome counts
(n0, n1, n2), so the sum over 3^N strings collapses to the
(N+1)(N+2)/2 count vectors.  A numba kernel streams over that lattice;
whole rows whose binomial-marginal mass cannot contribute more than a
1e-12 tail are skipped, which keeps N = 100 evaluations affordable.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import gammaln

from .interferometer import InterferometerSpec, fisher_many, likelihood_many
from .priors import (
    GaussianPrior,
    NonDerivablePriorError,
    Prior,
    RectPrior,
    covariance,
    density,
    prior_information_matrix,
)

#: Absolute tail mass the P_e kernel may discard inside the ZZ quadrature.
PE_TAIL_TOL = 1e-12
#: Bhattacharyya prior-overlap level below which a shifted integrand is treated as 0.
OVERLAP_FLOOR = 1e-12
#: Grid points where sqrt(A(phi) A(phi+s)) falls below this fraction of the
#: prior peak cannot contribute to the displacement integral.
GRID_KEEP_REL = 1e-14

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0


class SingularInformationError(ValueError):
    """An information matrix that should be inverted is singular."""


@dataclass(frozen=True)
class ZZSettings:
    """Numerical policy for the Ziv-Zakai evaluation.

    tau_points     midpoint-rule points for the outer integral over (0, pi]
    t_range        half-width of the search interval for the direction parameter
    t_tolerance    convergence tolerance of the scalar maximization
    quad_grid      Gauss-Legendre points per axis for the phi integral
    support_radius truncation of Gaussian-prior integrals, in prior std devs
    pe_form        "l1" (minimum-error probability) or "squared" (comparison form)
    """

    tau_points: int = 64
    t_range: float = 3.0
    t_tolerance: float = 1e-3
    quad_grid: int = 60
    support_radius: float = 5.0
    pe_form: str = "l1"

    def __post_init__(self):
        if self.tau_points < 8 or self.quad_grid < 8:
            raise ValueError("tau_points and quad_grid must be at least 8")
        if self.t_tolerance <= 0 or self.t_range <= 0 or self.support_radius <= 0:
            raise ValueError("tolerances and ranges must be positive")
        if self.pe_form not in ("l1", "squared"):
            raise ValueError(f"pe_form must be 'l1' or 'squared', got {self.pe_form!r}")


@dataclass(frozen=True, eq=False)
class VanTreesMatrix:
    """Prior-averaged information matrix H (radians^-2)."""

    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float).reshape(2, 2)
        if np.max(np.abs(h - h.T)) > 1e-10:
            raise ValueError("H must be symmetric")
        object.__setattr__(self, "h", h)


@dataclass(frozen=True, eq=False)
class BoundRecord:
    """Bound values at one probe count, with the ZZ directions used."""

    n: int
    v_crb: float | None
    v_vt: float | None
    v_zz: float | None
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        for name in ("v_crb", "v_vt", "v_zz"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ValueError(f"{name} must be nonnegative, got {val}")
        u1 = np.asarray(self.u1, dtype=float).reshape(2)
        u2 = np.asarray(self.u2, dtype=float).reshape(2)
        gram = np.array([[u1 @ u1, u1 @ u2], [u1 @ u2, u2 @ u2]])
        if np.max(np.abs(gram - np.eye(2))) > 1e-10:
            raise ValueError("directions must be orthonormal")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)


def _inv_2x2(m: np.ndarray, what: str) -> np.ndarray:
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if not np.isfinite(det) or abs(det) < 1e-300:
        raise SingularInformationError(f"{what} is singular (det = {det!r})")
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det


def crb_total_variance(f: np.ndarray, n: int) -> float:
    """Cramer-Rao total variance Tr[F^-1]/N."""
    if n < 1:
        raise ValueError(f"probe count must be >= 1, got {n}")
    f = np.asarray(f, dtype=float)
    return float(np.trace(_inv_2x2(f, "Fisher matrix"))) / n


def _gl_grid(lo: np.ndarray, hi: np.ndarray, n_per_axis: int):
    """Tensor-product Gauss-Legendre nodes/weights on [lo, hi] (2D box)."""
    x, w = np.polynomial.legendre.leggauss(n_per_axis)
    pts_1d, wts_1d = [], []
    for i in range(2):
        half = 0.5 * (hi[i] - lo[i])
        pts_1d.append(lo[i] + half * (x + 1.0))
        wts_1d.append(w * half)
    p1, p2 = np.meshgrid(pts_1d[0], pts_1d[1], indexing="ij")
    pts = np.column_stack([p1.ravel(), p2.ravel()])
    wts = np.outer(wts_1d[0], wts_1d[1]).ravel()
    return pts, wts


def van_trees_matrix(spec: InterferometerSpec, prior: Prior, n: int,
                     quad_grid: int = 60, support_radius: float = 5.0) -> VanTreesMatrix:
    """H = int A(phi) F(phi) dphi + prior_information_matrix / N."""
    if isinstance(prior, RectPrior):
        raise NonDerivablePriorError(
            "the Van Trees bound needs a differentiable prior; the rectangular prior is not"
        )
    if n < 1:
        raise ValueError(f"probe count must be >= 1, got {n}")
    sig = np.sqrt(np.diag(prior.gamma))
    pts, wts = _gl_grid(prior.mu - support_radius * sig, prior.mu + support_radius * sig,
                        quad_grid)
    a = density(prior, pts)
    f = fisher_many(spec, pts)
    avg_f = np.einsum("g,gij->ij", wts * a, f)
    avg_f = 0.5 * (avg_f + avg_f.T)
    return VanTreesMatrix(avg_f + prior_information_matrix(prior) / n)


def van_trees_total_variance(h: VanTreesMatrix, n: int) -> float:
    """Van Trees total variance Tr[H^-1]/N."""
    if n < 1:
        raise ValueError(f"probe count must be >= 1, got {n}")
    return float(np.trace(_inv_2x2(h.h, "Van Trees matrix"))) / n


def direction_pair_from(sigma_ref: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal eigenvectors of a PSD 2x2 matrix, descending eigenvalue.

    Ties (including isotropic matrices) resolve to the coordinate axes.
    """
    s = np.asarray(sigma_ref, dtype=float).reshape(2, 2)
    scale = max(abs(s[0, 0]), abs(s[1, 1]), 1e-30)
    if abs(s[0, 1]) <= 1e-12 * scale:
        if s[0, 0] >= s[1, 1]:
            return np.array([1.0, 0.0]), np.array([0.0, 1.0])
        return np.array([0.0, 1.0]), np.array([1.0, 0.0])
    vals, vecs = np.linalg.eigh(s)
    u1, u2 = vecs[:, 1], vecs[:, 0]
    out = []
    for u in (u1, u2):
        lead = u[0] if abs(u[0]) > 1e-12 else u[1]
        out.append(u * np.sign(lead))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# Minimum error probability over the multinomial sufficient statistic
# ---------------------------------------------------------------------------

def _pmf_tables(p: np.ndarray, n: int) -> np.ndarray:
    """Per-axis power tables T[i][g, k] = s * p[g, i]^k / k!, s = (n!)^(1/3).

    The product T0[n0] * T1[n1] * T2[n2] reconstructs the multinomial pmf
    n!/(n0! n1! n2!) * p0^n0 p1^n1 p2^n2.  Splitting the n! scale over the
    three factors keeps every table entry and staged product representable
    up to n of several hundred.
    """
    p = np.asarray(p, dtype=float)
    g = p.shape[0]
    s = math.exp(math.lgamma(n + 1) / 3.0)
    t = np.empty((3, g, n + 1))
    t[:, :, 0] = s
    for k in range(1, n + 1):
        t[:, :, k] = t[:, :, k - 1] * p.T / k
    return t


def _binom_tables(p0: np.ndarray, n: int) -> np.ndarray:
    """Binomial(n, p0) pmf table B[g, k]; the marginal of the first outcome count."""
    g = p0.shape[0]
    powp = np.empty((g, n + 1))
    powq = np.empty((g, n + 1))
    powp[:, 0] = 1.0
    powq[:, 0] = 1.0
    q0 = 1.0 - p0
    for k in range(1, n + 1):
        powp[:, k] = powp[:, k - 1] * p0
        powq[:, k] = powq[:, k - 1] * q0
    k = np.arange(n + 1)
    comb = np.exp(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))
    return comb[None, :] * powp * powq[:, ::-1]


@njit(cache=True, nogil=True)
def _pe_min_kernel(t0a, t1a, t2a, ba, idx, p1, comb, pi0, pi1, n, scale, row_tol):
    """P_e = sum over count vectors of min(pi0*M0, pi1*M1), per kept grid point.

    The p0 side arrives as precomputed tables (t*a over the full grid, with
    ``idx`` selecting the kept rows); the p1 side is built per point from the
    raw probabilities.  Rows (fixed first count n0) are skipped when both
    binomial marginals bound the row's contribution below row_tol; the
    skipped mass totals at most (n+1)*row_tol.
    """
    m = idx.shape[0]
    out = np.empty(m)
    tb0 = np.empty(n + 1)
    tb1 = np.empty(n + 1)
    tb2 = np.empty(n + 1)
    bb = np.empty(n + 1)
    powq = np.empty(n + 1)
    for gi in range(m):
        g = idx[gi]
        q0 = p1[gi, 0]
        q1 = p1[gi, 1]
        q2 = p1[gi, 2]
        tb0[0] = scale
        tb1[0] = scale
        tb2[0] = scale
        powq[0] = 1.0
        qc = 1.0 - q0
        for k in range(1, n + 1):
            tb0[k] = tb0[k - 1] * q0 / k
            tb1[k] = tb1[k - 1] * q1 / k
            tb2[k] = tb2[k - 1] * q2 / k
            powq[k] = powq[k - 1] * qc
        pw = 1.0
        for k in range(n + 1):
            bb[k] = comb[k] * pw * powq[n - k]
            pw *= q0
        acc = 0.0
        w0 = pi0[gi]
        w1 = pi1[gi]
        for n0 in range(n + 1):
            ra = w0 * ba[g, n0]
            rb = w1 * bb[n0]
            bound = ra if ra < rb else rb
            if bound < row_tol:
                continue
            arow = w0 * t0a[g, n0]
            brow = w1 * tb0[n0]
            for n1 in range(n + 1 - n0):
                n2 = n - n0 - n1
                a = arow * t1a[g, n1] * t2a[g, n2]
                b = brow * tb1[n1] * tb2[n2]
                acc += a if a < b else b
        out[gi] = acc
    return out


@njit(cache=True, nogil=True)
def _pe_sq_sum_kernel(t0a, t1a, t2a, t0b, t1b, t2b, inv0, inv1, inv2, pi0, pi1, n):
    """S(g) = sum over count vectors of (pi0*M0 - pi1*M1)^2 / multinomial_coef."""
    g_count = t0a.shape[0]
    out = np.empty(g_count)
    for g in range(g_count):
        acc = 0.0
        w0 = pi0[g]
        w1 = pi1[g]
        for n0 in range(n + 1):
            arow = w0 * t0a[g, n0]
            brow = w1 * t0b[g, n0]
            for n1 in range(n + 1 - n0):
                n2 = n - n0 - n1
                d = arow * t1a[g, n1] * t2a[g, n2] - brow * t1b[g, n1] * t2b[g, n2]
                acc += d * d * ((inv0[n0] * inv1[n1]) * inv2[n2])
        out[g] = acc
    return out


def _pe_batch(p0: np.ndarray | None, p1: np.ndarray, pi0: np.ndarray, n: int,
              squared: bool = False, row_tol: float = 0.0,
              tables0: np.ndarray | None = None,
              binom0: np.ndarray | None = None,
              idx: np.ndarray | None = None) -> np.ndarray:
    """Minimum error probability for batches of 3-outcome distributions.

    p1: (G', 3); pi0: (G',).  ``tables0``/``binom0`` carry the precomputed
    tables of a fixed p0 batch (reused across many p1 evaluations) and
    ``idx`` selects which of its rows pair up with the p1 rows; without
    them the tables are built from ``p0`` directly.
    """
    p1 = np.atleast_2d(np.asarray(p1, dtype=float))
    pi0 = np.atleast_1d(np.asarray(pi0, dtype=float))
    pi1 = 1.0 - pi0
    if tables0 is None:
        p0 = np.atleast_2d(np.asarray(p0, dtype=float))
        tables0 = _pmf_tables(p0, n)
        if binom0 is None and not squared:
            binom0 = _binom_tables(p0[:, 0], n)
    if idx is None:
        idx = np.arange(p1.shape[0])
    if squared:
        tb = _pmf_tables(p1, n)
        t0a = np.ascontiguousarray(tables0[0][idx])
        t1a = np.ascontiguousarray(tables0[1][idx])
        t2a = np.ascontiguousarray(tables0[2][idx])
        k = np.arange(n + 1, dtype=float)
        lg = gammaln(k + 1)
        inv0 = np.exp(lg - gammaln(n + 1))   # k!/n!
        inv1 = np.exp(lg)                    # k!
        s = _pe_sq_sum_kernel(t0a, t1a, t2a, tb[0], tb[1], tb[2],
                              inv0, inv1, inv1.copy(), pi0, pi1, n)
        return 0.5 * (1.0 - s)
    k = np.arange(n + 1)
    comb = np.exp(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))
    scale = math.exp(math.lgamma(n + 1) / 3.0)
    return _pe_min_kernel(tables0[0], tables0[1], tables0[2], binom0,
                          idx.astype(np.int64), p1, comb, pi0, pi1, n, scale, row_tol)


def min_error_probability(p0: np.ndarray, p1: np.ndarray, pi0: float, n: int,
                          *, squared: bool = False) -> float:
    """Minimum error probability of deciding between p0 and p1 from n outcomes.

    The default is the exact minimum Bayes error
    1/2 * (1 - sum_x |pi0 P0(x) - pi1 P1(x)|), summed over the multinomial
    count statistic rather than all 3^n outcome strings.  ``squared=True``
    evaluates the comparison form with the absolute difference squared.
    """
    if not 0.0 <= pi0 <= 1.0:
        raise ValueError(f"pi0 must lie in [0, 1], got {pi0}")
    if n < 1:
        raise ValueError(f"probe count must be >= 1, got {n}")
    if n > 170 and squared:
        raise ValueError("squared comparison form limited to n <= 170")
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    for name, p in (("p0", p0), ("p1", p1)):
        if p.shape != (3,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} must be a 3-outcome probability distribution")
    out = _pe_batch(p0[None, :], p1[None, :], np.array([float(pi0)]), n, squared=squared)
    return float(out[0])


# ---------------------------------------------------------------------------
# Ziv-Zakai bound
# ---------------------------------------------------------------------------

class _ZZEvaluator:
    """Shared state for evaluating Z(u) at fixed (spec, prior, n, settings)."""

    def __init__(self, spec: InterferometerSpec, prior: Prior, n: int,
                 settings: ZZSettings):
        if n < 1:
            raise ValueError(f"probe count must be >= 1, got {n}")
        self.prior = prior
        self.spec = spec
        self.n = n
        self.settings = settings
        self.squared = settings.pe_form == "squared"
        if isinstance(prior, GaussianPrior):
            sig = np.sqrt(np.diag(prior.gamma))
            lo = prior.mu - settings.support_radius * sig
            hi = prior.mu + settings.support_radius * sig
            self._inv_gamma = np.linalg.inv(prior.gamma)
            self._peak = float(density(prior, prior.mu))
        else:
            half = prior.delta / 2.0
            lo = prior.mu - half
            hi = prior.mu + half
            self._inv_gamma = None
            self._peak = 1.0 / prior.delta**2
        self.pts, self.wts = _gl_grid(lo, hi, settings.quad_grid)
        self.a0 = np.asarray(density(prior, self.pts))
        p0 = likelihood_many(spec, self.pts)
        self._tables0 = _pmf_tables(p0, n)
        self._binom0 = None if self.squared else _binom_tables(p0[:, 0], n)
        self._row_tol = 0.0 if self.squared else PE_TAIL_TOL / (n + 1)

    def displaced_overlap(self, s: np.ndarray) -> float:
        """Integral of [A(phi) + A(phi+s)] P_e(phi, phi+s) over the support box."""
        s = np.asarray(s, dtype=float)
        if self._inv_gamma is not None:
            # Bhattacharyya overlap of the prior with its shifted copy bounds the
            # whole integrand: integral <= exp(-s^T Gamma^-1 s / 8).
            expo = 0.125 * (s @ self._inv_gamma @ s)
            if math.exp(-min(expo, 700.0)) < OVERLAP_FLOOR:
                return 0.0
        else:
            if np.any(np.abs(s) >= self.prior.delta):
                return 0.0
        a1 = np.asarray(density(self.prior, self.pts + s))
        keep = np.sqrt(self.a0 * a1) > GRID_KEEP_REL * self._peak
        if not np.any(keep):
            return 0.0
        idx = np.flatnonzero(keep)
        a0 = self.a0[idx]
        a1 = a1[idx]
        pi0 = a0 / (a0 + a1)
        p1 = likelihood_many(self.spec, self.pts[idx] + s)
        pe = _pe_batch(None, p1, pi0, self.n, squared=self.squared,
                       row_tol=self._row_tol, tables0=self._tables0,
                       binom0=self._binom0, idx=idx)
        return float(np.sum(self.wts[idx] * (a0 + a1) * pe))

    def _max_over_constraint(self, u: np.ndarray, tau: float) -> float:
        """max over v with u.v = 1 of the displaced overlap at shift v*tau.

        The constraint line is v(t) = u + t*u_perp; a 17-point coarse scan
        brackets the maximizer, then golden-section refines it.
        """
        uperp = np.array([-u[1], u[0]])
        cfg = self.settings

        def f(t: float) -> float:
            return self.displaced_overlap((u + t * uperp) * tau)

        ts = np.linspace(-cfg.t_range, cfg.t_range, 17)
        vals = [f(t) for t in ts]
        i_best = int(np.argmax(vals))
        best = vals[i_best]
        if best <= 0.0:
            return 0.0
        lo = ts[max(i_best - 1, 0)]
        hi = ts[min(i_best + 1, len(ts) - 1)]
        return _golden_max(f, lo, hi, cfg.t_tolerance, best)

    def z_of(self, u: np.ndarray, threads: int = 1) -> float:
        u = np.asarray(u, dtype=float).reshape(2)
        if abs(u @ u - 1.0) > 1e-10:
            raise ValueError("direction u must be a unit vector")
        m = self.settings.tau_points
        dtau = np.pi / m
        taus = (np.arange(m) + 0.5) * dtau
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                vals = list(pool.map(lambda tau: self._max_over_constraint(u, tau), taus))
        else:
            vals = [self._max_over_constraint(u, tau) for tau in taus]
        # Reduce in tau order so results do not depend on the worker count.
        total = 0.0
        for tau, val in zip(taus, vals):
            total += tau * val
        return 0.5 * total * dtau


def _golden_max(f, lo: float, hi: float, tol: float, best: float) -> float:
    """Golden-section maximization on [lo, hi], tracking the best value seen."""
    h = hi - lo
    if h <= tol:
        return best
    steps = int(math.ceil(math.log(tol / h) / math.log(_INVPHI)))
    c = lo + _INVPHI2 * h
    d = lo + _INVPHI * h
    yc = f(c)
    yd = f(d)
    best = max(best, yc, yd)
    for _ in range(steps - 1):
        if yc > yd:
            hi = d
            d, yd = c, yc
            h *= _INVPHI
            c = lo + _INVPHI2 * h
            yc = f(c)
            best = max(best, yc)
        else:
            lo = c
            c, yc = d, yd
            h *= _INVPHI
            d = lo + _INVPHI * h
            yd = f(d)
            best = max(best, yd)
    return best


def zz_directional(spec: InterferometerSpec, prior: Prior, n: int, u: np.ndarray,
                   settings: ZZSettings = ZZSettings(), threads: int = 1) -> float:
    """Directional Ziv-Zakai bound Z(u) on u^T Sigma u."""
    return _ZZEvaluator(spec, prior, n, settings).z_of(u, threads=threads)


def default_zz_directions(spec: InterferometerSpec, prior: Prior, n: int,
                          settings: ZZSettings = ZZSettings()) -> tuple[np.ndarray, np.ndarray]:
    """Direction pair used when none is supplied.

    The tightest total-variance bound comes from the eigenvectors of the
    posterior covariance, which is not available before data; the best
    data-free proxy is H^-1 for Gaussian priors and the prior covariance
    for rectangular ones.
    """
    if isinstance(prior, GaussianPrior):
        h = van_trees_matrix(spec, prior, n, settings.quad_grid, settings.support_radius)
        return direction_pair_from(_inv_2x2(h.h, "Van Trees matrix"))
    return direction_pair_from(covariance(prior))


def zz_total_variance(spec: InterferometerSpec, prior: Prior, n: int,
                      settings: ZZSettings = ZZSettings(),
                      directions: tuple[np.ndarray, np.ndarray] | None = None,
                      threads: int = 1) -> BoundRecord:
    """Total-variance Ziv-Zakai bound Z(u1) + Z(u2) over an orthonormal pair."""
    if directions is None:
        u1, u2 = default_zz_directions(spec, prior, n, settings)
    else:
        u1 = np.asarray(directions[0], dtype=float).reshape(2)
        u2 = np.asarray(directions[1], dtype=float).reshape(2)
    evaluator = _ZZEvaluator(spec, prior, n, settings)
    v_zz = evaluator.z_of(u1, threads=threads) + evaluator.z_of(u2, threads=threads)
    return BoundRecord(n=n, v_crb=None, v_vt=None, v_zz=v_zz, u1=u1, u2=u2)


def bound_records(spec: InterferometerSpec, prior: Prior, n_schedule,
                  settings: ZZSettings = ZZSettings(), *,
                  crb: bool = True, vt: bool = True, zz: bool = True,
                  threads: int = 1) -> list[BoundRecord]:
    """Evaluate the requested bounds at every probe count in ``n_schedule``.

    The Cramer-Rao value uses the Fisher matrix at the prior mean.  Asking
    for the Van Trees bound with a rectangular prior raises
    NonDerivablePriorError.
    """
    if vt and isinstance(prior, RectPrior):
        raise NonDerivablePriorError(
            "the Van Trees bound needs a differentiable prior; disable it for rectangular priors"
        )
    f_mean = fisher_many(spec, prior.mu)
    records = []
    for n in n_schedule:
        v_crb = crb_total_variance(f_mean, n) if crb else None
        v_vt = None
        if vt:
            v_vt = van_trees_total_variance(
                van_trees_matrix(spec, prior, n, settings.quad_grid, settings.support_radius),
                n,
            )
        if zz:
            rec = zz_total_variance(spec, prior, n, settings, threads=threads)
            v_zz, u1, u2 = rec.v_zz, rec.u1, rec.u2
        else:
            v_zz = None
            u1, u2 = default_zz_directions(spec, prior, n, settings)
        records.append(BoundRecord(n=n, v_crb=v_crb, v_vt=v_vt, v_zz=v_zz, u1=u1, u2=u2))
    return records
