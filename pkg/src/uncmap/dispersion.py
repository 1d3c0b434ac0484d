"""Dispersion probabilities of Gaussian measurements over hyperrectangles.

The dispersion probability (DP) of a belief is the mass it places on an
axis-aligned rectangle centered at its mean; it is inversely related to
the spread of the belief and lower-bounded by a product form of the
Gauss inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, ndtri
from scipy.stats import qmc

from . import _kernels
from .errors import (BoundDomainViolation, DegenerateBelief,
                     InvalidCovariance)

_TWO_SQRT3 = 2.0 * math.sqrt(3.0)

QMC_DEFAULT_SAMPLES = 1 << 16
QMC_BATCHES = 16


def _check_covariance(cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise InvalidCovariance("covariance must be square")
    if not np.allclose(cov, cov.T, atol=1e-9, rtol=0.0):
        raise InvalidCovariance("covariance not symmetric within 1e-9")
    if np.linalg.eigvalsh(cov).min() <= 0.0:
        raise InvalidCovariance("covariance not positive-definite")
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = _check_covariance(self.covariance)
        if cov.shape[0] != mean.shape[0]:
            raise InvalidCovariance("mean/covariance dimension mismatch")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class RectangleSpec:
    """Axis-aligned hyperrectangle given by its side lengths."""

    sides: np.ndarray

    def __post_init__(self):
        sides = np.atleast_1d(np.asarray(self.sides, dtype=np.float64))
        if np.any(sides <= 0.0):
            raise ValueError("all rectangle sides must be positive")
        object.__setattr__(self, "sides", sides)

    @property
    def dim(self) -> int:
        return self.sides.shape[0]


@dataclass(frozen=True)
class PolarMeasurement:
    range: float
    bearing: float

    def __post_init__(self):
        if self.range < 0.0:
            raise ValueError("range must be non-negative")


def geometric_mean_sigma(b: GaussianBelief) -> float:
    """|Sigma|^(1/2N) via a stable log-determinant."""
    sign, logdet = np.linalg.slogdet(b.covariance)
    if sign <= 0:
        raise InvalidCovariance("non-positive determinant")
    return float(math.exp(logdet / (2.0 * b.dim)))


def _is_diagonal(cov: np.ndarray) -> bool:
    off = cov - np.diag(np.diag(cov))
    scale = np.sqrt(np.outer(np.diag(cov), np.diag(cov)))
    return bool(np.all(np.abs(off) <= 1e-12 * scale))


def _diagonal_rect_prob(sigmas, half_sides) -> float:
    z = np.asarray(half_sides) / (np.asarray(sigmas) * math.sqrt(2.0))
    return float(np.prod(erf(z)))


def _qmc_rect_prob(cov, half_sides, samples, seed):
    """Randomized-QMC estimate of the centered rectangle probability.

    Runs QMC_BATCHES independently scrambled Sobol streams; the spread
    of the batch means gives the reported standard error. Deterministic
    for a fixed seed.
    """
    n = cov.shape[0]
    chol = np.linalg.cholesky(cov)
    per_batch = max(samples // QMC_BATCHES, 64)
    means = np.empty(QMC_BATCHES)
    for i in range(QMC_BATCHES):
        sob = qmc.Sobol(d=n, scramble=True, seed=seed * QMC_BATCHES + i)
        u = sob.random(per_batch)
        u = np.clip(u, 1e-12, 1.0 - 1e-12)
        x = ndtri(u) @ chol.T
        inside = np.all(np.abs(x) < half_sides[None, :], axis=1)
        means[i] = inside.mean()
    p = float(means.mean())
    stderr = float(means.std(ddof=1) / math.sqrt(QMC_BATCHES))
    return p, stderr


def rectangle_probability_with_error(
        b: GaussianBelief, r: RectangleSpec, *,
        method: str = "auto",
        samples: int = QMC_DEFAULT_SAMPLES,
        seed: int = 0) -> tuple[float, float]:
    """P(|X_i - mu_i| < s_i/2 for all i) and its standard error.

    Diagonal covariances use the exact 1D CDF product and 2D problems
    the exact bivariate CDF expansion (both stderr 0). Higher-dimensional
    correlated covariances fall back to seeded quasi-Monte Carlo.
    """
    if b.dim != r.dim:
        raise ValueError("belief and rectangle dimension mismatch")
    if method not in ("auto", "exact", "qmc"):
        raise ValueError(f"unknown method {method!r}")
    if samples <= 0:
        raise ValueError("sample budget must be positive")
    cov = b.covariance
    half = r.sides / 2.0
    if method != "qmc":
        if _is_diagonal(cov):
            return _diagonal_rect_prob(np.sqrt(np.diag(cov)), half), 0.0
        if b.dim == 2:
            sx = math.sqrt(cov[0, 0])
            sy = math.sqrt(cov[1, 1])
            rho = min(max(cov[0, 1] / (sx * sy), -0.999999), 0.999999)
            return _kernels.rect_prob_2d(sx, sy, rho, half[0], half[1]), 0.0
        if method == "exact":
            raise ValueError("exact method only for diagonal or 2D beliefs")
    return _qmc_rect_prob(cov, half, samples, seed)


def rectangle_probability(b: GaussianBelief, r: RectangleSpec, *,
                          method: str = "auto",
                          samples: int = QMC_DEFAULT_SAMPLES,
                          seed: int = 0) -> float:
    p, _ = rectangle_probability_with_error(
        b, r, method=method, samples=samples, seed=seed)
    return p


def bound_constant(r: RectangleSpec) -> float:
    """a = (prod s_i)^(1/N) / (2*sqrt(3))."""
    return float(np.exp(np.log(r.sides).mean()) / _TWO_SQRT3)


def gauss_bound(b: GaussianBelief, r: RectangleSpec) -> float:
    """Lower bound prod s_i / (2*sqrt(3)*sigma_i) = (a / sigma~)^N.

    sigma_i are the principal standard deviations. Domain violations
    (s_i > 4*sigma_i/sqrt(3)) raise instead of clamping; for rotated
    covariances sides and principal sigmas are compared in sorted order.
    """
    if b.dim != r.dim:
        raise ValueError("belief and rectangle dimension mismatch")
    cov = b.covariance
    if _is_diagonal(cov):
        sigmas = np.sqrt(np.diag(cov))
        sides = r.sides
    else:
        sigmas = np.sort(np.sqrt(np.linalg.eigvalsh(cov)))
        sides = np.sort(r.sides)
    bad = np.nonzero(sides > 4.0 * sigmas / math.sqrt(3.0))[0]
    if bad.size:
        raise BoundDomainViolation(bad.tolist())
    return float(np.prod(sides / (_TWO_SQRT3 * sigmas)))


def polar_jacobians(rho: float, gamma: float):
    """Jacobians of the polar-to-world map at world angle gamma = theta+phi.

    Returns (J_pose (2x3), J_meas (2x2)) for the map
    (x, y) = (x_a + rho*cos(gamma), y_a + rho*sin(gamma)).
    """
    cg = math.cos(gamma)
    sg = math.sin(gamma)
    j_pose = np.array([[1.0, 0.0, -rho * sg],
                       [0.0, 1.0, rho * cg]])
    j_meas = np.array([[cg, -rho * sg],
                       [sg, rho * cg]])
    return j_pose, j_meas


def propagate_polar(pose: GaussianBelief, m: PolarMeasurement,
                    sensor_noise) -> GaussianBelief:
    """First-order pushforward of a polar measurement through the pose.

    pose is a belief over (x_a, y_a, phi_a); sensor_noise is the 2x2
    covariance of (rho, theta). Returns the world-frame point belief.
    """
    if pose.dim != 3:
        raise ValueError("pose belief must be 3-dimensional")
    noise = np.asarray(sensor_noise, dtype=np.float64)
    if noise.shape != (2, 2):
        raise ValueError("sensor noise must be 2x2")
    xa, ya, phi = pose.mean
    gamma = m.bearing + phi
    mean = np.array([xa + m.range * math.cos(gamma),
                     ya + m.range * math.sin(gamma)])
    j_pose, j_meas = polar_jacobians(m.range, gamma)
    cov = j_pose @ pose.covariance @ j_pose.T + j_meas @ noise @ j_meas.T
    cov = 0.5 * (cov + cov.T)
    if np.linalg.eigvalsh(cov).min() <= 1e-300:
        raise DegenerateBelief("propagated covariance is singular")
    return GaussianBelief(mean, cov)
