"""Log-odds bookkeeping and the saturation-free, gated cell update.

Cells store the log-odds of their dispersion probability. Updates blend
toward the newest observation instead of accumulating, so values never
saturate; the beta gate keeps well-explored cells from being degraded
by later, worse data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dispersion import (GaussianBelief, RectangleSpec, bound_constant,
                         geometric_mean_sigma, rectangle_probability)
from .errors import DomainError, OutOfBounds
from .grid import CellIndex, GridLayer, world_to_cell

# log-odds floor applied to incoming observations; p ~ 9e-27, far below
# any usable beta, keeps arithmetic finite
ELL_FLOOR = -60.0


def prob_to_logodds(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability {p} outside (0,1)")
    return math.log(p / (1.0 - p))


def logodds_to_prob(ell) -> float:
    ell = np.asarray(ell, dtype=np.float64)
    if not np.all(np.isfinite(ell)):
        raise DomainError("log-odds must be finite")
    out = 1.0 - 1.0 / (1.0 + np.exp(ell))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PriorSpec:
    """Design inputs: tolerable per-axis sigmas, rectangle sides, blend rate."""

    sigma_max_per_axis: np.ndarray
    sides: RectangleSpec
    kappa: float = 0.5

    def __post_init__(self):
        sig = np.atleast_1d(np.asarray(self.sigma_max_per_axis,
                                       dtype=np.float64))
        object.__setattr__(self, "sigma_max_per_axis", sig)
        if np.any(sig <= 0.0):
            raise ValueError("sigma_max values must be positive")
        if sig.shape[0] != self.sides.dim:
            raise ValueError("sigma_max and sides dimension mismatch")
        if np.any(self.sides.sides > 4.0 * sig / math.sqrt(3.0)):
            raise ValueError("sides violate the bound domain "
                             "s_i <= 4*sigma_max_i/sqrt(3)")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0,1]")


@dataclass(frozen=True)
class PriorConstants:
    """Derived constants of the unknown-cell prior."""

    beta: float
    ell_beta: float
    a: float
    u_beta: float
    sigma_tilde_max: float
    dim: int
    sides: tuple = ()

    def as_dict(self) -> dict:
        return {"beta": self.beta, "ell_beta": self.ell_beta, "a": self.a,
                "u_beta": self.u_beta,
                "sigma_tilde_max": self.sigma_tilde_max, "dim": self.dim,
                "sides": list(self.sides)}


def derive_prior(spec: PriorSpec) -> PriorConstants:
    """Constants of an unknown cell at the maximum tolerable uncertainty."""
    belief = GaussianBelief(np.zeros(spec.sides.dim),
                            np.diag(spec.sigma_max_per_axis ** 2))
    beta = rectangle_probability(belief, spec.sides)
    a = bound_constant(spec.sides)
    n = spec.sides.dim
    return PriorConstants(beta=beta,
                          ell_beta=prob_to_logodds(beta),
                          a=a,
                          u_beta=a / beta ** (1.0 / n),
                          sigma_tilde_max=geometric_mean_sigma(belief),
                          dim=n,
                          sides=tuple(float(s) for s in spec.sides.sides))


def blend_update(ell_prev: float, ell_new: float, kappa: float) -> float:
    """Convex step toward the new observation; fixed point at ell_new."""
    if not (np.isfinite(ell_prev) and np.isfinite(ell_new)):
        raise DomainError("log-odds inputs must be finite")
    if not 0.0 <= kappa <= 1.0:
        raise DomainError("kappa must lie in [0,1]")
    return ell_prev + kappa * (ell_new - ell_prev)


def gated_update(ell_prev: float, ell_new: float, kappa: float,
                 ell_beta: float) -> float:
    """Blend unless the cell is already better than both beta and the data."""
    if ell_prev > max(ell_beta, ell_new):
        return ell_prev
    return blend_update(ell_prev, ell_new, kappa)


def apply_fov(dp_grid: GridLayer, occupancy: GridLayer,
              pose_belief: GaussianBelief, scan, sensor_noise,
              prior: PriorConstants, kappa: float = 0.5) -> list[CellIndex]:
    """Apply one scan to the log-odds grid via the gated rule.

    Every cell on each beam (up to the hit or max range) receives the
    log-odds of the dispersion probability of the propagated measurement
    evaluated at that cell's own range/bearing; the hit cell is marked
    in the companion occupancy layer. Returns the touched cells.
    """
    if dp_grid.semantic != "log_odds":
        raise ValueError("dp_grid must be a log_odds layer")
    if occupancy.geometry != dp_grid.geometry:
        raise ValueError("occupancy layer must share the grid geometry")
    g = dp_grid.geometry
    if not g.contains(pose_belief.mean[:2]):
        raise OutOfBounds(pose_belief.mean[:2])
    if len(scan.ranges) == 0:
        return []
    noise = np.asarray(sensor_noise, dtype=np.float64)
    if len(prior.sides) >= 2:
        half_x, half_y = prior.sides[0] / 2.0, prior.sides[1] / 2.0
    else:
        half_x, half_y = _prior_half_sides(prior)

    n = g.n_cells
    stamp = np.full(n, -1, dtype=np.int64)
    best = np.zeros(n, dtype=np.float64)
    cols = np.empty(n, dtype=np.int64)
    rows = np.empty(n, dtype=np.int64)
    lo = dp_grid.values.reshape(-1)
    occ = occupancy.values.reshape(-1)
    ntouched = _kernels._apply_fov(
        lo, occ, stamp, 0, best, cols, rows,
        float(pose_belief.mean[0]), float(pose_belief.mean[1]),
        float(pose_belief.mean[2]), pose_belief.covariance,
        np.asarray(scan.ranges, dtype=np.float64),
        np.asarray(scan.bearings, dtype=np.float64),
        np.asarray(scan.hits, dtype=np.bool_),
        float(noise[0, 0]), float(noise[0, 1]), float(noise[1, 1]),
        g.origin[0], g.origin[1], g.resolution_c, g.width, g.height,
        half_x, half_y, float(kappa), prior.ell_beta, ELL_FLOOR)
    return [CellIndex(col=int(cols[i]), row=int(rows[i]))
            for i in range(ntouched)]


def _prior_half_sides(prior: PriorConstants) -> tuple[float, float]:
    """Half-sides of the planar DP rectangle implied by the bound constant.

    The map update works in the 2D measurement space; its rectangle is
    taken square with side 2*sqrt(3)*a (the geometric mean of the
    configured sides), exact when s_1 = s_2.
    """
    side = 2.0 * math.sqrt(3.0) * prior.a
    return side / 2.0, side / 2.0
