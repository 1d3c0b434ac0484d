"""Uncertainty Map construction, frontier extraction, and SiREn.

The Uncertainty Map stores, per cell, a lower bound on the geometric
mean of the standard deviations of whatever measurement produced the
cell; frontiers are discontinuities of that field, and SiREn is a
cell-area-weighted signed relative entropy against a maximum-tolerable
reference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _kernels
from .belief import PriorConstants, logodds_to_prob
from .errors import DegenerateGrid, DomainError, GeometryMismatch
from .grid import CellIndex, GridLayer

_ADJ8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class FrontierParams:
    """Thresholds for uncertainty-frontier extraction.

    t_h is compared, per cell, against the uncertainty jump across one
    cell pitch (gradient magnitude times resolution); set raw_gradient
    to threshold the gradient itself instead.
    """

    t_h: float
    u_beta: float
    obstacle_clearance: float = 0.5
    dim: int = 2
    raw_gradient: bool = False

    def __post_init__(self):
        if self.t_h <= 0.0:
            raise ValueError("t_h must be positive")
        if self.obstacle_clearance < 0.0:
            raise ValueError("obstacle_clearance must be non-negative")


@dataclass
class FrontierCluster:
    kind: str  # "UF" or "CF"
    cells: list
    centroid: tuple[float, float]
    mean_jump: float = 0.0

    @property
    def size(self) -> int:
        return len(self.cells)


@dataclass
class FrontierSet:
    uf_cells: list = field(default_factory=list)  # (CellIndex, jump)
    cf_cells: list = field(default_factory=list)  # CellIndex
    uf_clusters: list = field(default_factory=list)
    cf_clusters: list = field(default_factory=list)

    def clusters(self, kind: str) -> list:
        return self.uf_clusters if kind == "UF" else self.cf_clusters

    def to_json(self) -> str:
        def cl(c):
            return {"kind": c.kind, "size": c.size,
                    "centroid": list(c.centroid),
                    "mean_jump": c.mean_jump,
                    "cells": [[k.col, k.row] for k in c.cells]}
        return json.dumps({
            "uf_clusters": [cl(c) for c in self.uf_clusters],
            "cf_clusters": [cl(c) for c in self.cf_clusters],
        }, indent=1)


def build_uncertainty_map(dp_grid: GridLayer,
                          prior: PriorConstants) -> GridLayer:
    """U_k = a / p_k^(1/N); unknown cells come out at exactly u_beta."""
    ell = dp_grid.values
    p = logodds_to_prob(ell)
    u = prior.a / np.power(p, 1.0 / prior.dim)
    u[ell == prior.ell_beta] = prior.u_beta
    return GridLayer(dp_grid.geometry, u, "uncertainty")


def _obstacle_clear_mask(occupancy: GridLayer, clearance: float):
    occ = occupancy.values > 0.5
    if clearance <= 0.0 or not occ.any():
        return ~occ
    dist = ndimage.distance_transform_edt(
        ~occ, sampling=occupancy.geometry.resolution_c)
    return dist > clearance


def _make_clusters(mask, jumps, geometry, kind):
    labels, n = ndimage.label(mask, structure=_ADJ8)
    clusters = []
    slices = ndimage.find_objects(labels)
    for lab in range(1, n + 1):
        win = slices[lab - 1]
        rows, cols = np.nonzero(labels[win] == lab)
        rows = rows + win[0].start
        cols = cols + win[1].start
        cells = [CellIndex(col=int(c), row=int(r))
                 for c, r in zip(cols, rows)]
        cx = geometry.origin[0] + (cols.mean() + 0.5) * geometry.resolution_c
        cy = geometry.origin[1] + (rows.mean() + 0.5) * geometry.resolution_c
        mean_jump = float(jumps[rows, cols].mean()) if jumps is not None \
            else 0.0
        clusters.append(FrontierCluster(kind=kind, cells=cells,
                                        centroid=(cx, cy),
                                        mean_jump=mean_jump))
    return clusters


def extract_uncertainty_frontiers(um: GridLayer, occupancy: GridLayer,
                                  params: FrontierParams) -> FrontierSet:
    """Cells whose uncertainty jump exceeds t_h, away from obstacles.

    Cells at or above u_beta are discarded (they carry no usable
    information) as are cells within obstacle_clearance of an occupied
    cell (occlusion artifacts).
    """
    if um.geometry != occupancy.geometry:
        raise GeometryMismatch("um and occupancy must share geometry")
    g = um.geometry
    if g.width < 3 or g.height < 3:
        raise DegenerateGrid("frontier extraction needs at least a 3x3 grid")
    clear = _obstacle_clear_mask(occupancy, params.obstacle_clearance)
    scale = 1.0 if params.raw_gradient else g.resolution_c
    mask, jumps = _kernels.frontier_jump_mask(
        um.values, clear, params.t_h, params.u_beta, g.resolution_c, scale)
    fs = FrontierSet()
    fs.uf_clusters = _make_clusters(mask, jumps, um.geometry, "UF")
    rows, cols = np.nonzero(mask)
    fs.uf_cells = [(CellIndex(col=int(c), row=int(r)),
                    float(jumps[r, c])) for c, r in zip(cols, rows)]
    return fs


def extract_classical_frontiers(occupancy: GridLayer, explored: np.ndarray,
                                params: FrontierParams) -> FrontierSet:
    """Free explored cells 8-adjacent to unexplored space (Yamauchi)."""
    if explored.shape != occupancy.values.shape:
        raise GeometryMismatch("explored mask must match occupancy shape")
    occ = occupancy.values > 0.5
    unexplored = ~explored
    has_unknown_neighbor = ndimage.binary_dilation(unexplored,
                                                   structure=_ADJ8)
    mask = explored & ~occ & has_unknown_neighbor
    mask &= _obstacle_clear_mask(occupancy, params.obstacle_clearance)
    fs = FrontierSet()
    fs.cf_clusters = _make_clusters(mask, None, occupancy.geometry, "CF")
    rows, cols = np.nonzero(mask)
    fs.cf_cells = [CellIndex(col=int(c), row=int(r))
                   for c, r in zip(cols, rows)]
    return fs


def extract_frontiers(um: GridLayer, occupancy: GridLayer,
                      explored: np.ndarray,
                      params: FrontierParams) -> FrontierSet:
    """Both frontier families over one map snapshot."""
    uf = extract_uncertainty_frontiers(um, occupancy, params)
    cf = extract_classical_frontiers(occupancy, explored, params)
    uf.cf_cells = cf.cf_cells
    uf.cf_clusters = cf.cf_clusters
    return uf


@dataclass(frozen=True)
class SirenParams:
    beta: float
    sigma_max: float
    dim: int = 2
    mode: str = "dp_approximation"

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0,1)")
        if self.sigma_max <= 0.0:
            raise ValueError("sigma_max must be positive")
        if self.mode not in ("dp_approximation", "closed_form_sigma"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def from_prior(cls, prior: PriorConstants,
                   mode: str = "dp_approximation") -> "SirenParams":
        return cls(beta=prior.beta, sigma_max=prior.sigma_tilde_max,
                   dim=prior.dim, mode=mode)


@dataclass
class SirenReport:
    total: float
    positive: float
    negative: float
    n_explored: int
    mode: str

    def to_json(self) -> str:
        return json.dumps({"total": self.total, "positive": self.positive,
                           "negative": self.negative,
                           "n_explored": self.n_explored,
                           "mode": self.mode}, indent=1)


def kl_term_sigma(sigma_tilde, sigma_max, n):
    """Gaussian KL against the isotropic sigma_max reference."""
    sigma_tilde = np.asarray(sigma_tilde, dtype=np.float64)
    if np.any(sigma_tilde <= 0.0) or sigma_max <= 0.0:
        raise DomainError("sigmas must be positive")
    ratio = sigma_tilde / sigma_max
    out = -n * np.log(ratio) - n / 2.0 + (n / 2.0) * ratio ** 2
    return float(out) if out.ndim == 0 else out


def kl_term_dp(p_k, beta, n):
    """Dispersion-probability lower bound of the KL term; 0 at p_k = beta."""
    p_k = np.asarray(p_k, dtype=np.float64)
    if np.any(p_k <= 0.0) or np.any(p_k >= 1.0) or not 0.0 < beta < 1.0:
        raise DomainError("probabilities must lie in (0,1)")
    out = np.log(p_k / beta) - n / 2.0 \
        + (n / 2.0) * np.power(beta / p_k, 2.0 / n)
    return float(out) if out.ndim == 0 else out


def siren(dp_grid: GridLayer, prior: PriorConstants,
          params: SirenParams | None = None) -> SirenReport:
    """Cell-area-weighted signed KL over the explored cells.

    Unknown cells (log-odds exactly ell_beta) are excluded and
    contribute zero; the sign is that of p_k - beta, which matches the
    determinant ordering of the underlying covariances.
    """
    if params is None:
        params = SirenParams.from_prior(prior)
    ell = dp_grid.values.reshape(-1)
    c_k = dp_grid.geometry.resolution_c ** 2
    if params.mode == "dp_approximation":
        total, pos, neg, count = _kernels.siren_accumulate(
            ell, prior.ell_beta, params.beta, params.dim, c_k)
        return SirenReport(total=total, positive=pos, negative=neg,
                           n_explored=count, mode=params.mode)
    known = ell != prior.ell_beta
    if not known.any():
        return SirenReport(0.0, 0.0, 0.0, 0, params.mode)
    p = logodds_to_prob(ell[known])
    sig = prior.a / np.power(p, 1.0 / params.dim)
    kl = kl_term_sigma(sig, params.sigma_max, params.dim)
    signed = c_k * kl * np.sign(p - params.beta)
    pos = float(signed[signed > 0].sum())
    neg = float(signed[signed < 0].sum())
    return SirenReport(total=float(signed.sum()), positive=pos,
                       negative=neg, n_explored=int(known.sum()),
                       mode=params.mode)


def siren_curve(sigmas, sigma_max: float = 1.0) -> np.ndarray:
    """1D signed KL term as sigma sweeps past sigma_max; rows (sigma, term)."""
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if np.any(sigmas <= 0.0):
        raise DomainError("sigmas must be positive")
    term = kl_term_sigma(sigmas, sigma_max, 1) \
        * np.sign(sigma_max - sigmas)
    return np.column_stack([sigmas, term])
