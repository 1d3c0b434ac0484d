"""World-anchored 2D grid containers, stencils, and serialization.

Layers are dense row-major float64 arrays tied to a GridGeometry. The
same container carries log-odds, dispersion probabilities, uncertainty
values, or occupancy, tagged by `semantic`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateGrid, MalformedFile, OutOfBounds

SEMANTICS = ("log_odds", "dispersion_probability", "uncertainty", "occupancy")


@dataclass(frozen=True)
class GridGeometry:
    """Fixed-resolution grid anchored in world coordinates.

    `origin` is the world position of the lower-left corner of cell
    (0, 0); `resolution_c` is the cell side in meters.
    """

    resolution_c: float
    origin: tuple[float, float]
    width: int
    height: int

    def __post_init__(self):
        if self.resolution_c <= 0:
            raise ValueError("resolution_c must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid must have positive cell counts")
        object.__setattr__(self, "origin",
                           (float(self.origin[0]), float(self.origin[1])))

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) world bounds."""
        ox, oy = self.origin
        return (ox, oy,
                ox + self.width * self.resolution_c,
                oy + self.height * self.resolution_c)

    def contains(self, p) -> bool:
        xmin, ymin, xmax, ymax = self.extent
        return xmin <= p[0] < xmax and ymin <= p[1] < ymax


@dataclass(frozen=True)
class CellIndex:
    col: int
    row: int


@dataclass
class GridLayer:
    """One scalar field over a GridGeometry, stored row-major."""

    geometry: GridGeometry
    values: np.ndarray
    semantic: str = "log_odds"

    def __post_init__(self):
        if self.semantic not in SEMANTICS:
            raise ValueError(f"unknown semantic {self.semantic!r}")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.size != self.geometry.n_cells:
            raise ValueError("values length must equal width*height")
        self.values = self.values.reshape(self.geometry.height,
                                          self.geometry.width)

    @classmethod
    def filled(cls, geometry: GridGeometry, value: float,
               semantic: str = "log_odds") -> "GridLayer":
        return cls(geometry, np.full(geometry.n_cells, value), semantic)

    def copy(self) -> "GridLayer":
        return GridLayer(self.geometry, self.values.copy(), self.semantic)

    def __getitem__(self, cell: CellIndex) -> float:
        return float(self.values[cell.row, cell.col])

    def __setitem__(self, cell: CellIndex, v: float):
        self.values[cell.row, cell.col] = v


def world_to_cell(g: GridGeometry, p) -> CellIndex:
    """Cell whose region contains world point p.

    Points exactly on a shared edge belong to the +x/+y neighbor
    (floor convention).
    """
    if not g.contains(p):
        raise OutOfBounds(p)
    col = int(np.floor((p[0] - g.origin[0]) / g.resolution_c))
    row = int(np.floor((p[1] - g.origin[1]) / g.resolution_c))
    return CellIndex(col=col, row=row)


def cell_to_world(g: GridGeometry, cell: CellIndex) -> tuple[float, float]:
    """World coordinates of the cell center."""
    return (g.origin[0] + (cell.col + 0.5) * g.resolution_c,
            g.origin[1] + (cell.row + 0.5) * g.resolution_c)


def central_gradient(layer: GridLayer) -> np.ndarray:
    """Per-cell (d/dx, d/dy) of the layer, shape (H, W, 2).

    Interior cells use central differences over 2c; borders fall back
    to one-sided differences over c.
    """
    g = layer.geometry
    if g.width < 3 or g.height < 3:
        raise DegenerateGrid("central_gradient needs at least a 3x3 grid")
    v = layer.values
    c = g.resolution_c
    gx = np.empty_like(v)
    gy = np.empty_like(v)
    gx[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2.0 * c)
    gx[:, 0] = (v[:, 1] - v[:, 0]) / c
    gx[:, -1] = (v[:, -1] - v[:, -2]) / c
    gy[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2.0 * c)
    gy[0, :] = (v[1, :] - v[0, :]) / c
    gy[-1, :] = (v[-1, :] - v[-2, :]) / c
    return np.stack([gx, gy], axis=-1)


def save_layer(layer: GridLayer, path) -> None:
    """Write `<path>.f64` (little-endian float64 blob) + `<path>.json`."""
    path = Path(path)
    blob = layer.values.astype("<f8").tobytes()
    sidecar = {
        "resolution_c": layer.geometry.resolution_c,
        "origin": list(layer.geometry.origin),
        "width": layer.geometry.width,
        "height": layer.geometry.height,
        "semantic": layer.semantic,
        "sha256_of_blob": hashlib.sha256(blob).hexdigest(),
    }
    path.with_suffix(".f64").write_bytes(blob)
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=1))


def load_layer(path) -> GridLayer:
    path = Path(path)
    try:
        meta = json.loads(path.with_suffix(".json").read_text())
        blob = path.with_suffix(".f64").read_bytes()
    except OSError as exc:
        raise MalformedFile(f"cannot read layer files at {path}: {exc}")
    for key in ("resolution_c", "origin", "width", "height",
                "semantic", "sha256_of_blob"):
        if key not in meta:
            raise MalformedFile(f"sidecar missing field {key!r}")
    if hashlib.sha256(blob).hexdigest() != meta["sha256_of_blob"]:
        raise MalformedFile("blob checksum mismatch")
    values = np.frombuffer(blob, dtype="<f8")
    if values.size != meta["width"] * meta["height"]:
        raise MalformedFile("value count does not match width*height")
    geom = GridGeometry(resolution_c=meta["resolution_c"],
                        origin=tuple(meta["origin"]),
                        width=int(meta["width"]),
                        height=int(meta["height"]))
    return GridLayer(geom, values.copy(), meta["semantic"])


def export_pgm(layer: GridLayer, path) -> None:
    """Lossy 8-bit P5 export for visualization (min-max scaled)."""
    v = layer.values
    lo, hi = float(v.min()), float(v.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    img = ((v - lo) * scale).astype(np.uint8)[::-1, :]  # row 0 at bottom
    header = f"P5\n{layer.geometry.width} {layer.geometry.height}\n255\n"
    Path(path).write_bytes(header.encode("ascii") + img.tobytes())
