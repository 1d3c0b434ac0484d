"""Deterministic 2D world simulator and linear KF-SLAM.

The robot is a holonomic point with known heading; position and 2D
landmark positions live in one linear Kalman filter. Sensing is a
360-degree LiDAR ray cast against wall segments, plus relative-position
landmark observations gated by range and wall occlusion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .dispersion import GaussianBelief
from .errors import DegenerateBelief

DEFAULT_HEADING_VAR = 1e-4


@dataclass
class WorldModel:
    walls: np.ndarray  # (M,4) segments [x1,y1,x2,y2]
    landmarks: dict  # id -> (x, y)
    extent: tuple  # (xmin, ymin, xmax, ymax)

    def __post_init__(self):
        self.walls = np.asarray(self.walls, dtype=np.float64).reshape(-1, 4)
        if not np.all(np.isfinite(self.walls)):
            raise ValueError("wall segment endpoints must be finite")
        self.landmarks = {str(k): (float(v[0]), float(v[1]))
                          for k, v in self.landmarks.items()}
        xmin, ymin, xmax, ymax = self.extent
        for lid, (x, y) in self.landmarks.items():
            if not (xmin <= x <= xmax and ymin <= y <= ymax):
                raise ValueError(f"landmark {lid} outside extent")

    @classmethod
    def from_json(cls, path) -> "WorldModel":
        data = json.loads(Path(path).read_text())
        return cls(walls=np.array(data["walls"], dtype=np.float64),
                   landmarks={lm["id"]: (lm["x"], lm["y"])
                              for lm in data["landmarks"]},
                   extent=tuple(data["extent"]))

    def to_json(self, path) -> None:
        data = {"walls": self.walls.tolist(),
                "landmarks": [{"id": k, "x": x, "y": y}
                              for k, (x, y) in self.landmarks.items()],
                "extent": list(self.extent)}
        Path(path).write_text(json.dumps(data, indent=1))

    def without_landmark(self, lid: str) -> "WorldModel":
        lms = {k: v for k, v in self.landmarks.items() if k != str(lid)}
        return WorldModel(self.walls.copy(), lms, self.extent)


@dataclass(frozen=True)
class LidarSpec:
    max_range: float = 5.0
    angular_resolution: float = math.radians(0.5)
    coverage: float = 2.0 * math.pi
    range_noise_std: float = 0.0
    bearing_noise_std: float = 0.0

    def __post_init__(self):
        if self.max_range <= 0.0:
            raise ValueError("max_range must be positive")
        if not 0.0 < self.angular_resolution <= self.coverage:
            raise ValueError("need 0 < angular_resolution <= coverage")

    @property
    def bearings(self) -> np.ndarray:
        n = int(round(self.coverage / self.angular_resolution))
        return -math.pi + np.arange(n) * self.angular_resolution


@dataclass
class Scan:
    ranges: np.ndarray
    bearings: np.ndarray
    hits: np.ndarray

    def __len__(self) -> int:
        return len(self.ranges)

    @classmethod
    def empty(cls) -> "Scan":
        z = np.zeros(0)
        return cls(z, z.copy(), np.zeros(0, dtype=bool))


def raycast_scan(world: WorldModel, pose, spec: LidarSpec,
                 rng: np.random.Generator | None = None) -> Scan:
    """Cast one full sweep from pose (x, y, phi).

    Beams that reach no wall within max_range report max_range with the
    hit flag cleared. Gaussian range/bearing noise is added per spec when
    an rng is given.
    """
    x, y, phi = pose
    bearings = spec.bearings
    if rng is not None and spec.bearing_noise_std > 0.0:
        bearings = bearings + rng.normal(0.0, spec.bearing_noise_std,
                                         bearings.shape)
    ranges, hits = _kernels.raycast(x, y, bearings + phi, world.walls,
                                    spec.max_range)
    if rng is not None and spec.range_noise_std > 0.0:
        noise = rng.normal(0.0, spec.range_noise_std, ranges.shape)
        ranges = np.where(hits, np.clip(ranges + noise, 0.0,
                                        spec.max_range), ranges)
    return Scan(ranges=ranges, bearings=bearings, hits=hits)


def segment_blocked(world: WorldModel, p, q) -> bool:
    """True when the open segment p->q crosses any wall."""
    px, py = p
    qx, qy = q
    d = math.hypot(qx - px, qy - py)
    if d < 1e-12:
        return False
    ang = np.array([math.atan2(qy - py, qx - px)])
    ranges, hits = _kernels.raycast(px, py, ang, world.walls, d - 1e-9)
    return bool(hits[0])


def visible_landmarks(world: WorldModel, pose, max_range: float,
                      landmarks: dict | None = None) -> list:
    """Landmark ids within range and not occluded by walls."""
    x, y = pose[0], pose[1]
    lms = world.landmarks if landmarks is None else landmarks
    out = []
    for lid, (lx, ly) in lms.items():
        if math.hypot(lx - x, ly - y) > max_range:
            continue
        if segment_blocked(world, (x, y), (lx, ly)):
            continue
        out.append(lid)
    return out


@dataclass
class NoiseParams:
    q: np.ndarray = field(default_factory=lambda: 0.01 * np.eye(2))
    r: np.ndarray = field(default_factory=lambda: 0.01 * np.eye(2))
    p0: np.ndarray = field(default_factory=lambda: 0.01 * np.eye(2))

    def __post_init__(self):
        for name in ("q", "r", "p0"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.shape == ():
                m = float(m) * np.eye(2)
            if m.shape != (2, 2) or np.linalg.eigvalsh(m).min() < 0.0:
                raise ValueError(f"{name} must be a 2x2 PSD matrix")
            setattr(self, name, m)


@dataclass
class KfState:
    """Stacked [robot(2), landmark(2) * L] linear filter state."""

    x: np.ndarray
    p: np.ndarray
    landmark_offsets: dict = field(default_factory=dict)
    heading: float = 0.0

    @classmethod
    def initial(cls, position, noise: NoiseParams,
                heading: float = 0.0) -> "KfState":
        return cls(x=np.asarray(position, dtype=np.float64).copy(),
                   p=noise.p0.copy(), landmark_offsets={}, heading=heading)

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    def robot_mean(self) -> np.ndarray:
        return self.x[:2]

    def robot_cov(self) -> np.ndarray:
        return self.p[:2, :2]

    def landmark_mean(self, lid) -> np.ndarray:
        off = self.landmark_offsets[str(lid)]
        return self.x[off:off + 2]

    def landmark_cov(self, lid) -> np.ndarray:
        off = self.landmark_offsets[str(lid)]
        return self.p[off:off + 2, off:off + 2]

    def landmark_sigma_tilde(self, lid) -> float:
        cov = self.landmark_cov(lid)
        det = float(np.linalg.det(cov))
        return det ** 0.25 if det > 0.0 else 0.0

    def copy(self) -> "KfState":
        return KfState(self.x.copy(), self.p.copy(),
                       dict(self.landmark_offsets), self.heading)


def kf_predict(state: KfState, u, noise: NoiseParams) -> KfState:
    """Shift the robot block by u; only its covariance inflates."""
    out = state.copy()
    out.x[:2] += np.asarray(u, dtype=np.float64)
    out.p[:2, :2] += noise.q
    return out


def _augment(state: KfState, lid: str, z: np.ndarray,
             noise: NoiseParams) -> KfState:
    n = state.dim
    x = np.concatenate([state.x, state.x[:2] + z])
    p = np.zeros((n + 2, n + 2))
    p[:n, :n] = state.p
    p[n:, n:] = state.p[:2, :2] + noise.r
    p[n:, :n] = state.p[:2, :n]
    p[:n, n:] = state.p[:n, :2]
    offsets = dict(state.landmark_offsets)
    offsets[lid] = n
    return KfState(x, p, offsets, state.heading)


def kf_update(state: KfState, observations, noise: NoiseParams) -> KfState:
    """Sequential Joseph-form updates; new ids are augmented first.

    observations is a list of (landmark id, z) with z = landmark - robot
    plus measurement noise.
    """
    out = state.copy()
    for lid, z in observations:
        lid = str(lid)
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (2,):
            raise ValueError("observation must be a 2-vector")
        if lid not in out.landmark_offsets:
            out = _augment(out, lid, z, noise)
            continue
        off = out.landmark_offsets[lid]
        n = out.dim
        h = np.zeros((2, n))
        h[:, :2] = -np.eye(2)
        h[:, off:off + 2] = np.eye(2)
        innov = z - h @ out.x
        s = h @ out.p @ h.T + noise.r
        k = out.p @ h.T @ np.linalg.solve(s, np.eye(2))
        ikh = np.eye(n) - k @ h
        out.x = out.x + k @ innov
        out.p = ikh @ out.p @ ikh.T + k @ noise.r @ k.T
        out.p = 0.5 * (out.p + out.p.T)
    return out


def pose_belief(state: KfState, heading: float | None = None,
                heading_var: float = DEFAULT_HEADING_VAR) -> GaussianBelief:
    """3D (x, y, phi) belief: KF robot block plus independent heading."""
    if heading_var <= 0.0:
        raise DegenerateBelief("heading variance must be positive")
    phi = state.heading if heading is None else heading
    cov = np.zeros((3, 3))
    cov[:2, :2] = state.robot_cov()
    cov[2, 2] = heading_var
    mean = np.array([state.x[0], state.x[1], phi])
    return GaussianBelief(mean, cov)


@dataclass
class Simulator:
    """Stepped ground-truth world + KF estimator pair.

    Process noise enters the true motion; the filter sees noisy landmark
    observations only. Everything is driven by one seeded Generator, so
    identical seeds give identical histories.
    """

    world: WorldModel
    lidar: LidarSpec
    noise: NoiseParams
    rng: np.random.Generator
    true_pos: np.ndarray
    state: KfState
    max_step: float = 0.25

    @classmethod
    def create(cls, world: WorldModel, start, seed: int,
               lidar: LidarSpec | None = None,
               noise: NoiseParams | None = None,
               max_step: float = 0.25) -> "Simulator":
        noise = noise if noise is not None else NoiseParams()
        return cls(world=world,
                   lidar=lidar if lidar is not None else LidarSpec(),
                   noise=noise,
                   rng=np.random.default_rng(seed),
                   true_pos=np.asarray(start, dtype=np.float64).copy(),
                   state=KfState.initial(start, noise),
                   max_step=max_step)

    def step(self, u) -> None:
        """One commanded displacement, clipped to max_step."""
        u = np.asarray(u, dtype=np.float64)
        norm = float(np.linalg.norm(u))
        if norm > self.max_step:
            u = u * (self.max_step / norm)
        w = self.rng.multivariate_normal(np.zeros(2), self.noise.q)
        self.true_pos += u + w
        self.state = kf_predict(self.state, u, self.noise)

    def observe_landmarks(self) -> list:
        """Noisy relative observations of currently visible landmarks."""
        ids = visible_landmarks(self.world, self.true_pos,
                                self.lidar.max_range)
        obs = []
        for lid in sorted(ids):
            lx, ly = self.world.landmarks[lid]
            v = self.rng.multivariate_normal(np.zeros(2), self.noise.r)
            obs.append((lid, np.array([lx, ly]) - self.true_pos + v))
        return obs

    def update_filter(self) -> list:
        obs = self.observe_landmarks()
        if obs:
            self.state = kf_update(self.state, obs, self.noise)
        return obs

    def scan(self) -> Scan:
        return raycast_scan(self.world,
                            (self.true_pos[0], self.true_pos[1],
                             self.state.heading),
                            self.lidar, self.rng)

    def nees(self) -> float:
        e = self.state.robot_mean() - self.true_pos
        return float(e @ np.linalg.solve(self.state.robot_cov(), e))
