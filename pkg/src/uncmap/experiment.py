"""Scenario configuration, the exploration experiment loop, and statistics.

A scenario pins a world fixture, a landmark layout, a path-planning
system (PPS), and the map-prior sigma_max; running it simulates
sense -> filter -> map update -> frontier extraction -> plan -> move
until no objectives remain or the step cap is hit. Batches aggregate
final map-quality scores into quartile tables and fit the landmark
sigma~ vs. mean map uncertainty regression.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

from .analysis import (FrontierParams, build_uncertainty_map,
                       extract_frontiers, siren)
from .belief import PriorConstants, PriorSpec, apply_fov, derive_prior
from .dispersion import RectangleSpec
from .errors import MalformedFile, NoPathFound
from .grid import (GridGeometry, GridLayer, load_layer, save_layer,
                   world_to_cell)
from .planning import (Objective, PlannerParams, PlanSpace, plan_greedy_rrt,
                       plan_rrt_star_uncertainty)
from .sim import (LidarSpec, NoiseParams, Simulator, WorldModel, pose_belief,
                  visible_landmarks)

# layout = landmark completeness x start position
LAYOUTS = {"L1": ("incomplete", "P2"), "L2": ("incomplete", "P1"),
           "L3": ("complete", "P1"), "L4": ("complete", "P2")}
# planning system: frontier kind + planner + default map-prior sigma_max
PPS_MODE = {1: "CF", 2: "CF", 3: "UF", 4: "UF"}
PPS_SIGMA_MAX = {1: 1.0, 2: 1.0, 3: 0.6, 4: 1.0}


def fixture_path(name: str) -> Path:
    p = resources.files("uncmap.fixtures") / f"{name}.json"
    return Path(str(p))


def load_fixture(name: str) -> dict:
    path = fixture_path(name)
    if not path.exists():
        raise MalformedFile(f"no fixture named {name!r}")
    return json.loads(path.read_text())


def fixture_world(name: str) -> WorldModel:
    return WorldModel.from_json(fixture_path(name))


@dataclass(frozen=True)
class ScenarioConfig:
    """One cell of the comparative study, plus desk-scale knobs."""

    fixture: str = "warehouse"
    layout: str = "L3"
    pps: int = 4
    sigma_max: float | None = None  # map-prior sigma_max; None = PPS default
    t_h: float = 0.2
    sigma0: float = 0.1
    sides: tuple = (0.1, 0.1)
    kappa: float = 0.5
    seeds: tuple = ()
    repeats: int = 5
    resolution_c: float = 0.1
    scan_every: int = 4
    max_steps: int = 5000
    max_path_steps: int = 40
    probe_limit: int = 8
    probe_iterations: int = 300
    process_noise: float = 4e-3
    obs_noise: float = 1e-4
    range_noise_std: float = 0.02
    bearing_noise_std: float = math.radians(0.1)
    beam_step_deg: float = 1.0
    lidar_range: float = 5.0
    obstacle_clearance: float = 0.5
    plan_clearance: float = 0.3
    sigma_override: bool = False

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.pps not in PPS_MODE:
            raise ValueError(f"unknown pps {self.pps!r}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.t_h <= 0.0 or self.sigma0 <= 0.0 or self.resolution_c <= 0.0:
            raise ValueError("t_h, sigma0 and resolution_c must be positive")
        sm = PPS_SIGMA_MAX[self.pps] if self.sigma_max is None \
            else float(self.sigma_max)
        if self.pps in (3, 4) and not self.sigma_override \
                and sm != PPS_SIGMA_MAX[self.pps]:
            raise ValueError(
                f"pps {self.pps} fixes sigma_max = "
                f"{PPS_SIGMA_MAX[self.pps]}; pass sigma_override to change")
        object.__setattr__(self, "sigma_max", sm)
        object.__setattr__(self, "sides",
                           tuple(float(s) for s in self.sides))
        object.__setattr__(self, "seeds",
                           tuple(int(s) for s in self.seeds))

    @property
    def run_seeds(self) -> tuple:
        return self.seeds if self.seeds else tuple(range(self.repeats))

    def as_dict(self) -> dict:
        return {"fixture": self.fixture, "layout": self.layout,
                "pps": self.pps, "sigma_max": self.sigma_max,
                "t_h": self.t_h, "sigma0": self.sigma0,
                "sides": list(self.sides), "kappa": self.kappa,
                "seeds": list(self.run_seeds),
                "resolution_c": self.resolution_c,
                "scan_every": self.scan_every,
                "max_steps": self.max_steps,
                "process_noise": self.process_noise,
                "obs_noise": self.obs_noise,
                "range_noise_std": self.range_noise_std,
                "bearing_noise_std": self.bearing_noise_std,
                "beam_step_deg": self.beam_step_deg,
                "lidar_range": self.lidar_range}


@dataclass
class RunRecord:
    """Everything one execution produced."""

    config: dict
    seed: int
    trajectory: np.ndarray  # (T, 4) rows t, x, y, phi
    siren_trace: np.ndarray  # (K, 2) rows update, siren
    dp: GridLayer
    um: GridLayer
    occupancy: GridLayer
    explored: np.ndarray  # bool (H, W)
    frontier_history: list  # (update, n_uf_clusters, n_cf_clusters)
    stopping_reason: str  # no_objectives | iteration_cap | error
    wall_clock: float
    landmark_sigmas: dict  # id -> final sigma~
    error: str = ""

    @property
    def final_siren(self) -> float:
        return float(self.siren_trace[-1, 1]) if len(self.siren_trace) \
            else 0.0

    @property
    def coverage(self) -> float:
        return float(self.explored.mean())

    @property
    def median_landmark_sigma(self) -> float:
        vals = sorted(self.landmark_sigmas.values())
        return float(np.median(vals)) if vals else math.nan

    @property
    def median_um(self) -> float:
        if not self.explored.any():
            return math.nan
        return float(np.median(self.um.values[self.explored]))

    def summary_row(self) -> dict:
        return {"fixture": self.config["fixture"],
                "layout": self.config["layout"],
                "pps": self.config["pps"],
                "sigma_max": self.config["sigma_max"],
                "seed": self.seed,
                "steps": len(self.trajectory) - 1,
                "updates": len(self.siren_trace),
                "final_siren": f"{self.final_siren:.9g}",
                "coverage": f"{self.coverage:.9g}",
                "median_landmark_sigma":
                    f"{self.median_landmark_sigma:.9g}",
                "median_um": f"{self.median_um:.9g}",
                "stopping_reason": self.stopping_reason}


SUMMARY_FIELDS = ["fixture", "layout", "pps", "sigma_max", "seed", "steps",
                  "updates", "final_siren", "coverage",
                  "median_landmark_sigma", "median_um", "stopping_reason"]


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _grid_geometry(extent, c: float) -> GridGeometry:
    xmin, ymin, xmax, ymax = extent
    return GridGeometry(resolution_c=c, origin=(xmin, ymin),
                        width=int(round((xmax - xmin) / c)),
                        height=int(round((ymax - ymin) / c)))


def _scenario_prior(config: ScenarioConfig) -> PriorConstants:
    spec = PriorSpec(
        sigma_max_per_axis=np.full(len(config.sides), config.sigma_max),
        sides=RectangleSpec(np.asarray(config.sides)),
        kappa=config.kappa)
    return derive_prior(spec)


def _free_space(occupancy: GridLayer, clearance: float) -> np.ndarray:
    """Optimistic traversability: everything not near a known obstacle."""
    occ = occupancy.values > 0.5
    if not occ.any():
        return ~occ
    n = max(int(round(clearance / occupancy.geometry.resolution_c)), 1)
    return ~ndimage.binary_dilation(occ, iterations=n)


def _carve_disk(free: np.ndarray, geometry: GridGeometry, p,
                radius: float) -> None:
    c = geometry.resolution_c
    col = int((p[0] - geometry.origin[0]) / c)
    row = int((p[1] - geometry.origin[1]) / c)
    n = max(int(round(radius / c)), 1)
    r0, r1 = max(row - n, 0), min(row + n + 1, geometry.height)
    c0, c1 = max(col - n, 0), min(col + n + 1, geometry.width)
    free[r0:r1, c0:c1] = True


class _Explorer:
    """State of one exploration run; drives the sense/plan/move loop."""

    def __init__(self, config: ScenarioConfig, seed: int):
        self.config = config
        fixture = load_fixture(config.fixture)
        world = fixture_world(config.fixture)
        completeness, start_key = LAYOUTS[config.layout]
        if completeness == "incomplete":
            world = world.without_landmark(fixture["incomplete_remove"])
        self.world = world
        start = fixture["starts"][start_key] if "starts" in fixture \
            else fixture["script"]["start"]
        self.prior = _scenario_prior(config)
        self.geometry = _grid_geometry(world.extent, config.resolution_c)
        lidar = LidarSpec(max_range=config.lidar_range,
                          angular_resolution=math.radians(
                              config.beam_step_deg),
                          range_noise_std=config.range_noise_std,
                          bearing_noise_std=config.bearing_noise_std)
        noise = NoiseParams(q=config.process_noise * np.eye(2),
                            r=config.obs_noise * np.eye(2),
                            p0=config.sigma0 ** 2 * np.eye(2))
        self.sim = Simulator.create(world, start, seed, lidar=lidar,
                                    noise=noise)
        self.sensor_cov = np.diag([config.range_noise_std ** 2,
                                   config.bearing_noise_std ** 2])
        self.dp = GridLayer.filled(self.geometry, self.prior.ell_beta,
                                   "log_odds")
        self.occupancy = GridLayer.filled(self.geometry, 0.0, "occupancy")
        self.explored = np.zeros((self.geometry.height, self.geometry.width),
                                 dtype=bool)
        self.fparams = FrontierParams(
            t_h=config.t_h, u_beta=self.prior.u_beta,
            obstacle_clearance=config.obstacle_clearance, dim=self.prior.dim,
            raw_gradient=True)
        self.plan_rng = np.random.default_rng((seed, 17))
        self.steps = 0
        self.trajectory = [(0, start[0], start[1], 0.0)]
        self.siren_trace = []
        self.frontier_history = []
        self.d_odo = 0.0
        self.sigma_l = config.sigma0
        self.attempts = {}  # quantized objective target -> pursuit count
        self.frontiers = None

    # -- sensing ----------------------------------------------------------

    def map_update(self):
        scan = self.sim.scan()
        belief = pose_belief(self.sim.state)
        touched = apply_fov(self.dp, self.occupancy, belief, scan,
                            self.sensor_cov, self.prior,
                            kappa=self.config.kappa)
        for cell in touched:
            self.explored[cell.row, cell.col] = True
        um = build_uncertainty_map(self.dp, self.prior)
        self.frontiers = extract_frontiers(um, self.occupancy, self.explored,
                                           self.fparams)
        report = siren(self.dp, self.prior)
        self.siren_trace.append((len(self.siren_trace), report.total))
        self.frontier_history.append((len(self.siren_trace) - 1,
                                      len(self.frontiers.uf_clusters),
                                      len(self.frontiers.cf_clusters)))
        self.um = um

    def _track_references(self, obs, step_len: float) -> None:
        if obs:
            self.d_odo = 0.0
            self.sigma_l = self.sim.state.landmark_sigma_tilde(obs[-1][0])
        else:
            self.d_odo += step_len

    def move_step(self, target) -> None:
        est = self.sim.state.robot_mean()
        u = np.asarray(target, dtype=np.float64) - est
        self.sim.step(u)
        obs = self.sim.update_filter()
        self._track_references(obs, min(float(np.linalg.norm(u)),
                                        self.sim.max_step))
        self.steps += 1
        x, y = self.sim.true_pos
        self.trajectory.append((self.steps, x, y, self.sim.state.heading))
        if self.steps % self.config.scan_every == 0:
            self.map_update()

    # -- planning ---------------------------------------------------------

    def _visibility_fn(self, space: PlanSpace):
        """sigma~ of visible *known* landmarks, memoized on 0.2 m bins."""
        state = self.sim.state
        known = {lid: tuple(state.landmark_mean(lid))
                 for lid in state.landmark_offsets}
        sigmas = {lid: state.landmark_sigma_tilde(lid)
                  for lid in state.landmark_offsets}
        cache = {}
        max_range = self.sim.lidar.max_range

        def vis(pos):
            key = (round(pos[0] * 5.0), round(pos[1] * 5.0))
            hit = cache.get(key)
            if hit is None:
                ids = visible_landmarks(self.world, pos, max_range,
                                        landmarks=known)
                hit = np.array([sigmas[i] for i in sorted(ids)])
                cache[key] = hit
            return hit

        return vis

    def _quantized(self, target) -> tuple:
        return (round(target[0] * 2.0), round(target[1] * 2.0))

    def choose_objective(self) -> Objective | None:
        cfg = self.config
        mode = PPS_MODE[cfg.pps]
        clusters = self.frontiers.clusters(mode)
        if not clusters:
            return None
        free = _free_space(self.occupancy, cfg.plan_clearance)
        start = tuple(self.sim.state.robot_mean())
        space = PlanSpace(self.geometry, free)
        if not space.point_free(start):
            _carve_disk(free, self.geometry, start, 2 * cfg.plan_clearance)
            space = PlanSpace(self.geometry, free)
        vis = self._visibility_fn(space)
        params = PlannerParams(cell_size=cfg.resolution_c,
                               max_iterations=cfg.probe_iterations)
        candidates = []
        for cl in clusters:
            if self.attempts.get(self._quantized(cl.centroid), 0) >= 3:
                continue
            if not self.geometry.contains(cl.centroid):
                continue
            candidates.append(cl)
        candidates.sort(key=lambda cl: math.dist(start, cl.centroid))
        best = None
        for idx, cl in enumerate(candidates[:cfg.probe_limit]):
            target = cl.centroid
            if not space.point_free(target):
                _carve_disk(free, self.geometry, target, cfg.plan_clearance)
                space = PlanSpace(self.geometry, free)
            try:
                if cfg.pps == 1:
                    path = plan_greedy_rrt(start, target, space, params,
                                           self.plan_rng)
                else:
                    path = plan_rrt_star_uncertainty(
                        (start, self.d_odo, self.sigma_l), target, space,
                        vis, params, self.plan_rng)
            except NoPathFound:
                continue
            if best is None or path.cost < best.cost:
                best = Objective(kind=mode, target=target, cluster=cl,
                                 cost=path.cost, path=path)
        if best is not None:
            key = self._quantized(best.target)
            self.attempts[key] = self.attempts.get(key, 0) + 1
        return best

    def follow(self, objective: Objective) -> None:
        cfg = self.config
        budget = cfg.max_path_steps
        for waypoint in objective.path.positions[1:]:
            for _ in range(2):
                if self.steps >= cfg.max_steps or budget <= 0:
                    return
                self.move_step(waypoint)
                budget -= 1
                est = self.sim.state.robot_mean()
                if math.dist(est, waypoint) < 0.12:
                    break

    def run(self) -> tuple[str, str]:
        cfg = self.config
        self.sim.update_filter()
        self.map_update()
        while self.steps < cfg.max_steps:
            objective = self.choose_objective()
            if objective is None:
                return "no_objectives", ""
            self.follow(objective)
            if self.steps % cfg.scan_every != 0:
                self.map_update()
        return "iteration_cap", ""


def run_single(config: ScenarioConfig, seed: int) -> RunRecord:
    """One seeded exploration; exceptions become an `error` record."""
    t0 = time.perf_counter()
    explorer = _Explorer(config, seed)
    try:
        reason, message = explorer.run()
    except Exception as exc:  # per-run failures must not kill the batch
        reason, message = "error", f"{type(exc).__name__}: {exc}"
    state = explorer.sim.state
    landmark_sigmas = {lid: float(state.landmark_sigma_tilde(lid))
                       for lid in sorted(state.landmark_offsets)}
    um = getattr(explorer, "um",
                 build_uncertainty_map(explorer.dp, explorer.prior))
    return RunRecord(
        config=config.as_dict(), seed=seed,
        trajectory=np.array(explorer.trajectory, dtype=np.float64),
        siren_trace=np.array(explorer.siren_trace,
                             dtype=np.float64).reshape(-1, 2),
        dp=explorer.dp, um=um, occupancy=explorer.occupancy,
        explored=explorer.explored,
        frontier_history=explorer.frontier_history,
        stopping_reason=reason, wall_clock=time.perf_counter() - t0,
        landmark_sigmas=landmark_sigmas, error=message)


def _run_task(args) -> RunRecord:
    config_kwargs, seed = args
    return run_single(ScenarioConfig(**config_kwargs), seed)


def run_scenario(config: ScenarioConfig, out_dir=None,
                 workers: int | None = None) -> list:
    """All seeds of one scenario, optionally in parallel worker processes."""
    seeds = config.run_seeds
    kwargs = {k: getattr(config, k) for k in (
        "fixture", "layout", "pps", "sigma_max", "t_h", "sigma0", "sides",
        "kappa", "seeds", "repeats", "resolution_c", "scan_every",
        "max_steps", "max_path_steps", "probe_limit", "probe_iterations",
        "process_noise", "obs_noise", "range_noise_std",
        "bearing_noise_std", "beam_step_deg", "lidar_range",
        "obstacle_clearance",
        "plan_clearance", "sigma_override")}
    if workers is not None and workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_task,
                                    [(kwargs, s) for s in seeds]))
    else:
        records = [run_single(config, s) for s in seeds]
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for rec in records:
            save_record(rec, out_dir / run_name(rec))
        write_summary(records, out_dir / "summary.csv")
    return records


def run_name(record: RunRecord) -> str:
    c = record.config
    return (f"{c['fixture']}_{c['layout']}_pps{c['pps']}"
            f"_seed{record.seed}")


def save_record(record: RunRecord, run_dir) -> None:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    save_layer(record.dp, run_dir / "dp")
    save_layer(record.um, run_dir / "um")
    save_layer(record.occupancy, run_dir / "occupancy")
    save_layer(GridLayer(record.dp.geometry,
                         record.explored.astype(np.float64), "occupancy"),
               run_dir / "explored")
    traj = "\n".join(["t,x,y,phi"] +
                     [f"{int(t)},{x:.9g},{y:.9g},{phi:.9g}"
                      for t, x, y, phi in record.trajectory]) + "\n"
    _atomic_write_text(run_dir / "trajectory.csv", traj)
    trace = "\n".join(["update,siren"] +
                      [f"{int(u)},{s:.9g}" for u, s in record.siren_trace]
                      ) + "\n"
    _atomic_write_text(run_dir / "siren.csv", trace)
    meta = {"config": record.config, "seed": record.seed,
            "stopping_reason": record.stopping_reason,
            "wall_clock": record.wall_clock,
            "landmark_sigmas": record.landmark_sigmas,
            "frontier_history": record.frontier_history,
            "final_siren": record.final_siren,
            "coverage": record.coverage,
            "median_landmark_sigma": record.median_landmark_sigma,
            "median_um": record.median_um,
            "error": record.error}
    _atomic_write_text(run_dir / "record.json", json.dumps(meta, indent=1))


def write_summary(records: list, path) -> None:
    rows = sorted((r.summary_row() for r in records),
                  key=lambda row: (row["fixture"], row["layout"],
                                   row["pps"], row["seed"]))
    lines = [",".join(SUMMARY_FIELDS)]
    lines += [",".join(str(row[k]) for k in SUMMARY_FIELDS)
              for row in rows]
    _atomic_write_text(Path(path), "\n".join(lines) + "\n")


def read_summary(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- statistics -----------------------------------------------------------


def aggregate_boxplots(groups: dict) -> list:
    """Five-number summaries per (layout, pps) group.

    groups maps a key to a sequence of final scores; quantiles use
    linear interpolation between order statistics.
    """
    rows = []
    for key in sorted(groups):
        vals = np.asarray(groups[key], dtype=np.float64)
        if vals.size == 0:
            raise ValueError(f"empty group {key!r}")
        q = np.quantile(vals, [0.0, 0.25, 0.5, 0.75, 1.0],
                        method="linear")
        rows.append({"group": key, "n": int(vals.size),
                     "min": float(q[0]), "q1": float(q[1]),
                     "median": float(q[2]), "q3": float(q[3]),
                     "max": float(q[4]),
                     "iqr": float(q[3] - q[1])})
    return rows


def group_records(records: list) -> dict:
    groups = {}
    for rec in records:
        key = (rec.config["layout"], rec.config["pps"])
        groups.setdefault(key, []).append(rec.final_siren)
    return groups


def write_boxplots_csv(rows: list, path) -> None:
    lines = ["# quantiles: linear interpolation between order statistics",
             "layout,pps,n,min,q1,median,q3,max,iqr"]
    for row in rows:
        layout, pps = row["group"]
        lines.append(",".join([str(layout), str(pps), str(row["n"])] +
                              [f"{row[k]:.9g}" for k in
                               ("min", "q1", "median", "q3", "max", "iqr")]))
    _atomic_write_text(Path(path), "\n".join(lines) + "\n")


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    pearson_r: float
    n: int

    def __post_init__(self):
        if abs(self.pearson_r) > 1.0 + 1e-12:
            raise ValueError("|pearson_r| must be <= 1")


def fit_line(x, y) -> RegressionFit:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 2:
        raise ValueError("need >= 2 paired samples")
    slope, intercept = np.polyfit(x, y, 1)
    if np.allclose(y, y[0]) or np.allclose(x, x[0]):
        r = 1.0 if np.allclose(y - slope * x, intercept) else 0.0
    else:
        r = float(np.corrcoef(x, y)[0, 1])
    return RegressionFit(slope=float(slope), intercept=float(intercept),
                         pearson_r=min(max(r, -1.0), 1.0), n=int(x.size))


LANDMARK_UM_RADII = (1.0, 1.25, 1.5)


def landmark_um_pairs(records: list,
                      radii=LANDMARK_UM_RADII) -> tuple[np.ndarray,
                                                        np.ndarray]:
    """Pair each landmark's final sigma~ with the map uncertainty nearby.

    For every landmark of every record, the local map value is the
    lowest explored uncertainty-map cell within a square neighborhood,
    averaged over the given radii (meters).  The lowest local cell
    reflects the best-anchored scan of the area, which is the same pass
    that set the landmark's final covariance; averaging over radii
    keeps the statistic from hinging on a single cell.
    """
    xs: list[float] = []
    ys: list[float] = []
    for record in records:
        fixture = load_fixture(record.config["fixture"])
        positions = {lm["id"]: (lm["x"], lm["y"])
                     for lm in fixture["landmarks"]}
        geom = record.um.geometry
        for name, sigma in record.landmark_sigmas.items():
            cell = world_to_cell(geom, positions[name])
            locals_: list[float] = []
            for radius in radii:
                rad = int(round(radius / geom.resolution_c))
                sl = (slice(max(0, cell.row - rad), cell.row + rad + 1),
                      slice(max(0, cell.col - rad), cell.col + rad + 1))
                mask = record.explored[sl]
                if mask.any():
                    locals_.append(float(np.min(record.um.values[sl][mask])))
            if locals_:
                xs.append(float(sigma))
                ys.append(float(np.mean(locals_)))
    return np.asarray(xs), np.asarray(ys)


def fit_landmark_um(records: list) -> RegressionFit:
    """Per-landmark sigma~ vs. local explored-map uncertainty."""
    x, y = landmark_um_pairs(records)
    if x.size < 3:
        raise ValueError("need >= 3 landmark/map pairs")
    return fit_line(x, y)


# -- scripted corridor run ------------------------------------------------


def run_corridor_script(t_h: float = 0.3, seed: int = 0,
                        sigma_max: float = 1.0,
                        process_noise: float = 6e-3,
                        config: ScenarioConfig | None = None) -> dict:
    """Drive the scripted corridor legs and return the resulting maps.

    The middle leg senses nothing while pose uncertainty accumulates, so
    the map carries an interior uncertainty seam in addition to the
    open-end coverage boundaries.
    """
    if config is None:
        config = ScenarioConfig(fixture="corridor", layout="L3", pps=2,
                                sigma_max=sigma_max, t_h=t_h,
                                process_noise=process_noise,
                                beam_step_deg=0.5, lidar_range=3.0)
    fixture = load_fixture(config.fixture)
    world = fixture_world(config.fixture)
    prior = _scenario_prior(config)
    geometry = _grid_geometry(world.extent, config.resolution_c)
    lidar = LidarSpec(max_range=config.lidar_range,
                      angular_resolution=math.radians(config.beam_step_deg),
                      range_noise_std=config.range_noise_std,
                      bearing_noise_std=config.bearing_noise_std)
    noise = NoiseParams(q=config.process_noise * np.eye(2),
                        r=config.obs_noise * np.eye(2),
                        p0=config.sigma0 ** 2 * np.eye(2))
    script = fixture["script"]
    sim = Simulator.create(world, script["start"], seed, lidar=lidar,
                           noise=noise)
    dp = GridLayer.filled(geometry, prior.ell_beta, "log_odds")
    occupancy = GridLayer.filled(geometry, 0.0, "occupancy")
    explored = np.zeros((geometry.height, geometry.width), dtype=bool)
    sensor_cov = np.diag([config.range_noise_std ** 2,
                          config.bearing_noise_std ** 2])
    siren_trace = []

    def scan_here():
        touched = apply_fov(dp, occupancy, pose_belief(sim.state),
                            sim.scan(), sensor_cov, prior,
                            kappa=config.kappa)
        for cell in touched:
            explored[cell.row, cell.col] = True
        siren_trace.append(siren(dp, prior).total)

    scans_per_mark = int(script.get("scans_per_mark", 1))

    def scan_mark():
        for _ in range(scans_per_mark):
            scan_here()

    sim.update_filter()
    scan_mark()
    for leg in script["scan_legs"]:
        start = np.asarray(leg["from"], dtype=np.float64)
        end = np.asarray(leg["to"], dtype=np.float64)
        length = float(np.linalg.norm(end - start))
        spacing = leg["scan_spacing"]
        marks = [] if spacing is None else \
            list(np.arange(spacing, length + 1e-9, spacing))
        traveled, mark_i = 0.0, 0
        while traveled < length - 1e-9:
            step = min(sim.max_step, length - traveled)
            direction = (end - start) / length
            target = start + (traveled + step) * direction
            sim.step(target - sim.state.robot_mean())
            sim.update_filter()
            traveled += step
            while mark_i < len(marks) and traveled >= marks[mark_i] - 1e-9:
                scan_mark()
                mark_i += 1
    um = build_uncertainty_map(dp, prior)
    fparams = FrontierParams(t_h=config.t_h, u_beta=prior.u_beta,
                             obstacle_clearance=config.obstacle_clearance,
                             raw_gradient=True)
    frontiers = extract_frontiers(um, occupancy, explored, fparams)
    return {"dp": dp, "um": um, "occupancy": occupancy,
            "explored": explored, "prior": prior, "params": fparams,
            "frontiers": frontiers, "geometry": geometry,
            "siren_trace": siren_trace}
