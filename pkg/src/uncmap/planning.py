"""Exploration objective selection and sampling-based planning.

Two planners: a greedy RRT that returns the first path to the goal, and
an RRT* whose cost adds, to path length, the distance traveled without
landmark references and a penalty from the last referenced landmark's
uncertainty. Both are deterministic under a seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoPathFound
from .grid import GridGeometry

_EPS = 1e-12


@dataclass(frozen=True)
class PlannerParams:
    cell_size: float = 0.1
    q_tilde: float = 0.01  # landmark-uncertainty-to-distance conversion
    step_length: float = 0.25
    rewire_radius: float = 1.0
    max_iterations: int = 1200
    goal_tolerance: float = 0.3  # 3 cells at the default resolution
    goal_bias: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("cell_size", "q_tilde", "step_length", "rewire_radius",
                     "goal_tolerance"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")


@dataclass
class PlanNode:
    position: tuple
    parent: int  # index into the tree, -1 for root
    d: float  # cumulative path length
    d_odo: float  # length since the last landmark reference
    sigma_l: float  # sigma~ of the last referenced landmark
    cost: float = 0.0
    obs_sigma: float | None = None  # cached visibility at this position
    children: list = field(default_factory=list)


def _cost_of(d, d_odo, sigma_l, params: PlannerParams) -> float:
    return d + d_odo + 2.0 * sigma_l / (params.cell_size * params.q_tilde)


def node_cost(parent: PlanNode, child_pos, landmark_visibility,
              params: PlannerParams) -> PlanNode:
    """Extend parent to child_pos and do the reference bookkeeping.

    landmark_visibility(pos) returns the sigma~ values of landmarks
    visible there; when non-empty the odometry leg resets and the last
    entry becomes the node's landmark term.
    """
    seg = math.dist(parent.position, child_pos)
    vis = landmark_visibility(child_pos)
    d = parent.d + seg
    if len(vis) > 0:
        d_odo = 0.0
        sigma_l = float(vis[-1])
        obs = sigma_l
    else:
        d_odo = parent.d_odo + seg
        sigma_l = parent.sigma_l
        obs = None
    return PlanNode(position=tuple(child_pos), parent=-1, d=d, d_odo=d_odo,
                    sigma_l=sigma_l,
                    cost=_cost_of(d, d_odo, sigma_l, params), obs_sigma=obs)


@dataclass
class PlanSpace:
    """Traversable-cell mask over a grid geometry."""

    geometry: GridGeometry
    free: np.ndarray  # bool (H, W)

    def __post_init__(self):
        self.free = np.asarray(self.free, dtype=bool)
        if self.free.shape != (self.geometry.height, self.geometry.width):
            raise ValueError("free mask shape must match geometry")
        rows, cols = np.nonzero(self.free)
        self._free_rows = rows
        self._free_cols = cols

    def point_free(self, p) -> bool:
        g = self.geometry
        if not g.contains(p):
            return False
        col = int((p[0] - g.origin[0]) / g.resolution_c)
        row = int((p[1] - g.origin[1]) / g.resolution_c)
        return bool(self.free[row, col])

    def segment_free(self, p, q) -> bool:
        d = math.dist(p, q)
        n = max(int(d / (self.geometry.resolution_c * 0.5)), 1)
        ts = np.linspace(0.0, 1.0, n + 1)
        for t in ts:
            if not self.point_free((p[0] + t * (q[0] - p[0]),
                                    p[1] + t * (q[1] - p[1]))):
                return False
        return True

    def sample(self, rng: np.random.Generator) -> tuple:
        i = rng.integers(self._free_rows.shape[0])
        g = self.geometry
        jx, jy = rng.random(2)
        return (g.origin[0] + (self._free_cols[i] + jx) * g.resolution_c,
                g.origin[1] + (self._free_rows[i] + jy) * g.resolution_c)


@dataclass
class Path:
    nodes: list  # root -> goal PlanNodes
    cost: float

    @property
    def positions(self) -> np.ndarray:
        return np.array([n.position for n in self.nodes])

    @property
    def length(self) -> float:
        pos = self.positions
        if len(pos) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(pos, axis=0), axis=1)))

    def to_json(self) -> str:
        return json.dumps([{"x": n.position[0], "y": n.position[1],
                            "d": n.d, "d_odo": n.d_odo,
                            "sigma_l": n.sigma_l, "cost": n.cost}
                           for n in self.nodes], indent=1)


def _nearest(positions: np.ndarray, p) -> int:
    delta = positions - np.asarray(p)[None, :]
    return int(np.argmin(np.einsum("ij,ij->i", delta, delta)))


def _steer(from_pos, to_pos, step: float) -> tuple:
    d = math.dist(from_pos, to_pos)
    if d <= step:
        return tuple(to_pos)
    f = step / d
    return (from_pos[0] + f * (to_pos[0] - from_pos[0]),
            from_pos[1] + f * (to_pos[1] - from_pos[1]))


def _extract(tree: list, idx: int, cost: float) -> Path:
    chain = []
    while idx >= 0:
        chain.append(tree[idx])
        idx = tree[idx].parent
    return Path(nodes=chain[::-1], cost=cost)


def plan_greedy_rrt(start, goal, space: PlanSpace, params: PlannerParams,
                    rng: np.random.Generator | None = None) -> Path:
    """Plain RRT; returns the first branch that reaches the goal region."""
    if rng is None:
        rng = np.random.default_rng(params.seed)
    start = tuple(start)
    goal = tuple(goal)
    if math.dist(start, goal) <= params.goal_tolerance:
        root = PlanNode(start, -1, 0.0, 0.0, 0.0, 0.0)
        return Path(nodes=[root], cost=0.0)
    root = PlanNode(start, -1, 0.0, 0.0, 0.0, 0.0)
    tree = [root]
    positions = np.array([start])
    for _ in range(params.max_iterations):
        target = goal if rng.random() < params.goal_bias \
            else space.sample(rng)
        ni = _nearest(positions, target)
        new_pos = _steer(tree[ni].position, target, params.step_length)
        if not space.segment_free(tree[ni].position, new_pos):
            continue
        d = tree[ni].d + math.dist(tree[ni].position, new_pos)
        node = PlanNode(new_pos, ni, d, 0.0, 0.0, d)
        tree.append(node)
        positions = np.vstack([positions, new_pos])
        if math.dist(new_pos, goal) <= params.goal_tolerance:
            return _extract(tree, len(tree) - 1, d)
    raise NoPathFound(f"greedy RRT: no path after "
                      f"{params.max_iterations} iterations")


def _is_ancestor(tree: list, maybe_ancestor: int, idx: int) -> bool:
    while idx >= 0:
        if idx == maybe_ancestor:
            return True
        idx = tree[idx].parent
    return False


def _retie(tree: list, idx: int, new_parent: int,
           params: PlannerParams) -> None:
    """Reparent node idx and recompute its subtree's bookkeeping."""
    node = tree[idx]
    if node.parent >= 0:
        tree[node.parent].children.remove(idx)
    node.parent = new_parent
    tree[new_parent].children.append(idx)
    stack = [idx]
    while stack:
        i = stack.pop()
        n = tree[i]
        par = tree[n.parent]
        seg = math.dist(par.position, n.position)
        n.d = par.d + seg
        if n.obs_sigma is not None:
            n.d_odo = 0.0
            n.sigma_l = n.obs_sigma
        else:
            n.d_odo = par.d_odo + seg
            n.sigma_l = par.sigma_l
        n.cost = _cost_of(n.d, n.d_odo, n.sigma_l, params)
        stack.extend(n.children)


def plan_rrt_star_uncertainty(start_state, goal, space: PlanSpace,
                              landmark_visibility, params: PlannerParams,
                              rng: np.random.Generator | None = None) -> Path:
    """RRT* minimizing d + d_odo + 2*sigma_l/(c*Q~).

    start_state is (position, current d_odo, current sigma_l): path
    length starts at zero but the agent's accumulated referenceless
    distance and last landmark uncertainty carry in.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    start, d_odo0, sigma_l0 = start_state
    start = tuple(start)
    goal = tuple(goal)
    root = PlanNode(start, -1, 0.0, float(d_odo0), float(sigma_l0))
    root.cost = _cost_of(root.d, root.d_odo, root.sigma_l, params)
    vis0 = landmark_visibility(start)
    root.obs_sigma = float(vis0[-1]) if len(vis0) > 0 else None
    if math.dist(start, goal) <= params.goal_tolerance:
        return Path(nodes=[root], cost=root.cost)
    tree = [root]
    positions = np.array([start])
    best_goal = -1
    for _ in range(params.max_iterations):
        target = goal if rng.random() < params.goal_bias \
            else space.sample(rng)
        ni = _nearest(positions, target)
        new_pos = _steer(tree[ni].position, target, params.step_length)
        if not space.segment_free(tree[ni].position, new_pos):
            continue
        delta = positions - np.asarray(new_pos)[None, :]
        dists = np.sqrt(np.einsum("ij,ij->i", delta, delta))
        near = np.nonzero(dists <= params.rewire_radius)[0]
        # choose the parent minimizing the child's cost
        best = None
        best_parent = ni
        for j in near:
            if not space.segment_free(tree[j].position, new_pos):
                continue
            cand = node_cost(tree[j], new_pos, landmark_visibility, params)
            if best is None or cand.cost < best.cost:
                best = cand
                best_parent = int(j)
        if best is None:
            cand = node_cost(tree[ni], new_pos, landmark_visibility, params)
            best, best_parent = cand, ni
        best.parent = best_parent
        tree.append(best)
        tree[best_parent].children.append(len(tree) - 1)
        positions = np.vstack([positions, new_pos])
        new_idx = len(tree) - 1
        # rewire neighbors through the new node when that lowers cost
        for j in near:
            if j == best_parent:
                continue
            if _is_ancestor(tree, int(j), new_idx):
                continue
            if not space.segment_free(new_pos, tree[j].position):
                continue
            seg = math.dist(new_pos, tree[j].position)
            d = best.d + seg
            if tree[j].obs_sigma is not None:
                nd_odo, nsig = 0.0, tree[j].obs_sigma
            else:
                nd_odo, nsig = best.d_odo + seg, best.sigma_l
            if _cost_of(d, nd_odo, nsig, params) < tree[j].cost - _EPS:
                _retie(tree, int(j), new_idx, params)
        if math.dist(new_pos, goal) <= params.goal_tolerance:
            if best_goal < 0 or best.cost < tree[best_goal].cost:
                best_goal = new_idx
    if best_goal < 0:
        raise NoPathFound(f"RRT*: no path after "
                          f"{params.max_iterations} iterations")
    return _extract(tree, best_goal, tree[best_goal].cost)


@dataclass
class Objective:
    kind: str  # "CF" or "UF"
    target: tuple
    cluster: object = None
    cost: float = math.inf
    path: Path | None = None


def select_objective(frontiers, agent_pos, mode: str, probe) -> \
        Objective | None:
    """Minimum-cost reachable cluster of the requested kind, or None.

    probe(target, stream_seed) plans toward a cluster centroid and
    returns a Path or None; stream seeds derive from the cluster index
    so concurrent probes stay deterministic.
    """
    best = None
    for idx, cluster in enumerate(frontiers.clusters(mode)):
        path = probe(cluster.centroid, idx)
        if path is None:
            continue
        if best is None or path.cost < best.cost:
            best = Objective(kind=mode, target=cluster.centroid,
                             cluster=cluster, cost=path.cost, path=path)
    return best


def stopping_criterion(frontiers, agent_pos, mode: str, probe) -> bool:
    """True when no frontier of the active kind is reachable."""
    return select_objective(frontiers, agent_pos, mode, probe) is None
