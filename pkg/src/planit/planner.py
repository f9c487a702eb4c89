"""Cost-map rasterization and cost-aware RRT planning.

The learned mixture cost is rasterized onto a grid (the planning affordance
map); the planner grows a rewired RRT whose edge weight couples geometric
length with the mean map cost along the edge, so large cost_weight values
trade extra distance for staying out of hot regions.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .affordance import ModelParameters, marginal_log_costs
from .env import Environment, Trajectory
from .errors import DiversityUnmet, NoPathFound, ResolutionTooCoarse

GRID_MAGIC = b"PAMGRID1"
OBSTACLE_INFLATION = 0.2  # meters; robot radius proxy applied to the mask
REWIRE_RADIUS_FACTOR = 2.0


@dataclass
class CostMap:
    """Rasterized marginal waypoint cost with an obstacle mask.

    values[row, col] is the cost at the center of the cell whose lower-left
    corner sits at origin + (col, row) * resolution.
    """

    origin: np.ndarray
    resolution: float
    values: np.ndarray
    obstacle_mask: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(2)
        self.values = np.asarray(self.values, dtype=float)
        self.obstacle_mask = np.asarray(self.obstacle_mask, dtype=bool)
        if self.values.shape != self.obstacle_mask.shape:
            raise ValueError("values and obstacle_mask shapes differ")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def cell_centers(self):
        xs = self.origin[0] + (np.arange(self.width) + 0.5) * self.resolution
        ys = self.origin[1] + (np.arange(self.height) + 0.5) * self.resolution
        return xs, ys

    def cell_of(self, points) -> tuple:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cols = np.floor((pts[:, 0] - self.origin[0]) / self.resolution).astype(int)
        rows = np.floor((pts[:, 1] - self.origin[1]) / self.resolution).astype(int)
        return rows, cols

    def inside(self, points) -> np.ndarray:
        rows, cols = self.cell_of(points)
        return (rows >= 0) & (rows < self.height) & (cols >= 0) & (cols < self.width)

    def value_at(self, points) -> np.ndarray:
        rows, cols = self.cell_of(points)
        rows = np.clip(rows, 0, self.height - 1)
        cols = np.clip(cols, 0, self.width - 1)
        return self.values[rows, cols]

    def blocked(self, points) -> np.ndarray:
        """True where a point is outside the grid or on a masked cell."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rows, cols = self.cell_of(pts)
        out = ~self.inside(pts)
        rows = np.clip(rows, 0, self.height - 1)
        cols = np.clip(cols, 0, self.width - 1)
        return out | self.obstacle_mask[rows, cols]

    # --- binary grid format: magic, resolution, origin, dims, f64 row-major

    def to_bytes(self) -> bytes:
        header = GRID_MAGIC + struct.pack(
            "<dddII",
            float(self.resolution),
            float(self.origin[0]),
            float(self.origin[1]),
            self.width,
            self.height,
        )
        return header + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CostMap":
        if blob[:8] != GRID_MAGIC:
            raise ValueError("not a cost-map grid file")
        res, ox, oy, width, height = struct.unpack_from("<dddII", blob, 8)
        offset = 8 + struct.calcsize("<dddII")
        values = np.frombuffer(blob, dtype="<f8", count=width * height, offset=offset)
        values = values.reshape(height, width).copy()
        return cls(
            origin=(ox, oy),
            resolution=res,
            values=values,
            obstacle_mask=np.zeros((height, width), dtype=bool),
        )

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "CostMap":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _point_in_convex(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Vectorized containment test for a convex polygon (either winding)."""
    x, y = poly[:, 0], poly[:, 1]
    area2 = float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    orient = 1.0 if area2 >= 0 else -1.0
    inside = np.ones(len(points), dtype=bool)
    for i in range(len(poly)):
        a = poly[i]
        b = poly[(i + 1) % len(poly)]
        cross = (b[0] - a[0]) * (points[:, 1] - a[1]) - (b[1] - a[1]) * (points[:, 0] - a[0])
        inside &= orient * cross >= -1e-12
    return inside


def _segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)


def obstacle_mask_for(env: Environment, origin, resolution, width, height) -> np.ndarray:
    """Cells whose centers fall within OBSTACLE_INFLATION of an obstacle."""
    mask = np.zeros((height, width), dtype=bool)
    if not env.obstacles:
        return mask
    xs = origin[0] + (np.arange(width) + 0.5) * resolution
    ys = origin[1] + (np.arange(height) + 0.5) * resolution
    grid = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    hit = np.zeros(len(grid), dtype=bool)
    for poly in env.obstacles:
        hit |= _point_in_convex(grid, poly)
        for i in range(len(poly)):
            a, b = poly[i], poly[(i + 1) % len(poly)]
            hit |= _segment_distance(grid, a, b) <= OBSTACLE_INFLATION
    return hit.reshape(height, width)


def rasterize(env: Environment, params: ModelParameters, resolution: float = 0.05) -> CostMap:
    """Evaluate the mixture cost at every cell center of the environment grid."""
    width = math.ceil(env.bounds.width / resolution)
    height = math.ceil(env.bounds.height / resolution)
    if min(width, height) < 10:
        raise ResolutionTooCoarse(
            f"{resolution} m cells give a {width}x{height} grid; need >= 10 per side"
        )
    origin = np.array([env.bounds.xmin, env.bounds.ymin])
    xs = origin[0] + (np.arange(width) + 0.5) * resolution
    ys = origin[1] + (np.arange(height) + 0.5) * resolution
    centers = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    values = np.exp(marginal_log_costs(centers, env, params)).reshape(height, width)
    mask = obstacle_mask_for(env, origin, resolution, width, height)
    return CostMap(origin=origin, resolution=resolution, values=values, obstacle_mask=mask)


@dataclass
class PlanRequest:
    start: tuple
    goal: tuple
    step_size: float = 0.15
    max_samples: int = 20_000
    goal_tolerance: float = 0.10
    cost_weight: float = 5.0
    seed: int = 0

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float).reshape(2)
        self.goal = np.asarray(self.goal, dtype=float).reshape(2)
        if self.step_size <= 0 or self.max_samples < 1 or self.goal_tolerance <= 0:
            raise ValueError("step_size, max_samples and goal_tolerance must be positive")


def _edge_points(a: np.ndarray, b: np.ndarray, resolution: float) -> np.ndarray:
    length = float(np.linalg.norm(b - a))
    n = max(2, int(math.ceil(length / resolution)) + 1)
    ts = np.linspace(0.0, 1.0, n)
    return a + ts[:, None] * (b - a)


def edge_weight(cost_map: CostMap, a, b, cost_weight: float) -> float:
    """segment_length * (1 + cost_weight * mean cell cost along the segment)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.linalg.norm(b - a))
    if length == 0.0:
        return 0.0
    if cost_weight == 0.0:
        return length
    mean_cost = float(cost_map.value_at(_edge_points(a, b, cost_map.resolution)).mean())
    return length * (1.0 + cost_weight * mean_cost)


def path_integrated_cost(cost_map: CostMap, waypoints) -> float:
    """Line integral of the map cost along a waypoint path."""
    pts = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        length = float(np.linalg.norm(b - a))
        if length == 0.0:
            continue
        total += length * float(cost_map.value_at(_edge_points(a, b, cost_map.resolution)).mean())
    return total


def _edge_free(cost_map: CostMap, a: np.ndarray, b: np.ndarray) -> bool:
    pts = _edge_points(a, b, cost_map.resolution / 2.0)
    return not bool(cost_map.blocked(pts).any())


def _make_edge_checker(cost_map: CostMap):
    # endpoints are kept inside bounds by construction, so with an empty
    # obstacle mask every edge is free
    if not cost_map.obstacle_mask.any():
        return lambda a, b: True
    return lambda a, b: _edge_free(cost_map, a, b)


def _trajectory_from(points: list, traj_id: str, env_id: str) -> Trajectory:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 1:
        times = np.array([0.0])
    else:
        steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        times = np.concatenate([[0.0], np.cumsum(np.maximum(steps, 1e-9))])
    return Trajectory(traj_id, env_id, pts, times)


def plan(env: Environment, cost_map: CostMap, req: PlanRequest) -> Trajectory:
    """Grow a rewired RRT and return the lowest-weight start->goal path found
    after max_samples samples. Deterministic for a given seed."""
    for name, point in (("start", req.start), ("goal", req.goal)):
        if not env.bounds.contains(point[None, :])[0]:
            raise ValueError(f"{name} outside environment bounds")
        if bool(cost_map.blocked(point[None, :])[0]):
            raise ValueError(f"{name} lies inside an obstacle")
    if float(np.linalg.norm(req.goal - req.start)) <= 1e-12:
        return _trajectory_from([req.start], f"plan-{req.seed}", env.id)

    rng = np.random.default_rng(req.seed)
    edge_free = _make_edge_checker(cost_map)
    cap = req.max_samples + 1
    points = np.empty((cap, 2))
    parents = np.full(cap, -1, dtype=int)
    costs = np.zeros(cap)
    points[0] = req.start
    count = 1
    goal_nodes = []
    rewire_radius = REWIRE_RADIUS_FACTOR * req.step_size
    lo = np.array([env.bounds.xmin, env.bounds.ymin])
    hi = np.array([env.bounds.xmax, env.bounds.ymax])

    for _ in range(req.max_samples):
        target = req.goal if rng.random() < 0.05 else rng.uniform(lo, hi)
        diffs = points[:count] - target
        nearest = int(np.argmin(np.einsum("ij,ij->i", diffs, diffs)))
        direction = target - points[nearest]
        dist = float(np.linalg.norm(direction))
        if dist < 1e-12:
            continue
        new_pt = points[nearest] + direction * min(1.0, req.step_size / dist)
        if bool(cost_map.blocked(new_pt[None, :])[0]):
            continue

        rel = points[:count] - new_pt
        near = np.flatnonzero(np.einsum("ij,ij->i", rel, rel) <= rewire_radius**2)
        best_parent, best_cost = -1, np.inf
        for idx in near:
            if not edge_free(points[idx], new_pt):
                continue
            through = costs[idx] + edge_weight(cost_map, points[idx], new_pt, req.cost_weight)
            if through < best_cost:
                best_parent, best_cost = int(idx), through
        if best_parent < 0:
            if not edge_free(points[nearest], new_pt):
                continue
            best_parent = nearest
            best_cost = costs[nearest] + edge_weight(
                cost_map, points[nearest], new_pt, req.cost_weight
            )

        node = count
        points[node] = new_pt
        parents[node] = best_parent
        costs[node] = best_cost
        count += 1

        for idx in near:
            if idx == best_parent:
                continue
            through = best_cost + edge_weight(cost_map, new_pt, points[idx], req.cost_weight)
            if through < costs[idx] and edge_free(new_pt, points[idx]):
                parents[idx] = node
                costs[idx] = through

        if float(np.linalg.norm(new_pt - req.goal)) <= req.goal_tolerance:
            goal_nodes.append(node)

    if not goal_nodes:
        raise NoPathFound(
            f"no path within {req.goal_tolerance} m of the goal after "
            f"{req.max_samples} samples"
        )

    def exact_path_weight(node: int) -> float:
        total = 0.0
        while parents[node] >= 0:
            total += edge_weight(
                cost_map, points[parents[node]], points[node], req.cost_weight
            )
            node = parents[node]
        return total

    best_node = min(goal_nodes, key=exact_path_weight)
    path = []
    node = best_node
    while node >= 0:
        path.append(points[node])
        node = parents[node]
    path.reverse()
    return _trajectory_from(path, f"plan-{req.seed}", env.id)


def discrete_frechet(a, b) -> float:
    """Discrete Frechet distance between two waypoint sequences."""
    p = np.asarray(a, dtype=float).reshape(-1, 2)
    q = np.asarray(b, dtype=float).reshape(-1, 2)
    dists = np.linalg.norm(p[:, None, :] - q[None, :, :], axis=2)
    n, m = dists.shape
    table = np.empty((n, m))
    table[0, 0] = dists[0, 0]
    for j in range(1, m):
        table[0, j] = max(table[0, j - 1], dists[0, j])
    for i in range(1, n):
        table[i, 0] = max(table[i - 1, 0], dists[i, 0])
        for j in range(1, m):
            reach = min(table[i - 1, j], table[i - 1, j - 1], table[i, j - 1])
            table[i, j] = max(reach, dists[i, j])
    return float(table[-1, -1])


def sample_diverse(
    env: Environment,
    cost_map: CostMap,
    req: PlanRequest,
    count: int,
    separation: float = 0.5,
    max_attempts_per_path: int = 20,
) -> list:
    """Plan up to `count` mutually distinct trajectories by rejection over
    seeds; pairwise discrete Frechet distance >= separation when feasible."""
    if count < 1:
        raise ValueError("count must be >= 1")
    accepted = []
    attempts = 0
    seed = req.seed
    budget = count * max_attempts_per_path
    while len(accepted) < count and attempts < budget:
        attempt_req = PlanRequest(
            start=tuple(req.start),
            goal=tuple(req.goal),
            step_size=req.step_size,
            max_samples=req.max_samples,
            goal_tolerance=req.goal_tolerance,
            cost_weight=req.cost_weight,
            seed=seed,
        )
        seed += 1
        attempts += 1
        try:
            candidate = plan(env, cost_map, attempt_req)
        except NoPathFound:
            continue
        if all(
            discrete_frechet(candidate.waypoints, t.waypoints) >= separation
            for t in accepted
        ):
            accepted.append(candidate)
    if len(accepted) < count:
        warnings.warn(
            f"found {len(accepted)} of {count} trajectories with pairwise "
            f"separation >= {separation} m",
            DiversityUnmet,
            stacklevel=2,
        )
    return accepted
