"""Baseline cost functions, ranking metrics, ground-truth scoring, and the
synthetic annotator that stands in for crowd feedback at desk scale.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .affordance import ModelParameters, log_trajectory_cost, marginal_log_costs
from .env import ActivityInstance, Bounds, Environment, LabeledSegment, SceneObject, Trajectory
from .errors import NoComparablePairs
from .planner import rasterize

BASELINES = ("chance", "mcp", "mcc", "hic", "hicmcc")

# Hand-designed interference regions for the interference-count baseline:
# distant activities own the human->object corridor, close-proximity ones a
# disc around the human.
HIC_CORRIDOR_HALF_WIDTH = 0.4
HIC_DISC_RADIUS = 0.6


@dataclass(frozen=True)
class GroundTruthScore:
    trajectory_id: str
    score: int

    def __post_init__(self):
        if self.score not in (1, 3, 5):
            raise ValueError("score must be one of 1, 3, 5")


def ground_truth_scores(labels: Iterable[LabeledSegment]) -> Dict[str, int]:
    """Minimum labeled score per trajectory: one bad segment makes the whole
    trajectory bad."""
    scores: Dict[str, int] = {}
    for seg in labels:
        cur = scores.get(seg.trajectory_id)
        scores[seg.trajectory_id] = seg.score if cur is None else min(cur, seg.score)
    return scores


def _reference_points(env: Environment) -> np.ndarray:
    """Scene objects; the clearance baselines measure distance to objects,
    not to humans. Falls back to activity objects when the object list is
    empty."""
    pts = [obj.position for obj in env.objects]
    if not pts:
        pts = [act.object_position for act in env.activities]
    if not pts:
        raise ValueError(f"environment {env.id} has no objects to measure clearance against")
    return np.unique(np.asarray(pts, dtype=float), axis=0)


def _nearest_distances(traj: Trajectory, env: Environment) -> np.ndarray:
    refs = _reference_points(env)
    diffs = traj.waypoints[:, None, :] - refs[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diffs, diffs)).min(axis=1)


def _chance_cost(traj: Trajectory, seed: int) -> float:
    digest = hashlib.sha256(f"{seed}|{traj.id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _mcp_cost(traj: Trajectory, env: Environment) -> float:
    dists = _nearest_distances(traj, env)
    return -math.sqrt(float(np.mean(dists**2)))


def _mcc_cost(traj: Trajectory, env: Environment) -> float:
    dists = _nearest_distances(traj, env)
    vals = np.where(dists < 1.0, np.exp(-dists), 0.0)
    return float(vals.mean())


def _interference_mask(traj: Trajectory, act: ActivityInstance) -> np.ndarray:
    rel = traj.waypoints - act.human_position
    if act.proximity_class == "distant":
        axis = (act.object_position - act.human_position) / act.separation
        along = rel @ axis
        perp = rel @ np.array([-axis[1], axis[0]])
        return (
            (along >= 0.0)
            & (along <= act.separation)
            & (np.abs(perp) <= HIC_CORRIDOR_HALF_WIDTH)
        )
    return np.linalg.norm(rel, axis=1) <= HIC_DISC_RADIUS


def _count_runs(mask: np.ndarray) -> int:
    padded = np.concatenate([[False], mask])
    return int(np.sum(~padded[:-1] & mask))


def _hic_cost(traj: Trajectory, env: Environment) -> float:
    """Number of maximal interference runs, summed over activities."""
    return float(sum(_count_runs(_interference_mask(traj, act)) for act in env.activities))


def baseline_cost(traj: Trajectory, env: Environment, kind: str, seed: int = 0) -> float:
    if kind == "chance":
        return _chance_cost(traj, seed)
    if kind == "mcp":
        return _mcp_cost(traj, env)
    if kind == "mcc":
        return _mcc_cost(traj, env)
    if kind == "hic":
        return _hic_cost(traj, env)
    if kind == "hicmcc":
        return _mcc_cost(traj, env) * _hic_cost(traj, env)
    raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINES}")


def misclassification_rate(
    costs: Mapping[str, float], truths: Mapping[str, int]
) -> float:
    """For each trajectory, the fraction of strictly better-scored trajectories
    that received a strictly higher cost, averaged over trajectories with a
    non-empty comparison set."""
    ids = sorted(costs)
    score = np.array([truths[i] for i in ids])
    cost = np.array([costs[i] for i in ids])
    fractions = []
    for i in range(len(ids)):
        better = score > score[i]
        if not better.any():
            continue
        fractions.append(float(np.mean(cost[better] > cost[i])))
    if not fractions:
        raise NoComparablePairs("need at least two trajectories with distinct scores")
    return float(np.mean(fractions))


@dataclass(frozen=True)
class RankedList:
    """Trajectory ids ordered by ascending cost; ties broken by id."""

    items: tuple  # of (trajectory_id, cost)

    @property
    def ids(self) -> tuple:
        return tuple(i for i, _ in self.items)


def rank_trajectories(costs: Mapping[str, float]) -> RankedList:
    ordered = sorted(costs.items(), key=lambda kv: (kv[1], kv[0]))
    return RankedList(tuple(ordered))


def ndcg(ranked: RankedList, truths: Mapping[str, int], k: Optional[int] = None) -> float:
    """Normalized discounted cumulative gain with raw {1,3,5} gains and a
    log2(position+1) discount."""
    if not ranked.items:
        raise ValueError("ranked list is empty")
    gains = np.array([truths[i] for i in ranked.ids], dtype=float)
    ideal = np.sort(gains)[::-1]
    if k is not None:
        gains = gains[:k]
        ideal = ideal[:k]
    discounts = 1.0 / np.log2(np.arange(2, len(gains) + 2))
    denom = float(ideal @ discounts)
    return float(gains @ discounts) / denom


# --- synthetic environments, trajectories and annotations -------------------


def default_true_model() -> ModelParameters:
    """A plausible hand-built registry for all six activity types, used as the
    generating model for synthetic feedback."""
    from .affordance import ActivityModel
    from .distributions import BetaParams, GaussianParams, VonMisesParams

    registry = {
        "walking": ActivityModel(
            "walking",
            "distant",
            VonMisesParams(0.0, 2.0),
            angular_object=VonMisesParams(0.0, 1.0),
            edge=BetaParams(1.8, 1.4),
            prior=1.0 / 6,
        ),
        "watching": ActivityModel(
            "watching",
            "distant",
            VonMisesParams(0.0, 4.5),
            angular_object=VonMisesParams(0.0, 2.0),
            edge=BetaParams(1.6, 3.2),
            prior=1.0 / 6,
        ),
        "interacting": ActivityModel(
            "interacting",
            "distant",
            VonMisesParams(0.0, 5.0),
            angular_object=VonMisesParams(0.0, 5.0),
            edge=BetaParams(2.5, 2.5),
            prior=1.0 / 6,
        ),
        "reaching": ActivityModel(
            "reaching",
            "close_proximity",
            VonMisesParams(0.0, 3.0),
            distance=GaussianParams(0.5, 0.05),
            prior=1.0 / 6,
        ),
        "sitting": ActivityModel(
            "sitting",
            "close_proximity",
            VonMisesParams(math.pi, 1.5),
            distance=GaussianParams(0.55, 0.06),
            prior=1.0 / 6,
        ),
        "working": ActivityModel(
            "working",
            "close_proximity",
            VonMisesParams(math.pi, 2.5),
            distance=GaussianParams(0.6, 0.05),
            prior=1.0 / 6,
        ),
    }
    return ModelParameters(registry, trained_at="hand-built")


_DISTANT_TYPES = ("walking", "watching", "interacting")
_CLOSE_TYPES = ("reaching", "sitting", "working")


def make_environment(ident: str, rng: np.random.Generator) -> Environment:
    """A random room with 2-3 activities and a few clutter objects."""
    side = rng.uniform(11.0, 14.0)
    bounds = Bounds(0.0, 0.0, side, side)
    n_act = int(rng.integers(2, 4))
    activities = []
    objects = []
    anchors: List[np.ndarray] = []

    def far_enough(pos, margin):
        return all(np.linalg.norm(pos - a) >= margin for a in anchors)

    for idx in range(n_act):
        distant = rng.random() < 0.6
        name = rng.choice(_DISTANT_TYPES if distant else _CLOSE_TYPES)
        for _ in range(60):
            human = rng.uniform(3.5, side - 3.5, 2)
            if far_enough(human, 4.0):
                break
        ang = rng.uniform(-math.pi, math.pi)
        axis = np.array([math.cos(ang), math.sin(ang)])
        if distant:
            sep = rng.uniform(2.4, 3.4)
            obj = human + sep * axis
            obj = np.clip(obj, 0.6, side - 0.6)
            if np.linalg.norm(obj - human) < 1.0:
                obj = human + np.array([1.2, 0.0])
            facing = (obj - human) / np.linalg.norm(obj - human)
        else:
            facing = axis
            obj = human + 0.4 * facing
        activities.append(ActivityInstance(str(name), human, facing, obj))
        objects.append(SceneObject(f"{ident}-obj{idx}", obj))
        anchors.extend([human, obj])

    for extra in range(int(rng.integers(4, 9))):
        for _ in range(40):
            pos = rng.uniform(0.8, side - 0.8, 2)
            if far_enough(pos, 2.0):
                break
        objects.append(SceneObject(f"{ident}-clutter{extra}", pos))

    return Environment(ident, bounds, activities=tuple(activities), objects=tuple(objects))


@dataclass
class SynthConfig:
    # Cost maps are heavy-tailed (hot zones cover a few percent of the room),
    # so the bad threshold sits high in the cell distribution. Labeled
    # intervals follow threshold crossings, like an annotator painting the
    # stretch where the robot misbehaves, and are split at max_interval.
    trajectories_per_env: int = 14
    duration: float = 6.0
    dt: float = 0.1
    max_interval: float = 2.0
    quantile_bad: float = 0.93
    quantile_good: float = 0.5
    label_noise: float = 0.1
    map_resolution: float = 0.25

    def __post_init__(self):
        if not (0.0 <= self.quantile_good <= self.quantile_bad <= 1.0):
            raise ValueError("need 0 <= quantile_good <= quantile_bad <= 1")
        if not (0.0 <= self.label_noise <= 1.0):
            raise ValueError("label_noise must lie in [0, 1]")
        if self.max_interval <= self.dt:
            raise ValueError("max_interval must exceed dt")


def _random_trajectory(env: Environment, traj_id: str, config, rng) -> Trajectory:
    """A smoothed random crossing of the room at roughly 1.5 m/s."""
    b = env.bounds
    margin = 0.4
    sides = rng.permutation(4)[:2]

    def point_on(side):
        t = rng.uniform(0.15, 0.85)
        if side == 0:
            return np.array([b.xmin + margin, b.ymin + t * b.height])
        if side == 1:
            return np.array([b.xmax - margin, b.ymin + t * b.height])
        if side == 2:
            return np.array([b.xmin + t * b.width, b.ymin + margin])
        return np.array([b.xmin + t * b.width, b.ymax - margin])

    start, end = point_on(sides[0]), point_on(sides[1])
    mid = 0.5 * (start + end) + rng.uniform(-2.2, 2.2, 2)
    mid = np.clip(mid, margin, [b.width - margin, b.height - margin])
    n = int(config.duration / config.dt) + 1
    ts = np.linspace(0.0, 1.0, n)
    # quadratic Bezier through the jittered midpoint
    pts = (
        (1 - ts)[:, None] ** 2 * start
        + 2 * (ts * (1 - ts))[:, None] * mid
        + ts[:, None] ** 2 * end
    )
    pts += rng.normal(0.0, 0.03, pts.shape)
    pts = np.clip(pts, margin, [b.width - margin, b.height - margin])
    times = np.arange(n) * config.dt
    return Trajectory(traj_id, env.id, pts, times)


def _randomized_map_quantiles(values, sorted_values, rng) -> np.ndarray:
    """Empirical CDF positions with uniform tie randomization, so flat maps
    still yield calibrated label fractions."""
    n = len(sorted_values)
    less = np.searchsorted(sorted_values, values, side="left")
    equal = np.searchsorted(sorted_values, values, side="right") - less
    return (less + rng.random(len(values)) * equal) / n


def _class_runs(classes: np.ndarray):
    """Maximal runs of identical waypoint classes as (start, end, class)."""
    runs = []
    start = 0
    for i in range(1, len(classes) + 1):
        if i == len(classes) or classes[i] != classes[start]:
            runs.append((start, i - 1, classes[start]))
            start = i
    return runs


def synthesize_feedback(
    env: Environment,
    true_params: ModelParameters,
    config: SynthConfig,
    rng: np.random.Generator,
) -> Tuple[List[Trajectory], List[LabeledSegment]]:
    """Generate random trajectories and label them from the true cost map.

    Each waypoint is placed in the map's value distribution: above
    quantile_bad is bad, below quantile_good good, else neutral. Maximal
    same-class runs become labeled intervals (split at max_interval), so a
    bad interval brackets an actual excursion into a high-cost region the
    way an annotator would paint it. Labels then flip one tier toward a
    neighboring class with probability label_noise.
    """
    grid = rasterize(env, true_params, resolution=config.map_resolution)
    sorted_values = np.sort(grid.values.ravel())

    trajectories = []
    labels = []
    for t_idx in range(config.trajectories_per_env):
        traj = _random_trajectory(env, f"{env.id}-t{t_idx:02d}", config, rng)
        trajectories.append(traj)
        costs = np.exp(marginal_log_costs(traj.waypoints, env, true_params))
        s = _randomized_map_quantiles(costs, sorted_values, rng)
        classes = np.where(s >= config.quantile_bad, 2, np.where(s < config.quantile_good, 0, 1))
        names = {0: "good", 1: "neutral", 2: "bad"}
        for i0, i1, cls in _class_runs(classes):
            t0 = float(traj.timestamps[i0])
            t1 = float(traj.timestamps[i1]) + config.dt
            n_chunks = max(1, math.ceil((t1 - t0) / config.max_interval))
            edges = np.linspace(t0, t1, n_chunks + 1)
            for a, b in zip(edges[:-1], edges[1:]):
                label = names[int(cls)]
                if rng.random() < config.label_noise:
                    if label == "bad":
                        label = "neutral"
                    elif label == "good":
                        label = "neutral"
                    else:
                        label = "bad" if rng.random() < 0.5 else "good"
                labels.append(
                    LabeledSegment(
                        trajectory_id=traj.id,
                        start_time=float(a),
                        end_time=float(b),
                        label=label,
                        annotator_id=f"synth-{int(rng.integers(0, 5))}",
                    )
                )
    return trajectories, labels


# --- the evaluation driver ---------------------------------------------------


@dataclass
class EvalRow:
    algorithm: str
    misclassification: float
    stderr: float
    ndcg_at: Dict[int, float] = field(default_factory=dict)


def _algorithm_costs(
    algorithm: str,
    env: Environment,
    trajs: Sequence[Trajectory],
    model: Optional[ModelParameters],
    seed: int,
) -> Dict[str, float]:
    if algorithm == "learned":
        if model is None:
            raise ValueError("learned algorithm needs a model")
        return {t.id: log_trajectory_cost(t, env, model) for t in trajs}
    return {t.id: baseline_cost(t, env, algorithm, seed=seed) for t in trajs}


def evaluate_algorithms(
    envs: Sequence[Environment],
    trajectories: Sequence[Trajectory],
    labels: Sequence[LabeledSegment],
    model: Optional[ModelParameters] = None,
    algorithms: Optional[Sequence[str]] = None,
    ks: Sequence[int] = (1, 3, 5, 10),
    seed: int = 0,
    chance_draws: int = 10,
) -> List[EvalRow]:
    """Per-environment metrics averaged across environments; the standard
    error is over environments. Trajectories are only compared within their
    own environment. The chance baseline is reported as its Monte-Carlo
    expectation over `chance_draws` seeded cost draws."""
    if algorithms is None:
        algorithms = list(BASELINES) + (["learned"] if model is not None else [])
    truths = ground_truth_scores(labels)
    by_env: Dict[str, List[Trajectory]] = {}
    for traj in trajectories:
        if traj.id in truths:
            by_env.setdefault(traj.environment_id, []).append(traj)
    env_by_id = {e.id: e for e in envs}

    rows = []
    for algorithm in algorithms:
        draws = range(chance_draws) if algorithm == "chance" else range(1)
        rates = []
        ndcgs: Dict[int, list] = {k: [] for k in ks}
        for env_id, trajs in sorted(by_env.items()):
            env = env_by_id[env_id]
            env_truths = {t.id: truths[t.id] for t in trajs}
            env_rates = []
            env_ndcgs: Dict[int, list] = {k: [] for k in ks}
            for draw in draws:
                costs = _algorithm_costs(algorithm, env, trajs, model, seed + draw)
                try:
                    env_rates.append(misclassification_rate(costs, env_truths))
                except NoComparablePairs:
                    continue
                ranked = rank_trajectories(costs)
                for k in ks:
                    env_ndcgs[k].append(ndcg(ranked, env_truths, k=k))
            if env_rates:
                rates.append(float(np.mean(env_rates)))
                for k in ks:
                    ndcgs[k].append(float(np.mean(env_ndcgs[k])))
        if not rates:
            raise NoComparablePairs("no environment had two distinct scores")
        arr = np.array(rates)
        stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        rows.append(
            EvalRow(
                algorithm=algorithm,
                misclassification=float(arr.mean()),
                stderr=stderr,
                ndcg_at={k: float(np.mean(v)) for k, v in ndcgs.items() if v},
            )
        )
    return rows


def rows_to_csv(rows: Sequence[EvalRow], ks: Sequence[int] = (1, 3, 5, 10)) -> str:
    header = ["algorithm", "misclassification", "stderr"] + [f"ndcg@{k}" for k in ks]
    lines = [",".join(header)]
    for row in rows:
        cells = [row.algorithm, f"{row.misclassification:.6f}", f"{row.stderr:.6f}"]
        cells += [f"{row.ndcg_at.get(k, float('nan')):.6f}" for k in ks]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
