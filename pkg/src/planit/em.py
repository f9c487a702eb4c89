"""Expectation-Maximization over the latent activity assignment.

Training data are waypoints sampled from bad-labeled trajectory segments.
Each waypoint's activity is unobserved; the E-step infers a posterior over
the activity instances present in its environment and the M-step refits the
per-activity-type kernels from the posterior-weighted features. One model is
learned per activity *type*, shared across instances and environments, which
is what lets the result transfer to unseen environments.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .affordance import ActivityModel, ModelParameters, kernel_log_values
from .distributions import (
    BetaParams,
    GaussianParams,
    SIGMA_MIN,
    VonMisesParams,
    fit_beta_weighted,
    fit_gaussian_weighted,
    fit_vonmises_weighted,
)
from .env import Environment, LabeledSegment, Trajectory, frame_features
from .errors import (
    AllZeroDensity,
    DegenerateFitWarning,
    EmptyTrainingSet,
    MomentMismatch,
    NoActivities,
    ZeroVariance,
)

WAYPOINT_SPACING = 0.25  # seconds between sampled waypoints within a segment


@dataclass(frozen=True)
class SampledSegment:
    """Waypoints sampled from one bad-labeled interval of a trajectory."""

    environment_id: str
    trajectory_id: str
    waypoints: np.ndarray
    interval: tuple
    provenance: str = ""

    def __post_init__(self):
        wps = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
        if len(wps) < 1:
            raise ValueError("sampled segment needs at least one waypoint")
        wps.setflags(write=False)
        object.__setattr__(self, "waypoints", wps)


@dataclass(frozen=True)
class TrainingSet:
    environments: tuple
    segments: tuple

    def __post_init__(self):
        object.__setattr__(self, "environments", tuple(self.environments))
        object.__setattr__(self, "segments", tuple(self.segments))
        by_id = {env.id: env for env in self.environments}
        object.__setattr__(self, "_by_id", by_id)
        for seg in self.segments:
            env = by_id.get(seg.environment_id)
            if env is None:
                raise ValueError(f"segment references unknown environment {seg.environment_id}")
            if not env.activities:
                raise NoActivities(
                    f"training environment {env.id} has no activities"
                )

    def environment(self, env_id: str) -> Environment:
        return self._by_id[env_id]

    @property
    def n_waypoints(self) -> int:
        return sum(len(seg.waypoints) for seg in self.segments)

    @property
    def activity_types(self) -> tuple:
        seen = []
        for env in self.environments:
            if any(seg.environment_id == env.id for seg in self.segments):
                for act in env.activities:
                    if act.activity_type not in seen:
                        seen.append(act.activity_type)
        return tuple(sorted(seen))


def sample_segment_waypoints(
    traj: Trajectory, segment: LabeledSegment, spacing: float = WAYPOINT_SPACING
) -> np.ndarray:
    """Midpoints of equal time slices of the labeled interval, interpolated
    onto the trajectory. k = ceil(duration / spacing)."""
    duration = segment.end_time - segment.start_time
    k = max(1, math.ceil(duration / spacing))
    times = segment.start_time + (np.arange(k) + 0.5) * duration / k
    return traj.position_at(times)


def build_training_set(
    environments: Sequence[Environment],
    trajectories: Sequence[Trajectory],
    labels: Sequence[LabeledSegment],
    spacing: float = WAYPOINT_SPACING,
) -> TrainingSet:
    """Assemble the bad-labeled waypoint pool; good/neutral labels are kept
    out of the likelihood and only used as evaluation ground truth."""
    env_by_id = {e.id: e for e in environments}
    traj_by_id = {t.id: t for t in trajectories}
    segments = []
    used_envs = {}
    rule = f"midpoint sampling, spacing={spacing}s"
    for label in labels:
        if label.label != "bad":
            continue
        traj = traj_by_id.get(label.trajectory_id)
        if traj is None:
            raise ValueError(f"label references unknown trajectory {label.trajectory_id}")
        env = env_by_id.get(traj.environment_id)
        if env is None:
            raise ValueError(f"trajectory {traj.id} references unknown environment")
        segments.append(
            SampledSegment(
                environment_id=env.id,
                trajectory_id=traj.id,
                waypoints=sample_segment_waypoints(traj, label, spacing),
                interval=(label.start_time, label.end_time),
                provenance=rule,
            )
        )
        used_envs[env.id] = env
    return TrainingSet(tuple(used_envs.values()), tuple(segments))


@dataclass
class EMConfig:
    max_iters: int = 200
    tol: float = 1e-6
    seed: int = 0
    init_strategy: str = "bootstrap"
    restarts: int = 5
    # freeze the approximate updates (Beta moments, Sra concentration) so the
    # remaining exact updates form a monotone EM
    exact_updates_only: bool = False
    # robustness against label noise: drop this fraction of waypoints (the
    # lowest mixture likelihoods, i.e. background excursions mislabeled bad)
    # from each M-step; 0 disables and preserves the EM ascent guarantees
    trim_fraction: float = 0.0

    def __post_init__(self):
        if self.max_iters < 0 or self.tol <= 0 or self.restarts < 1:
            raise ValueError("max_iters >= 0, tol > 0 and restarts >= 1 required")
        if not (0.0 <= self.trim_fraction < 1.0):
            raise ValueError("trim_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class EMTraceEntry:
    restart: int
    iteration: int
    avg_log_likelihood: float
    param_hash: str
    warnings: tuple = ()


@dataclass
class EMTrace:
    entries: list = field(default_factory=list)
    best_restart: int = 0

    def record(self, restart, iteration, avg_ll, params, warning_list):
        self.entries.append(
            EMTraceEntry(restart, iteration, avg_ll, parameter_hash(params), tuple(warning_list))
        )

    def restart_entries(self, restart: int):
        return [e for e in self.entries if e.restart == restart]

    def to_dict(self) -> dict:
        return {
            "best_restart": self.best_restart,
            "entries": [
                {
                    "restart": e.restart,
                    "iteration": e.iteration,
                    "avg_log_likelihood": e.avg_log_likelihood,
                    "param_hash": e.param_hash,
                    "warnings": list(e.warnings),
                }
                for e in self.entries
            ],
        }


def parameter_hash(params: ModelParameters) -> str:
    payload = json.dumps(params.to_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]


class _EnvDesign:
    """Precomputed frame features for every (waypoint, activity instance)
    pair of one environment; kernel parameters are the only thing that
    changes between EM iterations."""

    def __init__(self, env: Environment, waypoints: np.ndarray):
        self.env = env
        self.waypoints = waypoints
        self.instances = list(env.activities)
        n, a = len(waypoints), len(self.instances)
        self.types = [act.activity_type for act in self.instances]
        self.human_dir = np.empty((n, a, 2))
        self.object_dir = np.full((n, a, 2), np.nan)
        self.edge_fraction = np.full((n, a), np.nan)
        self.human_distance = np.empty((n, a))
        self.degenerate = np.zeros((n, a), dtype=bool)
        for col, act in enumerate(self.instances):
            hd, dist, od, edge, degen = frame_features(waypoints, act)
            self.human_dir[:, col] = hd
            self.human_distance[:, col] = dist
            self.degenerate[:, col] = degen
            if od is not None:
                self.object_dir[:, col] = od
                self.edge_fraction[:, col] = edge

    def log_cost_matrix(self, params: ModelParameters) -> np.ndarray:
        n, a = self.human_distance.shape
        out = np.empty((n, a))
        for col, act in enumerate(self.instances):
            model = params.model_for(act.activity_type)
            if model is None:
                raise NoActivities(
                    f"no model registered for activity type {act.activity_type!r}"
                )
            out[:, col] = kernel_log_values(
                model,
                self.human_dir[:, col],
                self.object_dir[:, col],
                self.edge_fraction[:, col],
                self.human_distance[:, col],
                self.degenerate[:, col],
            )
        return out


def _prepare(training_set: TrainingSet):
    designs = []
    for env in training_set.environments:
        blocks = [
            seg.waypoints for seg in training_set.segments if seg.environment_id == env.id
        ]
        if blocks:
            designs.append(_EnvDesign(env, np.vstack(blocks)))
    if not designs or sum(len(d.waypoints) for d in designs) == 0:
        raise EmptyTrainingSet("no bad-labeled waypoints to train on")
    return designs


def _instance_log_priors(design: _EnvDesign, params: ModelParameters) -> np.ndarray:
    raw = np.array(
        [params.model_for(t).prior if params.model_for(t) else 0.0 for t in design.types]
    )
    total = raw.sum()
    if total <= 0.0:
        raw = np.ones_like(raw)
        total = raw.sum()
    return np.log(raw / total)


def _e_step(designs, params: ModelParameters):
    """Responsibilities and per-waypoint log-likelihoods for each design."""
    resp_blocks = []
    ll_blocks = []
    for design in designs:
        scores = design.log_cost_matrix(params) + _instance_log_priors(design, params)
        peak = scores.max(axis=1)
        if not np.all(np.isfinite(peak)):
            raise AllZeroDensity("every mixture component underflowed; parameters corrupt")
        shifted = np.exp(scores - peak[:, None])
        norm = shifted.sum(axis=1)
        resp_blocks.append(shifted / norm[:, None])
        ll_blocks.append(peak + np.log(norm))
    return resp_blocks, ll_blocks


@dataclass(frozen=True)
class ResponsibilityTable:
    """Posterior activity assignments, one row per sampled waypoint."""

    environment_ids: tuple
    blocks: tuple  # (n_waypoints, n_instances) arrays aligned with env order

    def row_sums(self):
        return np.concatenate([b.sum(axis=1) for b in self.blocks])


def e_step(params: ModelParameters, training_set: TrainingSet) -> ResponsibilityTable:
    designs = _prepare(training_set)
    blocks, _ = _e_step(designs, params)
    return ResponsibilityTable(
        tuple(d.env.id for d in designs), tuple(b for b in blocks)
    )


def _pool_type_samples(designs, resp_blocks):
    """Pool posterior-weighted feature samples per activity type, skipping
    degenerate rows (they carry no directional information). Concatenation
    order is fixed by (environment, instance) order for reproducibility."""
    pools = {}
    for design, resp in zip(designs, resp_blocks):
        for col, act in enumerate(design.instances):
            pool = pools.setdefault(
                act.activity_type,
                {
                    "proximity": act.proximity_class,
                    "human_dir": [],
                    "object_dir": [],
                    "edge": [],
                    "distance": [],
                    "weights": [],
                    "posterior_total": 0.0,
                },
            )
            keep = ~design.degenerate[:, col]
            w = resp[:, col]
            pool["posterior_total"] += float(w.sum())
            pool["weights"].append(w[keep])
            pool["human_dir"].append(design.human_dir[keep, col])
            if act.proximity_class == "distant":
                pool["object_dir"].append(design.object_dir[keep, col])
                pool["edge"].append(design.edge_fraction[keep, col])
            else:
                pool["distance"].append(design.human_distance[keep, col])
    return pools


def _fit_vonmises_or_warn(vectors, weights, previous: VonMisesParams, label, warn_list):
    if weights.sum() <= 0.0:
        warn_list.append(f"{label}: no effective weight, keeping previous parameters")
        return previous
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateFitWarning)
        fitted = fit_vonmises_weighted(vectors, weights)
    for item in caught:
        warn_list.append(f"{label}: {item.message}")
    return fitted


def m_step(
    responsibilities: ResponsibilityTable,
    training_set: TrainingSet,
    previous: ModelParameters,
    exact_updates_only: bool = False,
):
    """Refit every activity-type model from posterior-weighted samples.

    Estimator fallbacks never abort: Beta moment failures keep the previous
    kernel, degenerate circular fits go uniform, and each event is returned
    as a warning string for the trace.
    """
    designs = _prepare(training_set)
    return _m_step(designs, list(responsibilities.blocks), previous, exact_updates_only)


def _uninformative_model(name: str, proximity: str) -> ActivityModel:
    if proximity == "distant":
        return ActivityModel(
            name,
            "distant",
            VonMisesParams(0.0, 0.0),
            angular_object=VonMisesParams(0.0, 0.0),
            edge=BetaParams(1.0, 1.0),
            prior=0.0,
        )
    return ActivityModel(
        name,
        "close_proximity",
        VonMisesParams(0.0, 0.0),
        distance=GaussianParams(0.0, 1.0),
        prior=0.0,
    )


def _m_step(designs, resp_blocks, previous: ModelParameters, exact_updates_only=False):
    pools = _pool_type_samples(designs, resp_blocks)
    # posterior mass kept (equals the waypoint count unless rows were trimmed)
    total_mass = sum(p["posterior_total"] for p in pools.values())
    if total_mass <= 0.0:
        total_mass = 1.0
    warn_list = []
    registry = {}
    for name in sorted(pools):
        pool = pools[name]
        prev_model = previous.model_for(name) or _uninformative_model(name, pool["proximity"])
        weights = np.concatenate(pool["weights"]) if pool["weights"] else np.empty(0)
        prior = pool["posterior_total"] / total_mass

        ang_h = _fit_vonmises_or_warn(
            np.concatenate(pool["human_dir"]) if pool["human_dir"] else np.empty((0, 2)),
            weights,
            prev_model.angular_human,
            f"{name}.angular_human",
            warn_list,
        )
        if exact_updates_only:
            # closed-form mean with the previous concentration kept fixed
            ang_h = VonMisesParams(ang_h.mean_angle, prev_model.angular_human.concentration)

        if pool["proximity"] == "distant":
            ang_o = _fit_vonmises_or_warn(
                np.concatenate(pool["object_dir"]),
                weights,
                prev_model.angular_object,
                f"{name}.angular_object",
                warn_list,
            )
            if exact_updates_only:
                ang_o = VonMisesParams(
                    ang_o.mean_angle, prev_model.angular_object.concentration
                )
                edge = prev_model.edge
            else:
                try:
                    edge = fit_beta_weighted(np.concatenate(pool["edge"]), weights)
                except (MomentMismatch, ZeroVariance) as exc:
                    warn_list.append(f"{name}.edge: {exc}; keeping previous parameters")
                    edge = prev_model.edge
            registry[name] = ActivityModel(
                activity_type=name,
                proximity_class="distant",
                angular_human=ang_h,
                angular_object=ang_o,
                edge=edge,
                prior=prior,
            )
        else:
            if weights.sum() > 0.0:
                dist = fit_gaussian_weighted(np.concatenate(pool["distance"]), weights)
            else:
                warn_list.append(f"{name}.distance: no effective weight, keeping previous")
                dist = prev_model.distance
            registry[name] = ActivityModel(
                activity_type=name,
                proximity_class="close_proximity",
                angular_human=ang_h,
                distance=dist,
                prior=prior,
            )
    params = ModelParameters(
        registry,
        version=previous.version,
        trained_at=previous.trained_at,
        iteration_count=previous.iteration_count + 1,
    )
    return params, warn_list


def _bootstrap_init(designs, rng: np.random.Generator) -> ModelParameters:
    """Angular means from a random responsibility-weighted bootstrap;
    concentration 1, Beta(1.5, 1.5), uniform priors. Distance Gaussians
    start at a randomized low quantile of the pooled distances: initializing
    them at the global moments (several meters in cluttered rooms) turns the
    component into a background absorber that EM cannot escape, so each
    restart instead probes a near-the-human basin."""
    resp_blocks = []
    for design in designs:
        raw = rng.random((len(design.waypoints), len(design.instances)))
        resp_blocks.append(raw / raw.sum(axis=1, keepdims=True))
    pools = _pool_type_samples(designs, resp_blocks)
    registry = {}
    n_types = len(pools)
    for name in sorted(pools):
        pool = pools[name]
        weights = np.concatenate(pool["weights"])
        vectors = np.concatenate(pool["human_dir"])
        resultant = weights @ vectors
        norm = np.linalg.norm(resultant)
        mu = resultant / norm if norm > 1e-12 else np.array([1.0, 0.0])
        ang_h = VonMisesParams.from_vector(mu, 1.0)
        if pool["proximity"] == "distant":
            vec_o = np.concatenate(pool["object_dir"])
            res_o = weights @ vec_o
            norm_o = np.linalg.norm(res_o)
            mu_o = res_o / norm_o if norm_o > 1e-12 else np.array([1.0, 0.0])
            registry[name] = ActivityModel(
                activity_type=name,
                proximity_class="distant",
                angular_human=ang_h,
                angular_object=VonMisesParams.from_vector(mu_o, 1.0),
                edge=BetaParams(1.5, 1.5),
                prior=1.0 / n_types,
            )
        else:
            dists = np.concatenate(pool["distance"])
            center = float(np.quantile(dists, rng.uniform(0.02, 0.25)))
            spread = max((0.5 * center) ** 2, 4.0 * SIGMA_MIN)
            registry[name] = ActivityModel(
                activity_type=name,
                proximity_class="close_proximity",
                angular_human=ang_h,
                distance=GaussianParams(max(center, 0.05), spread),
                prior=1.0 / n_types,
            )
    return ModelParameters(registry, iteration_count=0)


def log_likelihood(params: ModelParameters, training_set: TrainingSet) -> float:
    """Total log-likelihood of the bad-waypoint pool under the mixture."""
    designs = _prepare(training_set)
    _, ll_blocks = _e_step(designs, params)
    return math.fsum(float(v) for block in ll_blocks for v in block)


def average_log_likelihood(params: ModelParameters, training_set: TrainingSet) -> float:
    designs = _prepare(training_set)
    _, ll_blocks = _e_step(designs, params)
    total = math.fsum(float(v) for block in ll_blocks for v in block)
    return total / sum(len(b) for b in ll_blocks)


def fit(training_set: TrainingSet, config: Optional[EMConfig] = None):
    """Run EM with restarts; returns (best ModelParameters, EMTrace).

    Deterministic for a given (data, seed, config): restart r uses the r-th
    spawn of the seed, so a single-restart run reproduces restart 0 of a
    multi-restart run exactly.
    """
    config = config or EMConfig()
    designs = _prepare(training_set)
    n_total = sum(len(d.waypoints) for d in designs)

    trace = EMTrace()
    best = None
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    for restart in range(config.restarts):
        rng = np.random.default_rng(seeds[restart])
        params = _bootstrap_init(designs, rng)
        prev_avg = None
        pending_warnings = []
        for iteration in range(config.max_iters + 1):
            resp_blocks, ll_blocks = _e_step(designs, params)
            avg_ll = math.fsum(float(v) for block in ll_blocks for v in block) / n_total
            trace.record(restart, iteration, avg_ll, params, pending_warnings)
            pending_warnings = []
            if prev_avg is not None and abs(avg_ll - prev_avg) <= config.tol * abs(prev_avg):
                break
            if iteration == config.max_iters:
                break
            if config.trim_fraction > 0.0:
                cutoff = float(np.quantile(np.concatenate(ll_blocks), config.trim_fraction))
                resp_blocks = [
                    resp * (ll >= cutoff)[:, None]
                    for resp, ll in zip(resp_blocks, ll_blocks)
                ]
            params, pending_warnings = _m_step(
                designs, resp_blocks, params, config.exact_updates_only
            )
            prev_avg = avg_ll
        final_ll = trace.restart_entries(restart)[-1].avg_log_likelihood
        if best is None or final_ll > best[0]:
            best = (final_ll, restart, params)
    trace.best_restart = best[1]
    return best[2], trace
