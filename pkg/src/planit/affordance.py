"""Activity-conditioned waypoint costs and their latent-activity mixture.

A cost here is a probability density over where bad-labeled waypoints land,
so *higher* values mean less desirable positions. Every cost is strictly
positive and finite; Beta inputs are nudged off the interval endpoints so
boundary waypoints cannot zero out a whole trajectory product.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .distributions import (
    BetaParams,
    GaussianParams,
    UNIFORM_CIRCLE,
    VonMisesParams,
    beta_logpdf,
    gaussian_logpdf,
    vonmises_logpdf,
)
from .env import ActivityInstance, Environment, Trajectory, frame_features
from .errors import ModelMismatch, NoActivities, UnknownAttribute

LOG_UNIFORM_CIRCLE = math.log(UNIFORM_CIRCLE)

# Keep edge/height fractions strictly inside (0, 1): positivity of the cost
# must survive waypoints clamped onto the interval endpoints.
EDGE_NUDGE = 1e-6


@dataclass(frozen=True)
class ActivityModel:
    """Learned kernels for one activity type.

    Distant activities carry two angular kernels plus the edge preference;
    close-proximity ones carry one angular kernel plus a distance Gaussian.
    """

    activity_type: str
    proximity_class: str
    angular_human: VonMisesParams
    angular_object: Optional[VonMisesParams] = None
    edge: Optional[BetaParams] = None
    distance: Optional[GaussianParams] = None
    prior: float = 1.0

    def __post_init__(self):
        if self.proximity_class == "distant":
            if self.angular_object is None or self.edge is None or self.distance is not None:
                raise ValueError(
                    f"{self.activity_type}: distant models carry angular_human, "
                    "angular_object and edge kernels only"
                )
        elif self.proximity_class == "close_proximity":
            if self.distance is None or self.angular_object is not None or self.edge is not None:
                raise ValueError(
                    f"{self.activity_type}: close-proximity models carry angular_human "
                    "and distance kernels only"
                )
        else:
            raise ValueError(f"bad proximity class {self.proximity_class!r}")
        if not (0.0 <= self.prior <= 1.0):
            raise ValueError("prior must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = {
            "proximity_class": self.proximity_class,
            "angular_human": {
                "mean_angle": self.angular_human.mean_angle,
                "concentration": self.angular_human.concentration,
            },
            "prior": self.prior,
        }
        if self.proximity_class == "distant":
            d["angular_object"] = {
                "mean_angle": self.angular_object.mean_angle,
                "concentration": self.angular_object.concentration,
            }
            d["edge"] = {"alpha": self.edge.alpha, "beta": self.edge.beta}
        else:
            d["distance"] = {"mean": self.distance.mean, "variance": self.distance.variance}
        return d

    @classmethod
    def from_dict(cls, activity_type: str, d: dict) -> "ActivityModel":
        proximity = d["proximity_class"]
        ang_h = VonMisesParams(
            d["angular_human"]["mean_angle"], d["angular_human"]["concentration"]
        )
        kwargs = {}
        if proximity == "distant":
            kwargs["angular_object"] = VonMisesParams(
                d["angular_object"]["mean_angle"], d["angular_object"]["concentration"]
            )
            kwargs["edge"] = BetaParams(d["edge"]["alpha"], d["edge"]["beta"])
        else:
            kwargs["distance"] = GaussianParams(
                d["distance"]["mean"], d["distance"]["variance"]
            )
        return cls(
            activity_type=activity_type,
            proximity_class=proximity,
            angular_human=ang_h,
            prior=float(d.get("prior", 1.0)),
            **kwargs,
        )


@dataclass(frozen=True)
class ModelParameters:
    """The full registry of learned activity models plus training metadata."""

    registry: Mapping[str, ActivityModel]
    version: int = 1
    trained_at: str = ""
    iteration_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "registry", dict(self.registry))
        for name, model in self.registry.items():
            if model.activity_type != name:
                raise ValueError(f"registry key {name!r} != model type {model.activity_type!r}")

    def model_for(self, activity_type: str) -> Optional[ActivityModel]:
        return self.registry.get(activity_type)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "trained_at": self.trained_at,
            "iteration_count": self.iteration_count,
            "activities": {name: m.to_dict() for name, m in sorted(self.registry.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParameters":
        registry = {
            name: ActivityModel.from_dict(name, spec)
            for name, spec in d.get("activities", {}).items()
        }
        return cls(
            registry=registry,
            version=int(d.get("version", 1)),
            trained_at=d.get("trained_at", ""),
            iteration_count=int(d.get("iteration_count", 0)),
        )


def kernel_log_values(
    model: ActivityModel,
    human_dir: np.ndarray,
    object_dir: Optional[np.ndarray],
    edge_fraction: Optional[np.ndarray],
    human_distance: np.ndarray,
    degenerate: np.ndarray,
) -> np.ndarray:
    """Per-waypoint log cost of one activity given precomputed frame features.

    Degenerate waypoints (no defined direction) contribute each directional
    and edge kernel's uniform value; the distance Gaussian still sees its
    well-defined zero distance.
    """
    if model.proximity_class == "distant":
        out = (
            vonmises_logpdf(human_dir, model.angular_human)
            + vonmises_logpdf(object_dir, model.angular_object)
            + beta_logpdf(np.clip(edge_fraction, EDGE_NUDGE, 1.0 - EDGE_NUDGE), model.edge)
        )
        uniform = 2.0 * LOG_UNIFORM_CIRCLE  # two uniform circles, Beta(1,1) adds zero
        return np.where(degenerate, uniform, out)
    out = vonmises_logpdf(human_dir, model.angular_human) + gaussian_logpdf(
        human_distance, model.distance
    )
    fallback = LOG_UNIFORM_CIRCLE + gaussian_logpdf(human_distance, model.distance)
    return np.where(degenerate, fallback, out)


def instance_log_costs(waypoints, activity: ActivityInstance, model: ActivityModel) -> np.ndarray:
    """Vectorized log activity cost for a batch of waypoints."""
    if model.activity_type != activity.activity_type:
        raise ModelMismatch(
            f"model for {model.activity_type!r} applied to {activity.activity_type!r}"
        )
    if model.proximity_class != activity.proximity_class:
        raise ModelMismatch(
            f"{activity.activity_type}: model proximity {model.proximity_class!r} "
            f"!= instance proximity {activity.proximity_class!r}"
        )
    human_dir, dist_h, object_dir, edge_fraction, degenerate = frame_features(
        waypoints, activity
    )
    return kernel_log_values(model, human_dir, object_dir, edge_fraction, dist_h, degenerate)


def activity_cost(waypoint, activity: ActivityInstance, model: ActivityModel) -> float:
    """Product of the applicable kernel densities at one waypoint."""
    return float(np.exp(instance_log_costs(np.atleast_2d(waypoint), activity, model)[0]))


def environment_priors(env: Environment, params: ModelParameters):
    """Activities with a registered model and their renormalized priors.

    Priors are stored per activity type; each instance in the environment
    draws its type's prior, renormalized over the instances present.
    """
    pairs = [
        (act, params.model_for(act.activity_type))
        for act in env.activities
        if params.model_for(act.activity_type) is not None
    ]
    if not pairs:
        raise NoActivities(f"environment {env.id} has no activity with a registered model")
    raw = np.array([model.prior for _, model in pairs], dtype=float)
    total = raw.sum()
    if total <= 0.0:
        raw = np.ones_like(raw)
        total = raw.sum()
    return pairs, raw / total


def marginal_log_costs(waypoints, env: Environment, params: ModelParameters) -> np.ndarray:
    """Log of the prior-weighted mixture cost for a batch of waypoints."""
    pairs, priors = environment_priors(env, params)
    wps = np.atleast_2d(np.asarray(waypoints, dtype=float))
    logs = np.empty((len(wps), len(pairs)))
    for col, ((act, model), prior) in enumerate(zip(pairs, priors)):
        logs[:, col] = math.log(prior) + instance_log_costs(wps, act, model)
    peak = logs.max(axis=1)
    return peak + np.log(np.exp(logs - peak[:, None]).sum(axis=1))


def marginal_waypoint_cost(waypoint, env: Environment, params: ModelParameters) -> float:
    """Mixture cost of one waypoint with per-environment renormalized priors."""
    return float(np.exp(marginal_log_costs(np.atleast_2d(waypoint), env, params)[0]))


def log_trajectory_cost(traj: Trajectory, env: Environment, params: ModelParameters) -> float:
    """Sum of log marginal costs over the waypoints (underflow-safe form).

    math.fsum keeps the result independent of waypoint order.
    """
    return math.fsum(marginal_log_costs(traj.waypoints, env, params))


def trajectory_cost(traj: Trajectory, env: Environment, params: ModelParameters) -> float:
    """Product of the marginal waypoint costs along the trajectory."""
    return math.exp(log_trajectory_cost(traj, env, params))


def responsibility_diagnostic(waypoint, env: Environment, params: ModelParameters):
    """Posterior over activity instances for one waypoint (diagnostic only;
    inference always uses the marginal mixture)."""
    pairs, priors = environment_priors(env, params)
    wp = np.atleast_2d(waypoint)
    logs = np.array(
        [
            math.log(prior) + instance_log_costs(wp, act, model)[0]
            for (act, model), prior in zip(pairs, priors)
        ]
    )
    post = np.exp(logs - logs.max())
    post /= post.sum()
    return [(act, float(p)) for (act, _), p in zip(pairs, post)]


# --- manipulation extension: attribute-pair costs over 3D waypoints ---------

HUMAN_ATTRIBUTE = "human"


@dataclass(frozen=True)
class ContextObject:
    """An object (or human) near a manipulation waypoint."""

    id: str
    attribute: str
    position: np.ndarray
    height: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(
            self, "position", np.asarray(self.position, dtype=float).reshape(2)
        )

    @property
    def is_human(self) -> bool:
        return self.attribute == HUMAN_ATTRIBUTE


@dataclass(frozen=True)
class AttributePairModel:
    """Kernels for one (grabbed attribute, context attribute) pair.

    The height kernel exists exactly when the context attribute is human.
    """

    grabbed_attribute: str
    context_attribute: str
    distance: GaussianParams
    angular: VonMisesParams
    height: Optional[BetaParams] = None
    prior: float = 1.0

    def __post_init__(self):
        wants_height = self.context_attribute == HUMAN_ATTRIBUTE
        if wants_height != (self.height is not None):
            raise ValueError(
                f"pair ({self.grabbed_attribute}, {self.context_attribute}): "
                "height kernel present iff the context attribute is human"
            )


def manipulation_waypoint_cost(
    position_xyz,
    orientation_xy,
    grabbed_attribute: str,
    context: Sequence[ContextObject],
    pair_models: Mapping[tuple, AttributePairModel],
    scene_height: float,
) -> float:
    """Product over context objects of the attribute-pair kernel densities.

    The angular feature is the grabbed object's plan-view orientation
    expressed in the frame whose x axis points from the waypoint toward the
    context object; heights use the normalized height feature against the
    scene ceiling.
    """
    from .env import extract_height_feature, _frame_matrix

    pos = np.asarray(position_xyz, dtype=float).reshape(3)
    orient = np.asarray(orientation_xy, dtype=float).reshape(2)
    norm = np.linalg.norm(orient)
    if norm <= 0:
        raise ValueError("orientation must be a non-zero plan-view vector")
    orient = orient / norm

    log_total = 0.0
    for ctx in context:
        key = (grabbed_attribute, ctx.attribute)
        model = pair_models.get(key)
        if model is None:
            raise UnknownAttribute(f"no model for attribute pair {key!r}")
        offset = ctx.position - pos[:2]
        dist = float(np.linalg.norm(offset))
        if dist < 1e-9:
            log_total += LOG_UNIFORM_CIRCLE
        else:
            axis = offset / dist
            feat = orient @ _frame_matrix(axis)
            log_total += float(vonmises_logpdf(feat, model.angular))
        log_total += float(gaussian_logpdf(dist, model.distance))
        if model.height is not None:
            if ctx.height is None:
                raise ValueError(f"context {ctx.id} needs a height for the human pair kernel")
            h_frac = extract_height_feature(float(pos[2]), ctx.height, scene_height)
            h_frac = min(max(h_frac, EDGE_NUDGE), 1.0 - EDGE_NUDGE)
            log_total += float(beta_logpdf(h_frac, model.height))
    return math.exp(log_total)
