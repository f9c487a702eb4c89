"""Generate-then-recover harness shared by the EM tests and the acceptance
suite.

Waypoints are drawn activity-first (type by prior, then a position realizing
the type's feature kernels): close-proximity features (angle, distance) can
be realized exactly; for distant activities the human-side angle and the
edge fraction are realized exactly and the object-side angular distribution
is whatever those induce, so its reference parameters come from a supervised
fit with the true assignments rather than from prescribed constants.
"""
import numpy as np

from planit.affordance import ActivityModel, ModelParameters
from planit.distributions import BetaParams, GaussianParams, VonMisesParams
from planit.em import ResponsibilityTable, SampledSegment, TrainingSet, m_step
from planit.env import ActivityInstance, Bounds, Environment

ROOM = 16.0
MAX_ABS_ANGLE = np.deg2rad(80.0)


def true_model() -> ModelParameters:
    registry = {
        "watching": ActivityModel(
            "watching",
            "distant",
            angular_human=VonMisesParams(0.0, 5.5),
            angular_object=VonMisesParams(0.0, 2.0),  # induced; see module docstring
            edge=BetaParams(2.0, 3.5),
            prior=0.65,
        ),
        "working": ActivityModel(
            "working",
            "close_proximity",
            angular_human=VonMisesParams(np.pi, 2.5),
            distance=GaussianParams(0.9, 0.04),
            prior=0.35,
        ),
    }
    return ModelParameters(registry, trained_at="synthetic")


def make_environment(ident: str, rng: np.random.Generator) -> Environment:
    """One watching pair and one working human, well separated."""
    bounds = Bounds(0.0, 0.0, ROOM, ROOM)
    watch_h = rng.uniform(4.0, ROOM - 4.0, 2)
    ang = rng.uniform(-np.pi, np.pi)
    sep = rng.uniform(1.6, 2.6)
    axis = np.array([np.cos(ang), np.sin(ang)])
    watch_o = watch_h + sep * axis
    while True:
        work_h = rng.uniform(3.0, ROOM - 3.0, 2)
        if np.linalg.norm(work_h - watch_h) > 5.0 and np.linalg.norm(work_h - watch_o) > 4.0:
            break
    face_ang = rng.uniform(-np.pi, np.pi)
    facing = np.array([np.cos(face_ang), np.sin(face_ang)])
    activities = (
        ActivityInstance("watching", watch_h, axis, watch_o),
        ActivityInstance("working", work_h, facing, work_h + 0.1 * facing),
    )
    return Environment(ident, bounds, activities=activities)


def _frame(axis):
    return np.array([[axis[0], -axis[1]], [axis[1], axis[0]]])


def _sample_watching(act: ActivityInstance, model: ActivityModel, n, rng, bounds):
    ang_h, edge = model.angular_human, model.edge
    axis = (act.object_position - act.human_position) / act.separation
    rot = _frame(axis)
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        m = 2 * (n - filled) + 32
        theta = rng.vonmises(ang_h.mean_angle, ang_h.concentration, m)
        frac = rng.beta(edge.alpha, edge.beta, m)
        ok = (np.abs(theta) < MAX_ABS_ANGLE) & (frac > 1e-3) & (frac < 1.0 - 1e-3)
        theta, frac = theta[ok], frac[ok]
        local = np.stack(
            [frac * act.separation, frac * act.separation * np.tan(theta)], axis=1
        )
        pts = act.human_position + local @ rot.T
        inside = bounds.contains(pts)
        pts = pts[inside]
        take = min(len(pts), n - filled)
        out[filled : filled + take] = pts[:take]
        filled += take
    return out


def _sample_working(act: ActivityInstance, model: ActivityModel, n, rng, bounds):
    ang_h, dist = model.angular_human, model.distance
    rot = _frame(act.human_facing)
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        m = 2 * (n - filled) + 32
        theta = rng.vonmises(ang_h.mean_angle, ang_h.concentration, m)
        d = rng.normal(dist.mean, np.sqrt(dist.variance), m)
        ok = d > 0.02
        theta, d = theta[ok], d[ok]
        local = np.stack([d * np.cos(theta), d * np.sin(theta)], axis=1)
        pts = act.human_position + local @ rot.T
        inside = bounds.contains(pts)
        pts = pts[inside]
        take = min(len(pts), n - filled)
        out[filled : filled + take] = pts[:take]
        filled += take
    return out


def generate_training_set(n_envs: int, n_waypoints: int, seed: int):
    """Returns (TrainingSet, oracle ResponsibilityTable aligned with it)."""
    rng = np.random.default_rng(seed)
    params = true_model()
    envs = [make_environment(f"synth-{i:03d}", rng) for i in range(n_envs)]
    per_env = n_waypoints // n_envs
    segments = []
    oracle_blocks = []
    priors = np.array([params.registry["watching"].prior, params.registry["working"].prior])
    for env in envs:
        assignment = rng.random(per_env) >= priors[0]  # False -> watching
        n_watch = int(np.sum(~assignment))
        watch_pts = _sample_watching(
            env.activities[0], params.registry["watching"], n_watch, rng, env.bounds
        )
        work_pts = _sample_working(
            env.activities[1], params.registry["working"], per_env - n_watch, rng, env.bounds
        )
        pts = np.empty((per_env, 2))
        pts[~assignment] = watch_pts
        pts[assignment] = work_pts
        for start in range(0, per_env, 50):
            chunk = pts[start : start + 50]
            segments.append(
                SampledSegment(
                    environment_id=env.id,
                    trajectory_id=f"{env.id}-seg{start}",
                    waypoints=chunk,
                    interval=(float(start), float(start + len(chunk))),
                    provenance="synthetic feature-faithful draw",
                )
            )
        one_hot = np.zeros((per_env, 2))
        one_hot[~assignment, 0] = 1.0
        one_hot[assignment, 1] = 1.0
        oracle_blocks.append(one_hot)
    training = TrainingSet(tuple(envs), tuple(segments))
    oracle = ResponsibilityTable(tuple(e.id for e in envs), tuple(oracle_blocks))
    return training, oracle


def oracle_fit(training: TrainingSet, oracle: ResponsibilityTable) -> ModelParameters:
    """Supervised reference: M-step with the true assignments."""
    params, _ = m_step(oracle, training, previous=true_model())
    return params


def angle_diff(a: float, b: float) -> float:
    return abs(float(np.angle(np.exp(1j * (a - b)))))
