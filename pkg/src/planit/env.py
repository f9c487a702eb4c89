"""World model: environments, activities, trajectories, labels, and the
local-frame feature extraction every cost kernel consumes.

Positions are meters, angles radians. All types are immutable after
construction; feature extraction is pure.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateFrame, InvalidHeights

ACTIVITY_TYPES = ("walking", "watching", "interacting", "reaching", "sitting", "working")

# Which activity types put human and object in close proximity. Overridable
# through an activity registry file (load_activity_registry).
DEFAULT_PROXIMITY = {
    "walking": "distant",
    "watching": "distant",
    "interacting": "distant",
    "reaching": "close_proximity",
    "sitting": "close_proximity",
    "working": "close_proximity",
}

_ORIGIN_EPS = 1e-9  # below this offset no direction is defined


def load_activity_registry(path) -> dict:
    """Read an activity->proximity_class mapping from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        table = json.load(fh)
    for name, cls in table.items():
        if cls not in ("distant", "close_proximity"):
            raise ValueError(f"unknown proximity class {cls!r} for activity {name!r}")
    return table


def _as_point(value) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(2)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite coordinate: {value!r}")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _unit(vec: np.ndarray, what: str) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm < _ORIGIN_EPS:
        raise ValueError(f"{what} must be a non-zero vector")
    return vec / norm


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned rectangle in meters."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("bounds must have positive extent")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (
            (pts[:, 0] >= self.xmin)
            & (pts[:, 0] <= self.xmax)
            & (pts[:, 1] >= self.ymin)
            & (pts[:, 1] <= self.ymax)
        )

    def to_dict(self) -> dict:
        return {"xmin": self.xmin, "ymin": self.ymin, "xmax": self.xmax, "ymax": self.ymax}

    @classmethod
    def from_dict(cls, d: dict) -> "Bounds":
        return cls(float(d["xmin"]), float(d["ymin"]), float(d["xmax"]), float(d["ymax"]))


@dataclass(frozen=True)
class ActivityInstance:
    """A (human pose, object pose, activity type) triple.

    For distant activities the human and object are spatially separated and
    the local frame runs along the human->object axis. For close-proximity
    activities the frame is anchored to the human facing direction.
    """

    activity_type: str
    human_position: np.ndarray
    human_facing: np.ndarray
    object_position: np.ndarray
    proximity_class: str = ""

    def __post_init__(self):
        object.__setattr__(self, "human_position", _freeze(_as_point(self.human_position)))
        object.__setattr__(self, "object_position", _freeze(_as_point(self.object_position)))
        facing = _unit(_as_point(self.human_facing), "human_facing")
        object.__setattr__(self, "human_facing", _freeze(facing))
        if not self.proximity_class:
            try:
                cls = DEFAULT_PROXIMITY[self.activity_type]
            except KeyError:
                raise ValueError(f"unknown activity type {self.activity_type!r}") from None
            object.__setattr__(self, "proximity_class", cls)
        if self.proximity_class not in ("distant", "close_proximity"):
            raise ValueError(f"bad proximity class {self.proximity_class!r}")
        if self.proximity_class == "distant" and self.separation <= _ORIGIN_EPS:
            raise ValueError("distant activity needs human/object separation > 0")

    @property
    def separation(self) -> float:
        return float(np.linalg.norm(self.object_position - self.human_position))

    def to_dict(self) -> dict:
        return {
            "activity_type": self.activity_type,
            "human": {
                "position": self.human_position.tolist(),
                "facing": self.human_facing.tolist(),
            },
            "object": {"position": self.object_position.tolist()},
            "proximity_class": self.proximity_class,
        }

    @classmethod
    def from_dict(cls, d: dict, registry: Optional[dict] = None) -> "ActivityInstance":
        proximity = d.get("proximity_class", "")
        if not proximity and registry:
            proximity = registry.get(d["activity_type"], "")
        return cls(
            activity_type=d["activity_type"],
            human_position=d["human"]["position"],
            human_facing=d["human"]["facing"],
            object_position=d["object"]["position"],
            proximity_class=proximity,
        )


@dataclass(frozen=True)
class SceneObject:
    """A named object in the environment (furniture, clutter)."""

    id: str
    position: np.ndarray
    height: Optional[float] = None
    attribute: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "position", _freeze(_as_point(self.position)))

    def to_dict(self) -> dict:
        d = {"id": self.id, "position": self.position.tolist()}
        if self.height is not None:
            d["height"] = self.height
        if self.attribute is not None:
            d["attribute"] = self.attribute
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneObject":
        return cls(
            id=d["id"],
            position=d["position"],
            height=d.get("height"),
            attribute=d.get("attribute"),
        )


@dataclass(frozen=True)
class Environment:
    """A context-rich scene: bounds, obstacles, objects and activities."""

    id: str
    bounds: Bounds
    activities: tuple = ()
    objects: tuple = ()
    obstacles: tuple = ()
    scene_height: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "activities", tuple(self.activities))
        object.__setattr__(self, "objects", tuple(self.objects))
        polys = tuple(_freeze(np.asarray(p, dtype=float).reshape(-1, 2)) for p in self.obstacles)
        object.__setattr__(self, "obstacles", polys)
        for act in self.activities:
            pts = np.vstack([act.human_position, act.object_position])
            if not np.all(self.bounds.contains(pts)):
                raise ValueError(
                    f"environment {self.id}: activity {act.activity_type} outside bounds"
                )

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "bounds": self.bounds.to_dict(),
            "activities": [a.to_dict() for a in self.activities],
            "objects": [o.to_dict() for o in self.objects],
            "obstacles": [p.tolist() for p in self.obstacles],
        }
        if self.scene_height is not None:
            d["scene_height"] = self.scene_height
        return d

    @classmethod
    def from_dict(cls, d: dict, registry: Optional[dict] = None) -> "Environment":
        return cls(
            id=d["id"],
            bounds=Bounds.from_dict(d["bounds"]),
            activities=tuple(
                ActivityInstance.from_dict(a, registry) for a in d.get("activities", [])
            ),
            objects=tuple(SceneObject.from_dict(o) for o in d.get("objects", [])),
            obstacles=tuple(d.get("obstacles", [])),
            scene_height=d.get("scene_height"),
        )


@dataclass(frozen=True)
class Trajectory:
    """An ordered sequence of 2D waypoints with strictly increasing timestamps."""

    id: str
    environment_id: str
    waypoints: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        wps = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
        ts = np.asarray(self.timestamps, dtype=float).reshape(-1)
        if len(wps) < 1:
            raise ValueError("trajectory needs at least one waypoint")
        if len(wps) != len(ts):
            raise ValueError("waypoints and timestamps length mismatch")
        if len(ts) > 1 and not np.all(np.diff(ts) > 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "waypoints", _freeze(wps))
        object.__setattr__(self, "timestamps", _freeze(ts))

    @property
    def duration(self) -> float:
        return float(self.timestamps[-1] - self.timestamps[0])

    def position_at(self, times) -> np.ndarray:
        """Linear interpolation of the waypoint path at the given times."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        x = np.interp(t, self.timestamps, self.waypoints[:, 0])
        y = np.interp(t, self.timestamps, self.waypoints[:, 1])
        return np.stack([x, y], axis=1)

    def validate_within(self, env: Environment) -> None:
        if not np.all(env.bounds.contains(self.waypoints)):
            raise ValueError(f"trajectory {self.id} leaves bounds of {env.id}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "environment_id": self.environment_id,
            "waypoints": self.waypoints.tolist(),
            "timestamps": self.timestamps.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(
            id=d["id"],
            environment_id=d["environment_id"],
            waypoints=d["waypoints"],
            timestamps=d["timestamps"],
        )


LABEL_SCORES = {"bad": 1, "neutral": 3, "good": 5}


@dataclass(frozen=True)
class LabeledSegment:
    """A user label over a time interval of one trajectory."""

    trajectory_id: str
    start_time: float
    end_time: float
    label: str
    annotator_id: str
    received_at: Optional[str] = None

    def __post_init__(self):
        if self.label not in LABEL_SCORES:
            raise ValueError(f"label must be one of {sorted(LABEL_SCORES)}, got {self.label!r}")
        if not self.start_time < self.end_time:
            raise ValueError("segment interval must satisfy start_time < end_time")

    @property
    def score(self) -> int:
        return LABEL_SCORES[self.label]

    def to_dict(self) -> dict:
        d = {
            "trajectory_id": self.trajectory_id,
            "start_time": self.start_time,
            "end_time": self.end_time,
            "label": self.label,
            "annotator_id": self.annotator_id,
        }
        if self.received_at is not None:
            d["received_at"] = self.received_at
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LabeledSegment":
        return cls(
            trajectory_id=d["trajectory_id"],
            start_time=float(d["start_time"]),
            end_time=float(d["end_time"]),
            label=d["label"],
            annotator_id=d["annotator_id"],
            received_at=d.get("received_at"),
        )


@dataclass(frozen=True)
class ActivityFrameFeatures:
    """Waypoint geometry expressed in one activity's local frames.

    human_dir / object_dir are unit vectors in the human- and object-centered
    frames; edge_fraction is the normalized position along the human->object
    axis, clamped to [0, 1]; human_distance is the plain Euclidean distance
    from the human.
    """

    human_dir: np.ndarray
    human_distance: float
    object_dir: Optional[np.ndarray] = None
    axis_distance: Optional[float] = None
    separation: Optional[float] = None
    edge_fraction: Optional[float] = None


def _frame_matrix(axis: np.ndarray) -> np.ndarray:
    # columns are the frame's x axis and its +90 degree rotation
    return np.array([[axis[0], -axis[1]], [axis[1], axis[0]]])


def frame_features(waypoints, activity: ActivityInstance):
    """Vectorized local-frame features for a batch of waypoints.

    Returns (human_dir (n,2), human_distance (n,), object_dir (n,2) or None,
    edge_fraction (n,) or None, degenerate (n,) bool). Degenerate rows sit on
    a frame origin and carry unit placeholders; callers decide how to score
    them.
    """
    wps = np.atleast_2d(np.asarray(waypoints, dtype=float))
    h = activity.human_position
    if activity.proximity_class == "distant":
        axis = (activity.object_position - h) / activity.separation
    else:
        axis = activity.human_facing
    rot_h = _frame_matrix(axis)

    off_h = wps - h
    dist_h = np.linalg.norm(off_h, axis=1)
    degenerate = dist_h < _ORIGIN_EPS
    safe = np.where(degenerate, 1.0, dist_h)
    human_dir = (off_h / safe[:, None]) @ rot_h  # row-vector form of R^T v
    human_dir[degenerate] = (1.0, 0.0)

    if activity.proximity_class != "distant":
        return human_dir, dist_h, None, None, degenerate

    sep = activity.separation
    axis_dist = off_h @ axis
    edge_fraction = np.clip(axis_dist / sep, 0.0, 1.0)

    o = activity.object_position
    rot_o = _frame_matrix(-axis)
    off_o = wps - o
    dist_o = np.linalg.norm(off_o, axis=1)
    degenerate = degenerate | (dist_o < _ORIGIN_EPS)
    safe_o = np.where(dist_o < _ORIGIN_EPS, 1.0, dist_o)
    object_dir = (off_o / safe_o[:, None]) @ rot_o
    object_dir[dist_o < _ORIGIN_EPS] = (1.0, 0.0)
    return human_dir, dist_h, object_dir, edge_fraction, degenerate


def extract_features(waypoint, activity: ActivityInstance) -> ActivityFrameFeatures:
    """Project one waypoint into the activity's local coordinate frames.

    Raises DegenerateFrame when the waypoint coincides with a frame origin
    (within 1e-9 m); callers must skip or perturb such waypoints.
    """
    wp = _as_point(waypoint)
    human_dir, dist_h, object_dir, edge_fraction, degenerate = frame_features(
        wp[None, :], activity
    )
    if degenerate[0]:
        raise DegenerateFrame(
            f"waypoint {wp.tolist()} sits on a frame origin of {activity.activity_type}"
        )
    if activity.proximity_class != "distant":
        return ActivityFrameFeatures(human_dir=human_dir[0], human_distance=float(dist_h[0]))
    off = wp - activity.human_position
    axis = (activity.object_position - activity.human_position) / activity.separation
    return ActivityFrameFeatures(
        human_dir=human_dir[0],
        human_distance=float(dist_h[0]),
        object_dir=object_dir[0],
        axis_distance=float(off @ axis),
        separation=activity.separation,
        edge_fraction=float(edge_fraction[0]),
    )


def extract_height_feature(waypoint_z: float, h_obj: float, h_max: float) -> float:
    """Normalized height of a waypoint relative to an object of height h_obj.

    Rises linearly to 1 at the object height, then falls off proportionally
    to the remaining headroom up to the scene ceiling h_max.
    """
    if not (0 < h_obj < h_max):
        raise InvalidHeights(f"need 0 < h_obj < h_max, got h_obj={h_obj}, h_max={h_max}")
    if waypoint_z <= h_obj:
        value = waypoint_z / h_obj
    else:
        value = (h_max - waypoint_z) / h_max
    return float(min(1.0, max(0.0, value)))
