"""Persistence: dataset directory layout, schema validation, the append-only
label log, and canonical model serialization.

Dataset layout:
    <root>/environments/*.json   one environment per file (env.schema)
    <root>/trajectories/*.json   one trajectory per file (traj.schema)
    <root>/labels.jsonl          append-only label log (labels.schema per line)
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional

import jsonschema

from .affordance import ModelParameters
from .env import Environment, LabeledSegment, Trajectory
from .errors import DanglingReference, SchemaError

DATA_DIR_ENV_VAR = "PLANIT_DATA_DIR"


def _load_schema(name: str) -> dict:
    ref = resources.files("planit").joinpath("schemas", name)
    return json.loads(ref.read_text(encoding="utf-8"))


_SCHEMAS = {
    "env": _load_schema("env.schema"),
    "traj": _load_schema("traj.schema"),
    "labels": _load_schema("labels.schema"),
    "model": _load_schema("model.schema"),
}


def validate(payload: dict, schema_name: str, source: str = "<memory>") -> None:
    try:
        jsonschema.validate(payload, _SCHEMAS[schema_name])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(source, f"at {where}: {exc.message}") from None


def canonical_json(payload: dict) -> str:
    """Stable serialization: sorted keys, two-space indent, trailing newline.
    Python's repr-based float formatting round-trips exactly, so
    save -> load -> save is byte-identical."""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def save_model(params: ModelParameters, path) -> None:
    payload = params.to_dict()
    validate(payload, "model", str(path))
    Path(path).write_text(canonical_json(payload), encoding="utf-8")


def load_model(path) -> ModelParameters:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    validate(payload, "model", str(path))
    return ModelParameters.from_dict(payload)


def trained_at_timestamp() -> str:
    """Wall-clock UTC time, overridable via SOURCE_DATE_EPOCH for
    reproducible artifacts."""
    import datetime

    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = datetime.datetime.fromtimestamp(int(epoch), datetime.timezone.utc)
    else:
        moment = datetime.datetime.now(datetime.timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


class LabelStore:
    """Append-only log of labeled segments with a by-trajectory index."""

    def __init__(self):
        self.records: List[LabeledSegment] = []
        self._index: Dict[str, List[int]] = {}

    def append(self, record: LabeledSegment) -> int:
        self.records.append(record)
        idx = len(self.records) - 1
        self._index.setdefault(record.trajectory_id, []).append(idx)
        return idx

    def for_trajectory(self, trajectory_id: str) -> List[LabeledSegment]:
        return [self.records[i] for i in self._index.get(trajectory_id, [])]

    def index_hash(self) -> str:
        payload = json.dumps(
            {tid: idxs for tid, idxs in sorted(self._index.items())}, sort_keys=True
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    @classmethod
    def replay(cls, path) -> "LabelStore":
        store = cls()
        path = Path(path)
        if not path.exists():
            return store
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    payload = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"{path}:{line_no}", f"bad JSON: {exc}") from None
                validate(payload, "labels", f"{path}:{line_no}")
                store.append(LabeledSegment.from_dict(payload))
        return store

    def append_to_file(self, record: LabeledSegment, path) -> None:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


@dataclass
class DataStore:
    root: Optional[Path] = None
    environments: Dict[str, Environment] = field(default_factory=dict)
    trajectories: Dict[str, Trajectory] = field(default_factory=dict)
    labels: LabelStore = field(default_factory=LabelStore)

    @property
    def labels_path(self) -> Optional[Path]:
        return None if self.root is None else self.root / "labels.jsonl"

    def add_label(self, record: LabeledSegment) -> int:
        """Validate against the known trajectories, append to log and file."""
        traj = self.trajectories.get(record.trajectory_id)
        if traj is None:
            raise DanglingReference(
                f"label references unknown trajectory {record.trajectory_id!r}"
            )
        t0, t1 = float(traj.timestamps[0]), float(traj.timestamps[-1])
        if record.start_time < t0 - 1e-9 or record.end_time > t1 + 1e-9:
            raise ValueError(
                f"interval [{record.start_time}, {record.end_time}] outside "
                f"trajectory time range [{t0}, {t1}]"
            )
        idx = self.labels.append(record)
        if self.labels_path is not None:
            self.labels.append_to_file(record, self.labels_path)
        return idx


def _json_files(directory: Path):
    if not directory.is_dir():
        return []
    return sorted(p for p in directory.iterdir() if p.suffix == ".json")


def ingest(root) -> tuple:
    """Load and validate a dataset directory.

    Returns (DataStore, (n_environments, n_trajectories, n_labels)). Schema
    violations are fatal per file; labels referencing unknown trajectories
    raise DanglingReference naming the id.
    """
    root = Path(root)
    store = DataStore(root=root)

    for path in _json_files(root / "environments"):
        payload = json.loads(path.read_text(encoding="utf-8"))
        validate(payload, "env", str(path))
        try:
            env = Environment.from_dict(payload)
        except ValueError as exc:
            raise SchemaError(str(path), str(exc)) from None
        store.environments[env.id] = env

    for path in _json_files(root / "trajectories"):
        payload = json.loads(path.read_text(encoding="utf-8"))
        validate(payload, "traj", str(path))
        try:
            traj = Trajectory.from_dict(payload)
        except ValueError as exc:
            raise SchemaError(str(path), str(exc)) from None
        if traj.environment_id not in store.environments:
            raise DanglingReference(
                f"{path}: trajectory {traj.id!r} references unknown "
                f"environment {traj.environment_id!r}"
            )
        traj.validate_within(store.environments[traj.environment_id])
        store.trajectories[traj.id] = traj

    store.labels = LabelStore.replay(root / "labels.jsonl")
    for record in store.labels.records:
        if record.trajectory_id not in store.trajectories:
            raise DanglingReference(
                f"label references unknown trajectory {record.trajectory_id!r}"
            )

    counts = (len(store.environments), len(store.trajectories), len(store.labels.records))
    return store, counts


def save_dataset(root, environments, trajectories, labels) -> None:
    """Write a dataset in the canonical layout (used by the synthesizer)."""
    root = Path(root)
    (root / "environments").mkdir(parents=True, exist_ok=True)
    (root / "trajectories").mkdir(parents=True, exist_ok=True)
    for env in environments:
        payload = env.to_dict()
        validate(payload, "env", env.id)
        (root / "environments" / f"{env.id}.json").write_text(
            canonical_json(payload), encoding="utf-8"
        )
    for traj in trajectories:
        payload = traj.to_dict()
        validate(payload, "traj", traj.id)
        (root / "trajectories" / f"{traj.id}.json").write_text(
            canonical_json(payload), encoding="utf-8"
        )
    with open(root / "labels.jsonl", "w", encoding="utf-8") as fh:
        for record in labels:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


def default_data_dir(explicit=None) -> Path:
    if explicit:
        return Path(explicit)
    env_value = os.environ.get(DATA_DIR_ENV_VAR)
    if env_value:
        return Path(env_value)
    raise ValueError(
        f"no data directory given and {DATA_DIR_ENV_VAR} is not set"
    )
