"""HTTP API hosting the labeling loop: environments and trajectories out,
labels in, retraining jobs, and heatmaps for the viewer.

Reads stay available while a training job runs; the served model is swapped
atomically when the job completes. One training job at a time.
"""
from __future__ import annotations

import threading
import traceback
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import em, store as store_mod
from .affordance import ModelParameters
from .env import LabeledSegment
from .errors import (
    DanglingReference,
    EmptyTrainingSet,
    NoActivities,
    ResolutionTooCoarse,
    SchemaError,
)
from .planner import rasterize
from .store import DataStore, save_model, trained_at_timestamp


class LabelIn(BaseModel):
    trajectory_id: str
    start_time: float
    end_time: float
    label: str
    annotator_id: str


class TrainIn(BaseModel):
    max_iters: int = Field(default=60, ge=0)
    tol: float = Field(default=1e-6, gt=0)
    seed: int = 0
    restarts: int = Field(default=2, ge=1)


class JobRecord:
    TERMINAL = ("done", "failed")

    def __init__(self, job_id: str, kind: str):
        self.job_id = job_id
        self.kind = kind
        self.status = "running"
        self.detail = ""
        self.artifacts: dict = {}

    def finish(self, status: str, detail: str = "", **artifacts):
        if self.status in self.TERMINAL:
            raise RuntimeError("terminal job records are immutable")
        self.status = status
        self.detail = detail
        self.artifacts.update(artifacts)

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "status": self.status,
            "detail": self.detail,
            "artifacts": self.artifacts,
        }


class ServiceState:
    def __init__(self, data_store: DataStore, model: Optional[ModelParameters] = None,
                 artifact_dir: Optional[Path] = None):
        self.store = data_store
        self.model = model
        self.artifact_dir = artifact_dir
        self.jobs: dict = {}
        self.write_lock = threading.Lock()
        self.train_lock = threading.Lock()
        self.training_active = False
        self._job_counter = 0

    def next_job_id(self) -> str:
        self._job_counter += 1
        return f"job-{self._job_counter:04d}"


def _run_training(state: ServiceState, job: JobRecord, spec: TrainIn):
    try:
        training = em.build_training_set(
            list(state.store.environments.values()),
            list(state.store.trajectories.values()),
            list(state.store.labels.records),
        )
        config = em.EMConfig(
            max_iters=spec.max_iters, tol=spec.tol, seed=spec.seed, restarts=spec.restarts
        )
        params, trace = em.fit(training, config)
        params = ModelParameters(
            params.registry,
            version=params.version,
            trained_at=trained_at_timestamp(),
            iteration_count=params.iteration_count,
        )
        initial_ll = trace.restart_entries(trace.best_restart)[0].avg_log_likelihood
        final_ll = trace.restart_entries(trace.best_restart)[-1].avg_log_likelihood
        artifacts = {
            "initial_avg_log_likelihood": initial_ll,
            "final_avg_log_likelihood": final_ll,
            "iterations": len(trace.restart_entries(trace.best_restart)) - 1,
        }
        if state.artifact_dir is not None:
            state.artifact_dir.mkdir(parents=True, exist_ok=True)
            model_path = state.artifact_dir / f"{job.job_id}-model.json"
            save_model(params, model_path)
            artifacts["model_path"] = str(model_path)
        state.model = params
        job.finish("done", **artifacts)
    except Exception as exc:  # job records carry the failure, the server survives
        job.finish("failed", detail=f"{type(exc).__name__}: {exc}")
        traceback.print_exc()
    finally:
        state.training_active = False


def create_app(
    data_store: DataStore,
    model: Optional[ModelParameters] = None,
    artifact_dir=None,
) -> FastAPI:
    state = ServiceState(
        data_store, model, Path(artifact_dir) if artifact_dir is not None else None
    )
    app = FastAPI(title="planit", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.planit = state

    @app.get("/environments")
    def list_environments():
        return [
            {
                "id": env.id,
                "bounds": env.bounds.to_dict(),
                "n_activities": len(env.activities),
                "n_objects": len(env.objects),
            }
            for _, env in sorted(state.store.environments.items())
        ]

    @app.get("/environments/{env_id}")
    def get_environment(env_id: str):
        env = state.store.environments.get(env_id)
        if env is None:
            raise HTTPException(status_code=404, detail=f"unknown environment {env_id!r}")
        return env.to_dict()

    @app.get("/trajectories")
    def list_trajectories(env: Optional[str] = Query(default=None)):
        out = []
        for _, traj in sorted(state.store.trajectories.items()):
            if env is not None and traj.environment_id != env:
                continue
            out.append(
                {
                    "id": traj.id,
                    "environment_id": traj.environment_id,
                    "duration": traj.duration,
                    "n_waypoints": len(traj.waypoints),
                }
            )
        return out

    @app.get("/trajectories/{traj_id}")
    def get_trajectory(traj_id: str):
        traj = state.store.trajectories.get(traj_id)
        if traj is None:
            raise HTTPException(status_code=404, detail=f"unknown trajectory {traj_id!r}")
        return traj.to_dict()

    @app.get("/labels")
    def list_labels(trajectory: Optional[str] = Query(default=None)):
        if trajectory is not None:
            records = state.store.labels.for_trajectory(trajectory)
        else:
            records = state.store.labels.records
        return [r.to_dict() for r in records]

    @app.post("/labels", status_code=201)
    def post_label(label: LabelIn):
        payload = label.model_dump()
        try:
            store_mod.validate(payload, "labels", "POST /labels")
            record = LabeledSegment.from_dict(payload)
        except (SchemaError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if record.trajectory_id not in state.store.trajectories:
            raise HTTPException(
                status_code=404,
                detail=f"unknown trajectory {record.trajectory_id!r}",
            )
        with state.write_lock:
            try:
                state.store.add_label(record)
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
        return record.to_dict()

    @app.get("/model")
    def get_model():
        if state.model is None:
            raise HTTPException(status_code=404, detail="no model trained or loaded yet")
        return state.model.to_dict()

    @app.get("/heatmap")
    def get_heatmap(
        env: str,
        res: float = Query(default=0.05, gt=0),
        format: str = Query(default="json", pattern="^(json|binary)$"),
    ):
        environment = state.store.environments.get(env)
        if environment is None:
            raise HTTPException(status_code=404, detail=f"unknown environment {env!r}")
        if state.model is None:
            raise HTTPException(status_code=404, detail="no model trained or loaded yet")
        try:
            grid = rasterize(environment, state.model, resolution=res)
        except (ResolutionTooCoarse, NoActivities) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if format == "binary":
            return Response(content=grid.to_bytes(), media_type="application/octet-stream")
        return {
            "environment_id": env,
            "origin": grid.origin.tolist(),
            "resolution": grid.resolution,
            "width": grid.width,
            "height": grid.height,
            "values": grid.values.tolist(),
            "obstacle_mask": grid.obstacle_mask.astype(int).tolist(),
        }

    @app.post("/train", status_code=202)
    def post_train(spec: TrainIn):
        with state.train_lock:
            if state.training_active:
                raise HTTPException(status_code=409, detail="a training job is already running")
            if not any(r.label == "bad" for r in state.store.labels.records):
                raise HTTPException(status_code=400, detail="no bad-labeled segments to train on")
            state.training_active = True
            job = JobRecord(state.next_job_id(), "train")
            state.jobs[job.job_id] = job
        worker = threading.Thread(target=_run_training, args=(state, job, spec), daemon=True)
        worker.start()
        return {"job_id": job.job_id}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return job.to_dict()

    return app


def serve(data_dir, port: int = 8080, model_path=None, host: str = "127.0.0.1"):
    """Ingest a dataset directory and serve the API (blocking)."""
    import uvicorn

    data_store, _ = store_mod.ingest(data_dir)
    model = store_mod.load_model(model_path) if model_path else None
    app = create_app(data_store, model, artifact_dir=Path(data_dir) / "models")
    uvicorn.run(app, host=host, port=port)
