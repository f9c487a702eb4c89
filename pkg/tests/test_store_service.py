import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from planit import evaluation as ev
from planit.affordance import ModelParameters
from planit.env import LabeledSegment
from planit.errors import DanglingReference, SchemaError
from planit.service import create_app
from planit.store import (
    DataStore,
    LabelStore,
    canonical_json,
    ingest,
    load_model,
    save_dataset,
    save_model,
)


@pytest.fixture()
def tiny_dataset(tmp_path):
    rng = np.random.default_rng(11)
    true = ev.default_true_model()
    config = ev.SynthConfig(trajectories_per_env=6)
    envs, trajs, labels = [], [], []
    for i in range(2):
        env = ev.make_environment(f"env-{i:02d}", rng)
        envs.append(env)
        t, l = ev.synthesize_feedback(env, true, config, rng)
        trajs += t
        labels += l
    root = tmp_path / "data"
    save_dataset(root, envs, trajs, labels)
    return root, envs, trajs, labels


class TestIngest:
    def test_empty_directory(self, tmp_path):
        _, counts = ingest(tmp_path)
        assert counts == (0, 0, 0)

    def test_counts(self, tmp_path):
        env = ev.make_environment("e1", np.random.default_rng(0))
        from planit.env import Trajectory

        traj = Trajectory("t1", "e1", [(2.0, 2.0), (5.0, 5.0)], [0.0, 3.0])
        labels = [
            LabeledSegment("t1", 0.0, 1.0, "bad", "a"),
            LabeledSegment("t1", 1.0, 2.0, "good", "a"),
        ]
        save_dataset(tmp_path, [env], [traj], labels)
        _, counts = ingest(tmp_path)
        assert counts == (1, 1, 2)

    def test_dangling_label(self, tmp_path):
        env = ev.make_environment("e1", np.random.default_rng(0))
        save_dataset(tmp_path, [env], [], [LabeledSegment("ghost", 0.0, 1.0, "bad", "a")])
        with pytest.raises(DanglingReference, match="ghost"):
            ingest(tmp_path)

    def test_schema_violation_names_file_and_field(self, tmp_path):
        envdir = tmp_path / "environments"
        envdir.mkdir(parents=True)
        bad = {"id": "e1", "bounds": {"xmin": 0, "ymin": 0, "xmax": "wide", "ymax": 1}}
        (envdir / "e1.json").write_text(json.dumps(bad))
        with pytest.raises(SchemaError) as err:
            ingest(tmp_path)
        assert "e1.json" in str(err.value)
        assert "xmax" in str(err.value)


class TestModelSerialization:
    def test_save_load_save_byte_identical(self, tmp_path):
        params = ev.default_true_model()
        p1 = tmp_path / "m1.json"
        p2 = tmp_path / "m2.json"
        save_model(params, p1)
        again = load_model(p1)
        save_model(again, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_validates_on_load(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"version": 1, "activities": {"watching": {}}}))
        with pytest.raises(SchemaError):
            load_model(path)


class TestLabelStore:
    def test_replay_reconstructs_index(self, tmp_path):
        store = LabelStore()
        records = [
            LabeledSegment("t1", 0.0, 1.0, "bad", "a"),
            LabeledSegment("t2", 0.5, 2.0, "good", "b"),
            LabeledSegment("t1", 1.0, 2.0, "neutral", "a"),
        ]
        path = tmp_path / "labels.jsonl"
        for rec in records:
            store.append(rec)
            store.append_to_file(rec, path)
        replayed = LabelStore.replay(path)
        assert replayed.index_hash() == store.index_hash()
        assert [r.to_dict() for r in replayed.records] == [r.to_dict() for r in records]
        assert len(replayed.for_trajectory("t1")) == 2


@pytest.fixture()
def client(tiny_dataset):
    root, envs, trajs, labels = tiny_dataset
    data_store, counts = ingest(root)
    assert counts[0] == 2
    app = create_app(data_store, model=None, artifact_dir=root / "models")
    return TestClient(app), data_store


class TestService:
    def test_environment_endpoints(self, client):
        api, store = client
        listing = api.get("/environments").json()
        assert len(listing) == 2
        env_id = listing[0]["id"]
        full = api.get(f"/environments/{env_id}")
        assert full.status_code == 200
        assert full.json()["id"] == env_id
        assert api.get("/environments/nope").status_code == 404

    def test_trajectory_endpoints(self, client):
        api, store = client
        env_id = api.get("/environments").json()[0]["id"]
        listing = api.get("/trajectories", params={"env": env_id}).json()
        assert listing and all(t["environment_id"] == env_id for t in listing)
        tid = listing[0]["id"]
        full = api.get(f"/trajectories/{tid}").json()
        assert len(full["waypoints"]) == len(full["timestamps"])
        assert api.get("/trajectories/nope").status_code == 404

    def test_label_round_trip(self, client):
        api, store = client
        tid = api.get("/trajectories").json()[0]["id"]
        body = {
            "trajectory_id": tid,
            "start_time": 0.5,
            "end_time": 1.5,
            "label": "bad",
            "annotator_id": "tester",
        }
        posted = api.post("/labels", json=body)
        assert posted.status_code == 201
        log = api.get("/labels", params={"trajectory": tid}).json()
        stored = [r for r in log if r["annotator_id"] == "tester"]
        assert len(stored) == 1
        assert stored[0]["start_time"] == 0.5 and stored[0]["label"] == "bad"

    def test_label_validation(self, client):
        api, _ = client
        tid = api.get("/trajectories").json()[0]["id"]
        bad_interval = {
            "trajectory_id": tid,
            "start_time": 2.0,
            "end_time": 2.0,
            "label": "bad",
            "annotator_id": "t",
        }
        assert api.post("/labels", json=bad_interval).status_code == 400
        out_of_range = dict(bad_interval, start_time=0.0, end_time=99.0)
        assert api.post("/labels", json=out_of_range).status_code == 400
        unknown = dict(bad_interval, trajectory_id="ghost", end_time=3.0)
        assert api.post("/labels", json=unknown).status_code == 404
        bad_label = dict(bad_interval, end_time=3.0, label="meh")
        assert api.post("/labels", json=bad_label).status_code in (400, 422)

    def test_model_404_before_training(self, client):
        api, _ = client
        assert api.get("/model").status_code == 404
        env_id = api.get("/environments").json()[0]["id"]
        assert api.get("/heatmap", params={"env": env_id}).status_code == 404

    def test_conflict_while_training(self, client):
        api, _ = client
        api.app.state.planit.training_active = True
        try:
            assert api.post("/train", json={}).status_code == 409
        finally:
            api.app.state.planit.training_active = False

    def test_train_job_completes_and_improves_likelihood(self, client):
        api, _ = client
        job = api.post("/train", json={"max_iters": 20, "restarts": 2, "seed": 4})
        assert job.status_code == 202
        job_id = job.json()["job_id"]
        for _ in range(300):
            record = api.get(f"/jobs/{job_id}").json()
            if record["status"] in ("done", "failed"):
                break
            time.sleep(0.1)
        assert record["status"] == "done", record
        arts = record["artifacts"]
        assert arts["final_avg_log_likelihood"] >= arts["initial_avg_log_likelihood"]
        model = api.get("/model")
        assert model.status_code == 200
        assert model.json()["activities"]

    def test_heatmap_json_and_binary(self, client, tmp_path):
        api, _ = client
        # load a model first
        api.app.state.planit.model = ev.default_true_model()
        env_id = api.get("/environments").json()[0]["id"]
        payload = api.get("/heatmap", params={"env": env_id, "res": 0.5}).json()
        assert payload["width"] >= 10 and payload["height"] >= 10
        assert len(payload["values"]) == payload["height"]
        assert len(payload["values"][0]) == payload["width"]

        binary = api.get(
            "/heatmap", params={"env": env_id, "res": 0.5, "format": "binary"}
        )
        assert binary.headers["content-type"].startswith("application/octet-stream")
        from planit.planner import CostMap

        grid = CostMap.from_bytes(binary.content)
        assert grid.width == payload["width"]
        assert np.allclose(grid.values, np.asarray(payload["values"]))

    def test_get_stability_without_writes(self, client):
        api, _ = client
        api.app.state.planit.model = ev.default_true_model()
        env_id = api.get("/environments").json()[0]["id"]
        for path, params in [
            ("/environments", None),
            (f"/environments/{env_id}", None),
            ("/heatmap", {"env": env_id, "res": 0.5, "format": "binary"}),
        ]:
            a = api.get(path, params=params)
            b = api.get(path, params=params)
            assert a.content == b.content

    def test_jobs_404(self, client):
        api, _ = client
        assert api.get("/jobs/nope").status_code == 404
