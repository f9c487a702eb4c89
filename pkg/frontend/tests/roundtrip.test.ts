/** Contract tests against the mocked API: the paint -> submit -> refresh
 * loop, error surfacing, the heatmap overlay, and the retrain flow.
 */
import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { refreshLabels, submitPending } from "../src/controller.js";
import { buildScene } from "../src/scene.js";
import { PlaybackState } from "../src/state.js";
import { MockServer } from "./mockServer.js";

let server: MockServer;
let api: ApiClient;

beforeEach(() => {
  server = new MockServer();
  api = new ApiClient("http://mock", server.fetch);
});

async function freshPlayback(): Promise<PlaybackState> {
  const traj = await api.trajectory("traj-0000");
  return new PlaybackState(traj);
}

describe("label round trip", () => {
  it("three painted intervals become exactly three matching server records", async () => {
    const playback = await freshPlayback();
    expect(playback.paint(0.2, 1.0, "bad").ok).toBe(true);
    expect(playback.paint(2.0, 3.5, "neutral").ok).toBe(true);
    expect(playback.paint(4.0, 5.5, "good").ok).toBe(true);

    const outcome = await submitPending(api, playback, "tester");
    expect(outcome.submitted).toHaveLength(3);
    expect(outcome.rejected).toHaveLength(0);
    expect(playback.pending).toHaveLength(0);
    expect(server.labels).toHaveLength(3);

    const wanted = [
      { start_time: 0.2, end_time: 1.0, label: "bad" },
      { start_time: 2.0, end_time: 3.5, label: "neutral" },
      { start_time: 4.0, end_time: 5.5, label: "good" },
    ];
    for (const [i, want] of wanted.entries()) {
      expect(server.labels[i]).toMatchObject({
        ...want,
        trajectory_id: "traj-0000",
        annotator_id: "tester",
      });
    }

    // round-trip fidelity: a refresh shows exactly the server's log
    const refreshed = await refreshLabels(api, playback);
    expect(
      refreshed.map((r) => ({
        start_time: r.start_time,
        end_time: r.end_time,
        label: r.label,
      })),
    ).toEqual(wanted);
  });

  it("server rejections stay pending with the reason attached", async () => {
    const playback = await freshPlayback();
    expect(playback.paint(0.5, 1.5, "bad").ok).toBe(true);
    // forge an out-of-range interval to simulate a stale client
    playback.pending.push({ start: 2.0, end: 99.0, label: "good" });

    const outcome = await submitPending(api, playback, "tester");
    expect(outcome.submitted).toHaveLength(1);
    expect(outcome.rejected).toHaveLength(1);
    expect(outcome.rejected[0]!.reason).toContain("time range");
    expect(playback.pending).toHaveLength(1);
    expect(playback.pending[0]!.error).toContain("time range");
    expect(server.labels).toHaveLength(1);
  });

  it("unknown trajectories yield a 404 ApiError", async () => {
    await expect(
      api.submitLabel({
        trajectory_id: "ghost",
        start_time: 0,
        end_time: 1,
        label: "bad",
        annotator_id: "t",
      }),
    ).rejects.toThrowError(ApiError);
  });
});

describe("heatmap overlay", () => {
  it("overlay grid dimensions match the endpoint payload", async () => {
    server.modelTrained = true;
    const env = await api.environment("env-0000");
    const payload = await api.heatmap("env-0000", 0.2);
    const items = buildScene(env, null, 0, payload);
    const grid = items.find((i) => i.kind === "heatmap");
    expect(grid).toBeDefined();
    if (grid?.kind === "heatmap") {
      expect([grid.width, grid.height]).toEqual([payload.width, payload.height]);
    }
  });

  it("is a 404 until a model exists", async () => {
    await expect(api.heatmap("env-0000", 0.2)).rejects.toMatchObject({
      status: 404,
    });
  });
});

describe("retrain flow", () => {
  it("posts /train, polls to terminal, and the final LL beats the initial", async () => {
    const playback = await freshPlayback();
    playback.paint(0.2, 1.0, "bad");
    await submitPending(api, playback, "tester");

    const statuses: string[] = [];
    const job = await api.retrainAndWait({}, 1, (j) => statuses.push(j.status));
    expect(job.status).toBe("done");
    expect(statuses[0]).toBe("running");
    const initial = job.artifacts["initial_avg_log_likelihood"] as number;
    const final = job.artifacts["final_avg_log_likelihood"] as number;
    expect(final).toBeGreaterThanOrEqual(initial);

    const model = await api.model();
    expect(model["activities"]).toBeDefined();
    const protocol = server.requests.map((r) => `${r.method} ${r.path}`);
    expect(protocol).toContain("POST /train");
    expect(protocol.filter((p) => p.startsWith("GET /jobs/"))).not.toHaveLength(0);
  });

  it("surfaces 409 when training is already running", async () => {
    const playback = await freshPlayback();
    playback.paint(0.2, 1.0, "bad");
    await submitPending(api, playback, "tester");
    server.trainingActive = true;
    await expect(api.train({})).rejects.toMatchObject({ status: 409 });
  });
});
