/** Browser wiring: DOM controls around the playback state, the canvas
 * renderer and the API client. All server interaction goes through
 * ApiClient; the base URL is the only configuration.
 */
import {
  ApiClient,
  type EnvironmentDetail,
  type HeatmapPayload,
  type LabelName,
  type TrajectoryDetail,
} from "./api.js";
import { refreshLabels, submitPending } from "./controller.js";
import { buildScene, drawScene } from "./scene.js";
import { labelForKey, PlaybackState } from "./state.js";
import { LABEL_COLORS, timeToPixel, TimelineDrag } from "./timeline.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

interface AppState {
  api: ApiClient;
  env: EnvironmentDetail | null;
  trajectory: TrajectoryDetail | null;
  playback: PlaybackState | null;
  heatmap: HeatmapPayload | null;
  showHeatmap: boolean;
  brush: LabelName;
  annotator: string;
}

function statusLine(text: string, isError = false): void {
  const el = $("status");
  el.textContent = text;
  el.classList.toggle("error", isError);
}

async function loadEnvironments(app: AppState): Promise<void> {
  const select = $<HTMLSelectElement>("env-select");
  const envs = await app.api.environments();
  select.innerHTML = "";
  for (const env of envs) {
    const option = document.createElement("option");
    option.value = env.id;
    option.textContent = `${env.id} (${env.n_activities} activities)`;
    select.appendChild(option);
  }
  if (envs.length) await selectEnvironment(app, envs[0]!.id);
}

async function selectEnvironment(app: AppState, envId: string): Promise<void> {
  app.env = await app.api.environment(envId);
  app.heatmap = null;
  const select = $<HTMLSelectElement>("traj-select");
  const trajs = await app.api.trajectories(envId);
  select.innerHTML = "";
  for (const traj of trajs) {
    const option = document.createElement("option");
    option.value = traj.id;
    option.textContent = `${traj.id} (${traj.duration.toFixed(1)}s)`;
    select.appendChild(option);
  }
  if (trajs.length) await selectTrajectory(app, trajs[0]!.id);
  if (app.showHeatmap) await loadHeatmap(app);
}

async function selectTrajectory(app: AppState, trajId: string): Promise<void> {
  app.trajectory = await app.api.trajectory(trajId);
  app.playback = new PlaybackState(app.trajectory);
  await refreshLabels(app.api, app.playback);
  renderTimeline(app);
}

async function loadHeatmap(app: AppState): Promise<void> {
  if (!app.env) return;
  statusLine("loading heatmap…");
  try {
    app.heatmap = await app.api.heatmap(app.env.id, 0.15);
    statusLine(
      `heatmap ${app.heatmap.width}x${app.heatmap.height} @ ${app.heatmap.resolution} m`,
    );
  } catch (err) {
    app.heatmap = null;
    statusLine(`heatmap unavailable: ${String(err)}`, true);
  }
}

function renderTimeline(app: AppState): void {
  const bar = $("timeline");
  bar.querySelectorAll(".interval").forEach((el) => el.remove());
  const playback = app.playback;
  if (!playback) return;
  const width = bar.clientWidth || 600;
  const place = (
    start: number,
    end: number,
    label: LabelName,
    pendingError?: string,
  ) => {
    const div = document.createElement("div");
    div.className = "interval" + (pendingError !== undefined ? " pending" : "");
    if (pendingError) div.classList.add("rejected");
    const x0 = timeToPixel(start, width, playback.startTime, playback.endTime);
    const x1 = timeToPixel(end, width, playback.startTime, playback.endTime);
    div.style.left = `${x0}px`;
    div.style.width = `${Math.max(2, x1 - x0)}px`;
    div.style.background = LABEL_COLORS[label];
    div.title = pendingError ?? `${label} [${start.toFixed(1)}, ${end.toFixed(1)}]`;
    bar.appendChild(div);
  };
  for (const rec of playback.acknowledged) {
    place(rec.start_time, rec.end_time, rec.label);
  }
  for (const interval of playback.pending) {
    place(interval.start, interval.end, interval.label, interval.error ?? "");
  }
}

function renderFrame(app: AppState, canvas: HTMLCanvasElement): void {
  if (!app.env) return;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const items = buildScene(
    app.env,
    app.trajectory,
    app.playback?.time ?? 0,
    app.showHeatmap ? app.heatmap : null,
  );
  drawScene(ctx, items, app.env.bounds, canvas.width, canvas.height);
  const cursor = $("cursor");
  if (app.playback) {
    const width = $("timeline").clientWidth || 600;
    cursor.style.left = `${timeToPixel(
      app.playback.time,
      width,
      app.playback.startTime,
      app.playback.endTime,
    )}px`;
    $("clock").textContent = `${app.playback.time.toFixed(2)} s`;
  }
}

export function start(): void {
  const baseInput = $<HTMLInputElement>("base-url");
  baseInput.value = localStorage.getItem("planit-base-url") ?? "http://127.0.0.1:8080";

  const app: AppState = {
    api: new ApiClient(baseInput.value),
    env: null,
    trajectory: null,
    playback: null,
    heatmap: null,
    showHeatmap: false,
    brush: "bad",
    annotator: localStorage.getItem("planit-annotator") ?? `web-${Date.now() % 10000}`,
  };
  localStorage.setItem("planit-annotator", app.annotator);

  const canvas = $<HTMLCanvasElement>("scene");
  const timeline = $("timeline");
  const drag = new TimelineDrag();

  baseInput.addEventListener("change", () => {
    localStorage.setItem("planit-base-url", baseInput.value);
    app.api = new ApiClient(baseInput.value);
    loadEnvironments(app).catch((err) => statusLine(String(err), true));
  });

  $<HTMLSelectElement>("env-select").addEventListener("change", (ev) => {
    selectEnvironment(app, (ev.target as HTMLSelectElement).value).catch((err) =>
      statusLine(String(err), true),
    );
  });
  $<HTMLSelectElement>("traj-select").addEventListener("change", (ev) => {
    selectTrajectory(app, (ev.target as HTMLSelectElement).value).catch((err) =>
      statusLine(String(err), true),
    );
  });

  $("play").addEventListener("click", () => {
    if (app.playback) {
      if (!app.playback.playing && app.playback.time >= app.playback.endTime) {
        app.playback.seek(app.playback.startTime);
      }
      app.playback.playing = !app.playback.playing;
    }
  });
  $<HTMLInputElement>("speed").addEventListener("change", (ev) => {
    if (app.playback) {
      app.playback.speed = Number((ev.target as HTMLInputElement).value) || 1;
    }
  });

  for (const label of ["bad", "neutral", "good"] as LabelName[]) {
    $(`brush-${label}`).addEventListener("click", () => {
      app.brush = label;
      statusLine(`brush: ${label}`);
    });
  }
  document.addEventListener("keydown", (ev) => {
    const label = labelForKey(ev.key);
    if (label) {
      app.brush = label;
      statusLine(`brush: ${label}`);
    }
  });

  timeline.addEventListener("pointerdown", (ev) => {
    drag.begin(ev.offsetX);
  });
  timeline.addEventListener("pointermove", (ev) => {
    drag.update(ev.offsetX);
  });
  timeline.addEventListener("pointerup", (ev) => {
    drag.update(ev.offsetX);
    const playback = app.playback;
    if (!playback) return;
    const width = timeline.clientWidth || 600;
    const interval = drag.finish(width, playback.startTime, playback.endTime);
    if (!interval) return;
    const result = playback.paint(interval.start, interval.end, app.brush);
    if (!result.ok) statusLine(`not painted: ${result.reason}`, true);
    renderTimeline(app);
  });

  $("submit").addEventListener("click", async () => {
    if (!app.playback) return;
    const outcome = await submitPending(app.api, app.playback, app.annotator);
    await refreshLabels(app.api, app.playback);
    renderTimeline(app);
    const rejects = outcome.rejected.length
      ? `, ${outcome.rejected.length} rejected (${outcome.rejected[0]!.reason})`
      : "";
    statusLine(
      `${outcome.submitted.length} label(s) stored${rejects}`,
      outcome.rejected.length > 0,
    );
  });

  $<HTMLInputElement>("heatmap-toggle").addEventListener("change", async (ev) => {
    app.showHeatmap = (ev.target as HTMLInputElement).checked;
    if (app.showHeatmap && !app.heatmap) await loadHeatmap(app);
  });

  $("retrain").addEventListener("click", async () => {
    statusLine("training…");
    try {
      const job = await app.api.retrainAndWait({}, 500, (j) =>
        statusLine(`training: ${j.status}`),
      );
      if (job.status === "done") {
        statusLine(
          `training done (avg LL ${String(
            job.artifacts["final_avg_log_likelihood"],
          )})`,
        );
        if (app.showHeatmap) await loadHeatmap(app);
      } else {
        statusLine(`training failed: ${job.detail}`, true);
      }
    } catch (err) {
      statusLine(`training error: ${String(err)}`, true);
    }
  });

  let lastFrame = performance.now();
  const loop = (now: number) => {
    app.playback?.tick(now - lastFrame);
    lastFrame = now;
    renderFrame(app, canvas);
    requestAnimationFrame(loop);
  };

  loadEnvironments(app)
    .then(() => statusLine("ready"))
    .catch((err) => statusLine(String(err), true));
  requestAnimationFrame(loop);
}

start();
