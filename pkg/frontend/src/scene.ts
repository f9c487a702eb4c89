/** Build a drawable scene from API payloads.
 *
 * buildScene is pure: it turns (environment, trajectory, time, heatmap?)
 * into primitives in world coordinates, so tests can assert what would be
 * drawn without a canvas. drawScene rasterizes those primitives.
 */
import type {
  EnvironmentDetail,
  HeatmapPayload,
  TrajectoryDetail,
} from "./api.js";
import { interpolatePosition } from "./state.js";

export type SceneItem =
  | {
      kind: "heatmap";
      origin: [number, number];
      resolution: number;
      width: number;
      height: number;
      /** normalized [0,1] intensities, row-major, straight from the payload values */
      intensity: number[][];
      minValue: number;
      maxValue: number;
    }
  | { kind: "polygon"; points: [number, number][]; color: string }
  | { kind: "path"; points: [number, number][]; color: string; width: number }
  | {
      kind: "circle";
      center: [number, number];
      radius: number;
      color: string;
      role: "human" | "object" | "robot" | "clutter";
    }
  | { kind: "label"; at: [number, number]; text: string };

export function heatmapItem(payload: HeatmapPayload): SceneItem {
  let min = Infinity;
  let max = -Infinity;
  for (const row of payload.values) {
    for (const v of row) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  const span = max > min ? max - min : 1;
  // log-scale compresses the heavy tail the same way the server-side viewer does
  const logMin = Math.log10(Math.max(min, 1e-300));
  const logMax = Math.log10(Math.max(max, 1e-300));
  const logSpan = logMax > logMin ? logMax - logMin : 1;
  const intensity = payload.values.map((row) =>
    row.map(
      (v) => (Math.log10(Math.max(v, 1e-300)) - logMin) / logSpan,
    ),
  );
  return {
    kind: "heatmap",
    origin: payload.origin,
    resolution: payload.resolution,
    width: payload.width,
    height: payload.height,
    intensity,
    minValue: min,
    maxValue: max,
  };
}

export function buildScene(
  env: EnvironmentDetail,
  trajectory: TrajectoryDetail | null,
  time: number,
  heatmap: HeatmapPayload | null,
): SceneItem[] {
  const items: SceneItem[] = [];
  if (heatmap) items.push(heatmapItem(heatmap));
  for (const poly of env.obstacles) {
    items.push({ kind: "polygon", points: poly, color: "#555" });
  }
  for (const obj of env.objects) {
    items.push({
      kind: "circle",
      center: obj.position,
      radius: 0.12,
      color: "#8a5a2b",
      role: "clutter",
    });
  }
  for (const act of env.activities) {
    items.push({
      kind: "path",
      points: [act.human.position, act.object.position],
      color: "#4a90d9",
      width: 0.03,
    });
    items.push({
      kind: "circle",
      center: act.human.position,
      radius: 0.2,
      color: "#2d6cdf",
      role: "human",
    });
    items.push({
      kind: "circle",
      center: act.object.position,
      radius: 0.15,
      color: "#e8883a",
      role: "object",
    });
    items.push({
      kind: "label",
      at: act.human.position,
      text: act.activity_type,
    });
  }
  if (trajectory) {
    items.push({
      kind: "path",
      points: trajectory.waypoints,
      color: "#9be29b",
      width: 0.02,
    });
    items.push({
      kind: "circle",
      center: interpolatePosition(trajectory, time),
      radius: 0.22,
      color: "#18c018",
      role: "robot",
    });
  }
  return items;
}

/** World-to-pixel transform for a bounds rectangle on a canvas. */
export function viewTransform(
  bounds: { xmin: number; ymin: number; xmax: number; ymax: number },
  canvasWidth: number,
  canvasHeight: number,
) {
  const scale = Math.min(
    canvasWidth / (bounds.xmax - bounds.xmin),
    canvasHeight / (bounds.ymax - bounds.ymin),
  );
  return {
    scale,
    toPixel(p: [number, number]): [number, number] {
      return [
        (p[0] - bounds.xmin) * scale,
        canvasHeight - (p[1] - bounds.ymin) * scale,
      ];
    },
  };
}

function heatColor(intensity: number): string {
  // dark violet -> orange -> light yellow
  const t = Math.min(1, Math.max(0, intensity));
  const r = Math.round(30 + 225 * Math.min(1, t * 1.6));
  const g = Math.round(12 + 200 * Math.max(0, t - 0.35) * 1.54);
  const b = Math.round(60 + 120 * Math.max(0, 0.35 - t));
  return `rgb(${r},${g},${b})`;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  items: SceneItem[],
  bounds: { xmin: number; ymin: number; xmax: number; ymax: number },
  canvasWidth: number,
  canvasHeight: number,
): void {
  const view = viewTransform(bounds, canvasWidth, canvasHeight);
  ctx.clearRect(0, 0, canvasWidth, canvasHeight);
  ctx.fillStyle = "#101018";
  ctx.fillRect(0, 0, canvasWidth, canvasHeight);
  for (const item of items) {
    if (item.kind === "heatmap") {
      const cell = item.resolution * view.scale;
      for (let row = 0; row < item.height; row++) {
        for (let col = 0; col < item.width; col++) {
          const world: [number, number] = [
            item.origin[0] + col * item.resolution,
            item.origin[1] + (row + 1) * item.resolution,
          ];
          const [px, py] = view.toPixel(world);
          ctx.fillStyle = heatColor(item.intensity[row]![col]!);
          ctx.globalAlpha = 0.75;
          ctx.fillRect(px, py, cell + 0.5, cell + 0.5);
        }
      }
      ctx.globalAlpha = 1.0;
    } else if (item.kind === "polygon") {
      ctx.beginPath();
      item.points.forEach((p, i) => {
        const [px, py] = view.toPixel(p);
        if (i === 0) ctx.moveTo(px, py);
        else ctx.lineTo(px, py);
      });
      ctx.closePath();
      ctx.fillStyle = item.color;
      ctx.fill();
    } else if (item.kind === "path") {
      ctx.beginPath();
      item.points.forEach((p, i) => {
        const [px, py] = view.toPixel(p);
        if (i === 0) ctx.moveTo(px, py);
        else ctx.lineTo(px, py);
      });
      ctx.strokeStyle = item.color;
      ctx.lineWidth = Math.max(1, item.width * view.scale);
      ctx.stroke();
    } else if (item.kind === "circle") {
      const [px, py] = view.toPixel(item.center);
      ctx.beginPath();
      ctx.arc(px, py, Math.max(2, item.radius * view.scale), 0, 2 * Math.PI);
      ctx.fillStyle = item.color;
      ctx.fill();
    } else {
      const [px, py] = view.toPixel(item.at);
      ctx.fillStyle = "#ddd";
      ctx.font = "11px sans-serif";
      ctx.fillText(item.text, px + 6, py - 6);
    }
  }
}
