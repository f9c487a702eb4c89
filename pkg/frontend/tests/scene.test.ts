import { describe, expect, it } from "vitest";

import { buildScene, heatmapItem, viewTransform } from "../src/scene.js";
import { MockServer } from "./mockServer.js";

const server = new MockServer();

describe("buildScene", () => {
  it("puts the robot at the first waypoint at time zero", () => {
    const items = buildScene(server.environment, server.trajectory, 0, null);
    const robot = items.find((i) => i.kind === "circle" && i.role === "robot");
    expect(robot).toBeDefined();
    if (robot?.kind === "circle") {
      expect(robot.center).toEqual(server.trajectory.waypoints[0]);
    }
  });

  it("puts the robot at the last waypoint at the end", () => {
    const end = server.trajectory.timestamps.at(-1)!;
    const items = buildScene(server.environment, server.trajectory, end, null);
    const robot = items.find((i) => i.kind === "circle" && i.role === "robot");
    if (robot?.kind === "circle") {
      expect(robot.center).toEqual(server.trajectory.waypoints.at(-1));
    }
  });

  it("draws a human, object and link per activity", () => {
    const items = buildScene(server.environment, null, 0, null);
    const humans = items.filter((i) => i.kind === "circle" && i.role === "human");
    const objects = items.filter((i) => i.kind === "circle" && i.role === "object");
    expect(humans).toHaveLength(server.environment.activities.length);
    expect(objects).toHaveLength(server.environment.activities.length);
  });

  it("heatmap overlay dimensions equal the payload dimensions", () => {
    const payload = server.heatmapPayload(0.25);
    const items = buildScene(server.environment, null, 0, payload);
    const grid = items.find((i) => i.kind === "heatmap");
    expect(grid).toBeDefined();
    if (grid?.kind === "heatmap") {
      expect(grid.width).toBe(payload.width);
      expect(grid.height).toBe(payload.height);
      expect(grid.intensity).toHaveLength(payload.height);
      expect(grid.intensity[0]).toHaveLength(payload.width);
    }
  });
});

describe("heatmapItem", () => {
  it("derives every displayed number from the payload", () => {
    const payload = server.heatmapPayload(0.5);
    const item = heatmapItem(payload);
    if (item.kind !== "heatmap") throw new Error("wrong kind");
    const flat = payload.values.flat();
    expect(item.minValue).toBe(Math.min(...flat));
    expect(item.maxValue).toBe(Math.max(...flat));
    for (const row of item.intensity) {
      for (const v of row) {
        expect(v).toBeGreaterThanOrEqual(0);
        expect(v).toBeLessThanOrEqual(1);
      }
    }
  });
});

describe("viewTransform", () => {
  it("maps world bounds onto the canvas with y flipped", () => {
    const view = viewTransform({ xmin: 0, ymin: 0, xmax: 10, ymax: 10 }, 500, 500);
    expect(view.toPixel([0, 0])).toEqual([0, 500]);
    expect(view.toPixel([10, 10])).toEqual([500, 0]);
    expect(view.toPixel([5, 5])).toEqual([250, 250]);
  });
});
