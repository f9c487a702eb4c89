/** Time-bar geometry: pixel <-> time mapping and the drag state machine
 * that turns a pointer gesture into a candidate interval.
 */
import type { LabelName } from "./api.js";

export const LABEL_COLORS: Record<LabelName, string> = {
  bad: "#d04040",
  neutral: "#b0a640",
  good: "#3cab4e",
};

export function pixelToTime(
  x: number,
  barWidth: number,
  startTime: number,
  endTime: number,
): number {
  const frac = Math.min(1, Math.max(0, x / barWidth));
  return startTime + frac * (endTime - startTime);
}

export function timeToPixel(
  time: number,
  barWidth: number,
  startTime: number,
  endTime: number,
): number {
  const span = endTime - startTime;
  const frac = span > 0 ? (time - startTime) / span : 0;
  return Math.min(barWidth, Math.max(0, frac * barWidth));
}

export interface DragState {
  anchorX: number;
  currentX: number;
}

export class TimelineDrag {
  private drag: DragState | null = null;

  begin(x: number): void {
    this.drag = { anchorX: x, currentX: x };
  }

  update(x: number): DragState | null {
    if (this.drag) this.drag.currentX = x;
    return this.drag;
  }

  /** Finish the gesture, returning the dragged interval in seconds. */
  finish(
    barWidth: number,
    startTime: number,
    endTime: number,
  ): { start: number; end: number } | null {
    if (!this.drag) return null;
    const a = pixelToTime(this.drag.anchorX, barWidth, startTime, endTime);
    const b = pixelToTime(this.drag.currentX, barWidth, startTime, endTime);
    this.drag = null;
    return { start: Math.min(a, b), end: Math.max(a, b) };
  }

  cancel(): void {
    this.drag = null;
  }

  get active(): boolean {
    return this.drag !== null;
  }
}
