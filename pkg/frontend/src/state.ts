/** Playback and interval-painting state for one trajectory.
 *
 * Pending intervals are what the user has painted but not submitted;
 * acknowledged records are whatever the server has confirmed. Painted
 * intervals may not overlap within a pass, zero-length paints are rejected
 * before they can reach the server, and times are clamped to the
 * trajectory's time range.
 */
import type { LabelName, LabelRecord, TrajectoryDetail } from "./api.js";

export interface PaintedInterval {
  start: number;
  end: number;
  label: LabelName;
  error?: string;
}

export const MIN_INTERVAL_SECONDS = 1e-3;

export function interpolatePosition(
  trajectory: TrajectoryDetail,
  time: number,
): [number, number] {
  const ts = trajectory.timestamps;
  const wps = trajectory.waypoints;
  if (ts.length === 0) throw new Error("trajectory has no waypoints");
  const first = ts[0]!;
  const last = ts[ts.length - 1]!;
  if (time <= first) return [...wps[0]!] as [number, number];
  if (time >= last) return [...wps[wps.length - 1]!] as [number, number];
  let lo = 0;
  let hi = ts.length - 1;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if (ts[mid]! <= time) lo = mid;
    else hi = mid;
  }
  const t0 = ts[lo]!;
  const t1 = ts[hi]!;
  const frac = t1 > t0 ? (time - t0) / (t1 - t0) : 0;
  const a = wps[lo]!;
  const b = wps[hi]!;
  return [a[0] + frac * (b[0] - a[0]), a[1] + frac * (b[1] - a[1])];
}

export class PlaybackState {
  time: number;
  playing = false;
  speed = 1.0;
  pending: PaintedInterval[] = [];
  acknowledged: LabelRecord[] = [];

  constructor(readonly trajectory: TrajectoryDetail) {
    this.time = trajectory.timestamps[0] ?? 0;
  }

  get startTime(): number {
    return this.trajectory.timestamps[0] ?? 0;
  }

  get endTime(): number {
    const ts = this.trajectory.timestamps;
    return ts[ts.length - 1] ?? 0;
  }

  get duration(): number {
    return this.endTime - this.startTime;
  }

  position(): [number, number] {
    return interpolatePosition(this.trajectory, this.time);
  }

  seek(time: number): void {
    this.time = Math.min(this.endTime, Math.max(this.startTime, time));
  }

  /** Advance playback by wall-clock milliseconds; pauses at the end. */
  tick(elapsedMs: number): void {
    if (!this.playing) return;
    this.seek(this.time + (elapsedMs / 1000) * this.speed);
    if (this.time >= this.endTime) this.playing = false;
  }

  /** Paint an interval; returns the stored interval or a rejection reason. */
  paint(
    start: number,
    end: number,
    label: LabelName,
  ): { ok: true; interval: PaintedInterval } | { ok: false; reason: string } {
    const lo = Math.max(this.startTime, Math.min(start, end));
    const hi = Math.min(this.endTime, Math.max(start, end));
    if (hi - lo < MIN_INTERVAL_SECONDS) {
      return { ok: false, reason: "zero-length interval" };
    }
    for (const existing of this.pending) {
      if (lo < existing.end && existing.start < hi) {
        return { ok: false, reason: "overlaps a painted interval" };
      }
    }
    const interval: PaintedInterval = { start: lo, end: hi, label };
    this.pending.push(interval);
    this.pending.sort((a, b) => a.start - b.start);
    return { ok: true, interval };
  }

  removePending(index: number): void {
    this.pending.splice(index, 1);
  }

  clearPending(): void {
    this.pending = [];
  }
}

/** Map a key press to a label, per the b/n/g shortcuts. */
export function labelForKey(key: string): LabelName | null {
  switch (key.toLowerCase()) {
    case "b":
      return "bad";
    case "n":
      return "neutral";
    case "g":
      return "good";
    default:
      return null;
  }
}
