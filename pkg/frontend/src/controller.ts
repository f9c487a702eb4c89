/** Async flows between the playback state and the API: submitting painted
 * intervals (one POST each, server-acknowledged records only) and the
 * refresh that re-reads the label log.
 */
import { ApiClient, ApiError, type LabelRecord } from "./api.js";
import type { PlaybackState } from "./state.js";

export interface SubmitOutcome {
  submitted: LabelRecord[];
  rejected: { start: number; end: number; label: string; reason: string }[];
}

/**
 * POST every pending interval. Acknowledged ones move from pending to
 * acknowledged; rejected ones stay pending with the server's reason
 * attached so the UI can highlight them.
 */
export async function submitPending(
  api: ApiClient,
  state: PlaybackState,
  annotatorId: string,
): Promise<SubmitOutcome> {
  const outcome: SubmitOutcome = { submitted: [], rejected: [] };
  const remaining: typeof state.pending = [];
  for (const interval of state.pending) {
    const record: LabelRecord = {
      trajectory_id: state.trajectory.id,
      start_time: interval.start,
      end_time: interval.end,
      label: interval.label,
      annotator_id: annotatorId,
    };
    try {
      const acknowledged = await api.submitLabel(record);
      state.acknowledged.push(acknowledged);
      outcome.submitted.push(acknowledged);
    } catch (err) {
      const reason = err instanceof ApiError ? err.message : String(err);
      remaining.push({ ...interval, error: reason });
      outcome.rejected.push({
        start: interval.start,
        end: interval.end,
        label: interval.label,
        reason,
      });
    }
  }
  state.pending = remaining;
  return outcome;
}

/** Replace the acknowledged list with the server's log for this trajectory. */
export async function refreshLabels(
  api: ApiClient,
  state: PlaybackState,
): Promise<LabelRecord[]> {
  state.acknowledged = await api.labels(state.trajectory.id);
  return state.acknowledged;
}
