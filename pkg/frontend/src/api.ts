/** Typed client for the labeling/retraining HTTP API.
 *
 * The UI never computes costs itself: every number it shows comes out of
 * one of these responses.
 */

export interface Bounds {
  xmin: number;
  ymin: number;
  xmax: number;
  ymax: number;
}

export interface EnvironmentSummary {
  id: string;
  bounds: Bounds;
  n_activities: number;
  n_objects: number;
}

export interface Pose {
  position: [number, number];
  facing: [number, number];
}

export interface Activity {
  activity_type: string;
  proximity_class: string;
  human: Pose;
  object: { position: [number, number] };
}

export interface SceneObject {
  id: string;
  position: [number, number];
  height?: number;
}

export interface EnvironmentDetail {
  id: string;
  bounds: Bounds;
  activities: Activity[];
  objects: SceneObject[];
  obstacles: [number, number][][];
}

export interface TrajectorySummary {
  id: string;
  environment_id: string;
  duration: number;
  n_waypoints: number;
}

export interface TrajectoryDetail {
  id: string;
  environment_id: string;
  waypoints: [number, number][];
  timestamps: number[];
}

export type LabelName = "bad" | "neutral" | "good";

export interface LabelRecord {
  trajectory_id: string;
  start_time: number;
  end_time: number;
  label: LabelName;
  annotator_id: string;
  received_at?: string;
}

export interface HeatmapPayload {
  environment_id: string;
  origin: [number, number];
  resolution: number;
  width: number;
  height: number;
  values: number[][];
  obstacle_mask: number[][];
}

export interface TrainRequest {
  max_iters?: number;
  tol?: number;
  seed?: number;
  restarts?: number;
}

export interface JobRecord {
  job_id: string;
  kind: string;
  status: string;
  detail: string;
  artifacts: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

const TERMINAL_STATUSES = new Set(["done", "failed"]);

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const body = (await response.json()) as { detail?: unknown };
        if (body && body.detail !== undefined) detail = String(body.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  environments(): Promise<EnvironmentSummary[]> {
    return this.request("/environments");
  }

  environment(id: string): Promise<EnvironmentDetail> {
    return this.request(`/environments/${encodeURIComponent(id)}`);
  }

  trajectories(envId?: string): Promise<TrajectorySummary[]> {
    const query = envId ? `?env=${encodeURIComponent(envId)}` : "";
    return this.request(`/trajectories${query}`);
  }

  trajectory(id: string): Promise<TrajectoryDetail> {
    return this.request(`/trajectories/${encodeURIComponent(id)}`);
  }

  labels(trajectoryId?: string): Promise<LabelRecord[]> {
    const query = trajectoryId
      ? `?trajectory=${encodeURIComponent(trajectoryId)}`
      : "";
    return this.request(`/labels${query}`);
  }

  submitLabel(record: LabelRecord): Promise<LabelRecord> {
    return this.request("/labels", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(record),
    });
  }

  heatmap(envId: string, resolution: number): Promise<HeatmapPayload> {
    return this.request(
      `/heatmap?env=${encodeURIComponent(envId)}&res=${resolution}`,
    );
  }

  train(spec: TrainRequest = {}): Promise<{ job_id: string }> {
    return this.request("/train", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(spec),
    });
  }

  job(id: string): Promise<JobRecord> {
    return this.request(`/jobs/${encodeURIComponent(id)}`);
  }

  model(): Promise<Record<string, unknown>> {
    return this.request("/model");
  }

  /** POST /train, then poll the job until it reaches a terminal status. */
  async retrainAndWait(
    spec: TrainRequest = {},
    pollMs = 250,
    onUpdate?: (job: JobRecord) => void,
    maxPolls = 2400,
  ): Promise<JobRecord> {
    const { job_id } = await this.train(spec);
    for (let i = 0; i < maxPolls; i++) {
      const job = await this.job(job_id);
      onUpdate?.(job);
      if (TERMINAL_STATUSES.has(job.status)) return job;
      await new Promise((resolve) => setTimeout(resolve, pollMs));
    }
    throw new ApiError(504, `job ${job_id} did not reach a terminal status`);
  }
}
