/** Explorer state: slider model, debounced latest-wins prediction, jobs. */

import type { ApiClient } from "./client.js";
import type {
  BoundsResponse,
  JobResponse,
  ParamsJson,
  PredictResponse,
} from "./types.js";
import { paramsToVector, vectorToParams } from "./types.js";

export interface SliderSpec {
  index: number;
  label: string;
  group: "outline" | "thickness" | "material";
  min: number;
  max: number;
  value: number;
}

const MATERIAL_LABELS = [
  "density",
  "E along grain",
  "E across grain",
  "E through",
  "nu long-rad",
  "nu long-tan",
  "nu rad-tan",
];

/** One slider per parameter, bounded exactly by the server's box. */
export function buildSliders(bounds: BoundsResponse): SliderSpec[] {
  const x0 = paramsToVector(bounds.reference);
  return x0.map((value, index) => {
    let label: string;
    let group: SliderSpec["group"];
    if (index < 20) {
      label = `outline radius ${index + 1}`;
      group = "outline";
    } else if (index < 28) {
      label = `thickness bump ${index - 19}`;
      group = "thickness";
    } else {
      label = MATERIAL_LABELS[index - 28];
      group = "material";
    }
    return { index, label, group, min: bounds.lo[index], max: bounds.hi[index], value };
  });
}

export function clampToBounds(x: number[], bounds: BoundsResponse): number[] {
  return x.map((v, i) => Math.min(bounds.hi[i], Math.max(bounds.lo[i], v)));
}

/** Best-loss series for the trace chart: running minimum of the raw trace,
 * guaranteed non-increasing even if a transport hiccup reorders points. */
export function bestLossSeries(trace: [number, number][]): [number, number][] {
  let best = Infinity;
  return trace.map(([count, loss]) => {
    best = Math.min(best, loss);
    return [count, best];
  });
}

export type PredictionListener = (
  params: ParamsJson,
  prediction: PredictResponse,
) => void;

/**
 * Debounced, latest-wins prediction channel: rapid slider drags collapse to
 * one request after `delayMs` of quiet, and a stale response never
 * overwrites a newer one.
 */
export class PredictScheduler {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private generation = 0;
  private pendingParams: ParamsJson | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly onPrediction: PredictionListener,
    private readonly onError: (err: unknown) => void = () => {},
    readonly delayMs = 100,
  ) {}

  request(params: ParamsJson): void {
    this.pendingParams = params;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire();
    }, this.delayMs);
  }

  /** Send immediately (used by reset and adopt-result). */
  async fire(): Promise<void> {
    const params = this.pendingParams;
    if (params === null) return;
    const gen = ++this.generation;
    try {
      const prediction = await this.client.predict(params);
      if (gen === this.generation) this.onPrediction(params, prediction);
    } catch (err) {
      if (gen === this.generation) this.onError(err);
    }
  }
}

export interface PinnedDesign {
  name: string;
  params: ParamsJson;
  freqs: number[];
  f52: number;
  boundary: number[][];
}

/** Poll a job until it leaves the queued/running states. */
export async function pollJob(
  client: ApiClient,
  jobId: string,
  onUpdate: (job: JobResponse) => void,
  intervalMs = 250,
  sleep: (ms: number) => Promise<void> = (ms) =>
    new Promise((r) => setTimeout(r, ms)),
): Promise<JobResponse> {
  for (;;) {
    const job = await client.job(jobId);
    onUpdate(job);
    if (job.status === "done" || job.status === "failed") return job;
    await sleep(intervalMs);
  }
}

/** Move one coordinate of a design, returning a fresh params object. */
export function withParam(
  params: ParamsJson,
  index: number,
  value: number,
): ParamsJson {
  const x = paramsToVector(params);
  x[index] = value;
  return vectorToParams(x);
}
