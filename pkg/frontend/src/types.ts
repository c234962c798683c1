/** JSON shapes exchanged with the design service. */

export interface MaterialJson {
  rho: number;
  e_long: number;
  e_rad: number;
  e_tan: number;
  nu_lr: number;
  nu_lt: number;
  nu_rt: number;
}

export interface ParamsJson {
  p: number[]; // 20 outline control-radius multipliers
  t: number[]; // 8 thickness bump coefficients
  m: MaterialJson;
}

export const N_OUTLINE = 20;
export const N_THICKNESS = 8;
export const MATERIAL_KEYS: (keyof MaterialJson)[] = [
  "rho",
  "e_long",
  "e_rad",
  "e_tan",
  "nu_lr",
  "nu_lt",
  "nu_rt",
];
export const N_PARAMS = N_OUTLINE + N_THICKNESS + MATERIAL_KEYS.length;

export interface PredictResponse {
  freqs_hz: number[];
  f52: number;
  in_training_box: boolean;
}

export interface BoundsResponse {
  halfwidth: number;
  reference: ParamsJson;
  lo: number[];
  hi: number[];
}

export interface GeometryResponse {
  boundary: number[][]; // closed polyline, [x_m, y_m] pairs
  area_m2: number;
  thickness_grid: {
    x: number[];
    y: number[];
    thickness_m: (number | null)[][];
  };
}

export interface LossSpecJson {
  kind: "ratio_target" | "mode_target" | "spectrum_mean_abs" | "mean_shift";
  alpha?: number;
  beta?: number;
  mode?: number;
  f_ref?: number[] | null;
}

export interface OptimizeRequest {
  spec: LossSpecJson;
  start?: ParamsJson;
  free?: string | (string | number)[];
}

export interface JobResult {
  best_loss: number;
  n_evals: number;
  budget: number;
  status: string;
  best_params: ParamsJson;
  predicted_freqs: number[];
  f52: number;
  boundary: number[][];
}

export interface JobResponse {
  status: "queued" | "running" | "done" | "failed";
  error: string | null;
  trace: [number, number][]; // (evaluation count, best loss so far)
  n_evals: number;
  result: JobResult | null;
}

/** Flatten params into the service's canonical 35-vector ordering. */
export function paramsToVector(params: ParamsJson): number[] {
  return [...params.p, ...params.t, ...MATERIAL_KEYS.map((k) => params.m[k])];
}

/** Rebuild a params object from a 35-vector. */
export function vectorToParams(x: number[]): ParamsJson {
  if (x.length !== N_PARAMS) {
    throw new Error(`expected ${N_PARAMS} values, got ${x.length}`);
  }
  const m = {} as MaterialJson;
  MATERIAL_KEYS.forEach((k, i) => {
    m[k] = x[N_OUTLINE + N_THICKNESS + i];
  });
  return {
    p: x.slice(0, N_OUTLINE),
    t: x.slice(N_OUTLINE, N_OUTLINE + N_THICKNESS),
    m,
  };
}
