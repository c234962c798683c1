/** Thin typed client over the design-service JSON API.
 *
 * All traffic goes through a single injectable Transport so tests can
 * intercept it and assert that displayed numbers come verbatim from the
 * service.
 */

import type {
  BoundsResponse,
  GeometryResponse,
  JobResponse,
  OptimizeRequest,
  ParamsJson,
  PredictResponse,
} from "./types.js";

export type Transport = (
  path: string,
  init?: { method?: string; body?: unknown },
) => Promise<unknown>;

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly payload: unknown,
  ) {
    super(`service error ${status}: ${JSON.stringify(payload)}`);
  }
}

export function fetchTransport(baseUrl: string): Transport {
  return async (path, init) => {
    const res = await fetch(baseUrl + path, {
      method: init?.method ?? "GET",
      headers:
        init?.body !== undefined
          ? { "content-type": "application/json" }
          : undefined,
      body: init?.body !== undefined ? JSON.stringify(init.body) : undefined,
    });
    const payload = await res.json();
    if (!res.ok) throw new ServiceError(res.status, payload);
    return payload;
  };
}

export class ApiClient {
  constructor(private readonly transport: Transport) {}

  health(): Promise<{ status: string }> {
    return this.transport("/health") as Promise<{ status: string }>;
  }

  bounds(): Promise<BoundsResponse> {
    return this.transport("/bounds") as Promise<BoundsResponse>;
  }

  predict(params: ParamsJson): Promise<PredictResponse> {
    return this.transport("/predict", {
      method: "POST",
      body: params,
    }) as Promise<PredictResponse>;
  }

  geometry(params?: ParamsJson, density = 256): Promise<GeometryResponse> {
    const query = `?density=${density}`;
    if (params === undefined) {
      return this.transport(`/geometry${query}`) as Promise<GeometryResponse>;
    }
    return this.transport(`/geometry${query}`, {
      method: "POST",
      body: params,
    }) as Promise<GeometryResponse>;
  }

  optimize(request: OptimizeRequest): Promise<{ job_id: string }> {
    return this.transport("/optimize", {
      method: "POST",
      body: request,
    }) as Promise<{ job_id: string }>;
  }

  job(jobId: string): Promise<JobResponse> {
    return this.transport(`/jobs/${jobId}`) as Promise<JobResponse>;
  }
}
