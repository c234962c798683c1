import { describe, expect, it, vi } from "vitest";

import { ApiClient, Transport } from "../src/client.js";
import {
  PredictScheduler,
  bestLossSeries,
  buildSliders,
  clampToBounds,
  pollJob,
} from "../src/state.js";
import {
  outlinePath,
  outlineView,
  spectrumMarkup,
  thicknessColor,
  tracePolyline,
} from "../src/render.js";
import {
  BoundsResponse,
  JobResponse,
  ParamsJson,
  PredictResponse,
  paramsToVector,
  vectorToParams,
} from "../src/types.js";

const material = {
  rho: 400,
  e_long: 1.08e10,
  e_rad: 8.424e8,
  e_tan: 4.644e8,
  nu_lr: 0.37,
  nu_lt: 0.47,
  nu_rt: 0.43,
};

const referenceParams: ParamsJson = {
  p: Array(20).fill(1),
  t: Array(8).fill(1),
  m: material,
};

function makeBounds(): BoundsResponse {
  const x0 = paramsToVector(referenceParams);
  return {
    halfwidth: 0.2,
    reference: referenceParams,
    lo: x0.map((v) => v * 0.8),
    hi: x0.map((v) => v * 1.2),
  };
}

/** Transport stub that records every request and replays canned payloads. */
function stubTransport(routes: Record<string, unknown>) {
  const calls: { path: string; body?: unknown }[] = [];
  const transport: Transport = async (path, init) => {
    calls.push({ path, body: init?.body });
    const key = path.split("?")[0];
    if (!(key in routes)) throw new Error(`unexpected request ${path}`);
    const payload = routes[key];
    return typeof payload === "function" ? payload() : payload;
  };
  return { transport, calls };
}

describe("parameter vector mapping", () => {
  it("round-trips params through the 35-vector", () => {
    const x = paramsToVector(referenceParams);
    expect(x).toHaveLength(35);
    expect(vectorToParams(x)).toEqual(referenceParams);
  });

  it("rejects wrong-length vectors", () => {
    expect(() => vectorToParams([1, 2, 3])).toThrow(/expected 35/);
  });
});

describe("displayed numbers come verbatim from the service", () => {
  const prediction: PredictResponse = {
    // awkward full-precision doubles on purpose: any rounding in the data
    // path would break the bit-match below
    freqs_hz: [
      123.45678901234567, 181.1111111111111, 233.3003300330033,
      287.7700000000001, 341.0123456789012, 402.4042424242424,
      455.5055505550555, 512.1221221221221, 583.3833383338334,
      641.0460460460461,
    ],
    f52: 341.0123456789012 / 181.1111111111111,
    in_training_box: true,
  };

  it("bit-matches every rendered frequency against the intercepted payload", async () => {
    const { transport, calls } = stubTransport({ "/predict": prediction });
    const client = new ApiClient(transport);
    const received = await client.predict(referenceParams);
    expect(calls).toEqual([{ path: "/predict", body: referenceParams }]);

    const markup = spectrumMarkup(received);
    const shown = [...markup.matchAll(/data-value="([^"]+)"/g)].map((m) =>
      Number(m[1]),
    );
    // ten bars plus the f52 readout, every one === the transport payload
    expect(shown).toHaveLength(11);
    prediction.freqs_hz.forEach((f, i) => {
      expect(Object.is(shown[i], f)).toBe(true);
    });
    expect(Object.is(shown[10], prediction.f52)).toBe(true);
  });

  it("flags predictions outside the training box", () => {
    const markup = spectrumMarkup({ ...prediction, in_training_box: false });
    expect(markup).toContain("outside the surrogate");
  });
});

describe("slider bounds equal server-reported bounds", () => {
  it("uses lo/hi verbatim for every one of the 35 sliders", () => {
    const bounds = makeBounds();
    const sliders = buildSliders(bounds);
    expect(sliders).toHaveLength(35);
    sliders.forEach((s, i) => {
      expect(s.min).toBe(bounds.lo[i]);
      expect(s.max).toBe(bounds.hi[i]);
      expect(s.value).toBe(paramsToVector(bounds.reference)[i]);
    });
    const groups = sliders.map((s) => s.group);
    expect(groups.filter((g) => g === "outline")).toHaveLength(20);
    expect(groups.filter((g) => g === "thickness")).toHaveLength(8);
    expect(groups.filter((g) => g === "material")).toHaveLength(7);
  });

  it("clamps out-of-box values back to the box", () => {
    const bounds = makeBounds();
    const x = paramsToVector(referenceParams);
    x[0] = 99;
    x[1] = -99;
    const clamped = clampToBounds(x, bounds);
    expect(clamped[0]).toBe(bounds.hi[0]);
    expect(clamped[1]).toBe(bounds.lo[1]);
    expect(clamped.slice(2)).toEqual(x.slice(2));
  });
});

describe("optimization trace", () => {
  it("best-loss series is non-increasing and preserves monotone input", () => {
    const monotone: [number, number][] = [
      [1, 5.0],
      [2, 3.0],
      [3, 3.0],
      [4, 0.5],
    ];
    expect(bestLossSeries(monotone)).toEqual(monotone);

    const noisy: [number, number][] = [
      [1, 5.0],
      [2, 7.0],
      [3, 2.0],
      [4, 4.0],
    ];
    const series = bestLossSeries(noisy);
    for (let i = 1; i < series.length; i++) {
      expect(series[i][1]).toBeLessThanOrEqual(series[i - 1][1]);
    }
  });

  it("renders one polyline point per trace entry", () => {
    const points = tracePolyline([
      [1, 1.0],
      [2, 0.1],
      [3, 0.01],
    ]);
    expect(points.split(" ")).toHaveLength(3);
  });

  it("polls a job to completion and reports monotone progress", async () => {
    const snapshots: JobResponse[] = [
      { status: "running", error: null, trace: [[1, 4.0]], n_evals: 1, result: null },
      {
        status: "running",
        error: null,
        trace: [
          [1, 4.0],
          [2, 1.5],
        ],
        n_evals: 2,
        result: null,
      },
      {
        status: "done",
        error: null,
        trace: [
          [1, 4.0],
          [2, 1.5],
          [3, 0.25],
        ],
        n_evals: 3,
        result: {
          best_loss: 0.25,
          n_evals: 3,
          budget: 4000,
          status: "converged",
          best_params: referenceParams,
          predicted_freqs: Array(10).fill(200),
          f52: 1.0,
          boundary: [
            [0, 0],
            [0.1, 0],
            [0.1, 0.1],
          ],
        },
      },
    ];
    let i = 0;
    const { transport } = stubTransport({ "/jobs/job-1": () => snapshots[i++] });
    const client = new ApiClient(transport);
    const seen: JobResponse[] = [];
    const done = await pollJob(
      client,
      "job-1",
      (j) => seen.push(j),
      0,
      async () => {},
    );
    expect(done.status).toBe("done");
    expect(seen).toHaveLength(3);
    const losses = done.trace.map(([, l]) => l);
    for (let k = 1; k < losses.length; k++) {
      expect(losses[k]).toBeLessThanOrEqual(losses[k - 1]);
    }
  });
});

describe("debounced latest-wins prediction", () => {
  it("collapses a drag burst into one request after 100 ms", async () => {
    vi.useFakeTimers();
    try {
      const { transport, calls } = stubTransport({
        "/predict": { freqs_hz: Array(10).fill(1), f52: 1, in_training_box: true },
      });
      const predictions: ParamsJson[] = [];
      const scheduler = new PredictScheduler(
        new ApiClient(transport),
        (params) => predictions.push(params),
      );
      for (let k = 0; k < 25; k++) {
        scheduler.request({
          ...referenceParams,
          p: referenceParams.p.map((v, i) => (i === 0 ? 1 + k / 100 : v)),
        });
        await vi.advanceTimersByTimeAsync(20); // faster than the debounce
      }
      expect(calls).toHaveLength(0);
      await vi.advanceTimersByTimeAsync(150);
      expect(calls).toHaveLength(1);
      expect(predictions).toHaveLength(1);
      // the single request carries the final drag position
      expect((calls[0].body as ParamsJson).p[0]).toBeCloseTo(1.24, 12);
    } finally {
      vi.useRealTimers();
    }
  });

  it("drops stale responses when a newer request resolves first", async () => {
    let resolveFirst: (v: unknown) => void = () => {};
    let call = 0;
    const transport: Transport = async (path) => {
      if (path !== "/predict") throw new Error(path);
      call += 1;
      if (call === 1) return new Promise((r) => (resolveFirst = r));
      return { freqs_hz: Array(10).fill(2), f52: 2, in_training_box: true };
    };
    const shown: number[] = [];
    const scheduler = new PredictScheduler(
      new ApiClient(transport),
      (_p, pred) => shown.push(pred.f52),
      () => {},
      0,
    );
    scheduler.request(referenceParams);
    const first = scheduler.fire(); // in flight, unresolved
    scheduler.request(referenceParams);
    await scheduler.fire(); // newer request wins
    resolveFirst({ freqs_hz: Array(10).fill(1), f52: 1, in_training_box: true });
    await first;
    expect(shown).toEqual([2]);
  });
});

describe("outline rendering", () => {
  const geometry = {
    boundary: [
      [0, 0],
      [0.1, 0],
      [0.1, 0.05],
      [0, 0.05],
    ],
    area_m2: 0.005,
    thickness_grid: { x: [], y: [], thickness_m: [] },
  };

  it("builds a closed millimeter-scale SVG path", () => {
    const path = outlinePath(geometry.boundary);
    expect(path.startsWith("M 0.00 0.00 L 100.00 0.00")).toBe(true);
    expect(path.endsWith("Z")).toBe(true);
  });

  it("pads the viewBox around the outline", () => {
    const view = outlineView(geometry);
    expect(view.viewBox).toBe("-5.00 -5.00 110.00 60.00");
  });

  it("rejects degenerate boundaries", () => {
    expect(() => outlinePath([[0, 0]])).toThrow(/at least 3/);
  });

  it("maps thickness extremes to blue and red", () => {
    expect(thicknessColor(2e-3, 2e-3, 5e-3)).toBe("rgb(0, 80, 255)");
    expect(thicknessColor(5e-3, 2e-3, 5e-3)).toBe("rgb(255, 80, 0)");
  });
});
