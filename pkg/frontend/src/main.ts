/** DOM wiring for the explorer page. Everything numeric comes from the
 * service; this file only moves data between widgets and the ApiClient. */

import { ApiClient, fetchTransport } from "./client.js";
import {
  PredictScheduler,
  PinnedDesign,
  buildSliders,
  pollJob,
  withParam,
} from "./state.js";
import {
  outlineView,
  pinnedCardMarkup,
  spectrumMarkup,
  tracePolyline,
} from "./render.js";
import type {
  BoundsResponse,
  LossSpecJson,
  ParamsJson,
  PredictResponse,
} from "./types.js";
import { paramsToVector } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const client = new ApiClient(fetchTransport(""));
  const banner = el<HTMLDivElement>("banner");

  let bounds: BoundsResponse;
  try {
    bounds = await client.bounds();
  } catch {
    banner.textContent = "design service unreachable";
    banner.hidden = false;
    return;
  }

  let current: ParamsJson = structuredClone(bounds.reference);
  const pins: PinnedDesign[] = [];

  const spectrumBox = el<HTMLDivElement>("spectrum");
  const outlineCurrent = el<HTMLElement>("outline-current");
  const outlineReference = el<HTMLElement>("outline-reference");
  const outlineSvg = el<HTMLElement>("outline-svg");

  function showPrediction(params: ParamsJson, prediction: PredictResponse) {
    // render spectrum and outline from the same params so they never drift
    spectrumBox.innerHTML = spectrumMarkup(prediction);
    void client.geometry(params).then((geom) => {
      const view = outlineView(geom);
      outlineCurrent.setAttribute("d", view.path);
      outlineSvg.setAttribute("viewBox", view.viewBox);
    });
    banner.hidden = true;
  }

  const scheduler = new PredictScheduler(
    client,
    showPrediction,
    () => {
      banner.textContent = "design service unreachable — showing last good state";
      banner.hidden = false;
    },
  );

  // one slider per parameter, bounds straight from the server
  const sliderBox = el<HTMLDivElement>("sliders");
  const sliders = buildSliders(bounds);
  const inputs: HTMLInputElement[] = [];
  for (const s of sliders) {
    const row = document.createElement("label");
    row.className = `slider-row group-${s.group}`;
    row.textContent = s.label;
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(s.min);
    input.max = String(s.max);
    input.step = String((s.max - s.min) / 400);
    input.value = String(s.value);
    input.addEventListener("input", () => {
      current = withParam(current, s.index, Number(input.value));
      scheduler.request(current);
    });
    row.appendChild(input);
    sliderBox.appendChild(row);
    inputs.push(input);
  }

  function setSliders(params: ParamsJson) {
    current = params;
    const x = paramsToVector(params);
    inputs.forEach((input, i) => {
      input.value = String(x[i]);
    });
    scheduler.request(current);
    void scheduler.fire();
  }

  el<HTMLButtonElement>("reset").addEventListener("click", () => {
    setSliders(structuredClone(bounds.reference));
  });

  // reference outline drawn once
  void client.geometry(bounds.reference).then((geom) => {
    const view = outlineView(geom);
    outlineReference.setAttribute("d", view.path);
    outlineSvg.setAttribute("viewBox", view.viewBox);
  });

  // ---- optimization panel --------------------------------------------
  const traceLine = el<HTMLElement>("trace-line");
  const jobStatus = el<HTMLDivElement>("job-status");

  el<HTMLButtonElement>("launch").addEventListener("click", async () => {
    const kind = el<HTMLSelectElement>("loss-kind").value as LossSpecJson["kind"];
    const spec: LossSpecJson = { kind };
    if (kind === "ratio_target") {
      spec.alpha = Number(el<HTMLInputElement>("alpha").value);
    } else if (kind === "mode_target") {
      spec.mode = Number(el<HTMLInputElement>("mode").value);
      spec.beta = Number(el<HTMLInputElement>("beta").value);
    }
    const free = [
      ...(el<HTMLInputElement>("free-outline").checked ? ["outline"] : []),
      ...(el<HTMLInputElement>("free-thickness").checked ? ["thickness"] : []),
    ];
    jobStatus.textContent = "submitting…";
    try {
      const { job_id } = await client.optimize({ spec, start: current, free });
      jobStatus.textContent = `job ${job_id} running`;
      const done = await pollJob(client, job_id, (job) => {
        traceLine.setAttribute("points", tracePolyline(job.trace));
        jobStatus.textContent = `job ${job_id}: ${job.status}, ${job.n_evals} evaluations`;
      });
      if (done.status === "failed" || !done.result) {
        jobStatus.textContent = `job failed: ${done.error}`;
        return;
      }
      const result = done.result;
      jobStatus.innerHTML =
        `finished (${result.status}): loss ${result.best_loss.toExponential(3)} ` +
        `<button id="adopt">adopt</button> <button id="pin">pin</button>`;
      el<HTMLButtonElement>("adopt").addEventListener("click", () => {
        setSliders(result.best_params);
      });
      el<HTMLButtonElement>("pin").addEventListener("click", () => {
        pins.push({
          name: `design ${pins.length + 1}`,
          params: result.best_params,
          freqs: result.predicted_freqs,
          f52: result.f52,
          boundary: result.boundary,
        });
        el<HTMLDivElement>("shelf").innerHTML = pins
          .map((d) => pinnedCardMarkup(d.name, d.freqs, d.f52, d.boundary))
          .join("");
      });
    } catch (err) {
      jobStatus.textContent = `optimization failed: ${String(err)}`;
    }
  });

  // initial render
  scheduler.request(current);
  await scheduler.fire();
}

if (typeof document !== "undefined") {
  void boot();
}
