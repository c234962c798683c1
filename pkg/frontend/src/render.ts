/** Pure view builders: SVG paths and markup strings from service data.
 *
 * Every number shown to the user is carried verbatim in a data-value
 * attribute; the visible text is a rounded copy for readability. Nothing
 * here computes frequencies.
 */

import type { GeometryResponse, PredictResponse } from "./types.js";
import { bestLossSeries } from "./state.js";

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** SVG path ("M x y L ... Z") from a closed boundary polyline, in mm. */
export function outlinePath(boundary: number[][]): string {
  if (boundary.length < 3) throw new Error("boundary needs at least 3 points");
  const pts = boundary.map(
    ([x, y]) => `${(1000 * x).toFixed(2)} ${(1000 * y).toFixed(2)}`,
  );
  return `M ${pts[0]} L ${pts.slice(1).join(" L ")} Z`;
}

export interface OutlineView {
  path: string;
  viewBox: string; // mm, padded
}

export function outlineView(geometry: GeometryResponse): OutlineView {
  const xs = geometry.boundary.map((p) => 1000 * p[0]);
  const ys = geometry.boundary.map((p) => 1000 * p[1]);
  const pad = 5;
  const x0 = Math.min(...xs) - pad;
  const y0 = Math.min(...ys) - pad;
  const w = Math.max(...xs) - Math.min(...xs) + 2 * pad;
  const h = Math.max(...ys) - Math.min(...ys) + 2 * pad;
  return {
    path: outlinePath(geometry.boundary),
    viewBox: `${x0.toFixed(2)} ${y0.toFixed(2)} ${w.toFixed(2)} ${h.toFixed(2)}`,
  };
}

/** Blue→red color for a thickness sample inside [min, max] meters. */
export function thicknessColor(value: number, min: number, max: number): string {
  const u = max > min ? (value - min) / (max - min) : 0.5;
  const r = Math.round(255 * u);
  const b = Math.round(255 * (1 - u));
  return `rgb(${r}, 80, ${b})`;
}

/** Bar chart markup for the ten predicted frequencies plus the f5/f2 readout. */
export function spectrumMarkup(prediction: PredictResponse): string {
  const max = Math.max(...prediction.freqs_hz);
  const bars = prediction.freqs_hz
    .map((f, i) => {
      const pct = ((100 * f) / max).toFixed(1);
      return (
        `<div class="bar" data-mode="${i + 1}" data-value="${f}">` +
        `<span class="fill" style="height:${pct}%"></span>` +
        `<span class="freq">${f.toFixed(1)}</span>` +
        `</div>`
      );
    })
    .join("");
  const warn = prediction.in_training_box
    ? ""
    : `<div class="warning">outside the surrogate's training box — ` +
      `prediction unreliable</div>`;
  return (
    `<div class="spectrum">${bars}</div>` +
    `<div class="f52" data-value="${prediction.f52}">` +
    `f5/f2 = ${prediction.f52.toFixed(3)}</div>` +
    warn
  );
}

/** Polyline for the optimization trace chart (log-loss vs evaluations). */
export function tracePolyline(
  trace: [number, number][],
  width = 320,
  height = 120,
): string {
  const series = bestLossSeries(trace);
  if (series.length === 0) return "";
  const xMax = series[series.length - 1][0];
  const logs = series.map(([, l]) => Math.log10(Math.max(l, 1e-300)));
  const yMin = Math.min(...logs);
  const yMax = Math.max(...logs);
  const span = yMax - yMin || 1;
  return series
    .map(([count, loss], i) => {
      const x = (width * count) / xMax;
      const y = height - (height * (logs[i] - yMin)) / span;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}

/** Card markup for one pinned design on the comparison shelf. */
export function pinnedCardMarkup(
  name: string,
  freqs: number[],
  f52: number,
  boundary: number[][],
): string {
  const path = outlinePath(boundary);
  const list = freqs
    .map((f) => `<li data-value="${f}">${f.toFixed(1)} Hz</li>`)
    .join("");
  return (
    `<div class="pinned-card"><h4>${esc(name)}</h4>` +
    `<svg class="mini-outline"><path d="${path}"/></svg>` +
    `<ol>${list}</ol>` +
    `<div class="f52" data-value="${f52}">f5/f2 = ${f52.toFixed(3)}</div>` +
    `</div>`
  );
}
