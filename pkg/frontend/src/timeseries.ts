// Per-pixel backscatter inspector: one polyline per (orbit, polarization),
// an invasion-date marker, and shading for the selected periods. The chart
// model is built as plain data first so its values can be tested against
// the /timeseries payload verbatim.

import type { Series, TimeseriesPayload } from "./types";

export const INVASION_DATE = "2022-02-24";

export interface ChartPoint {
  date: string;
  value: number;
  xFrac: number; // 0..1 across the time axis
  yFrac: number; // 0..1 bottom..top of the value axis
}

export interface ChartSeries {
  key: string;
  orbit: number;
  polarization: string;
  direction: string;
  color: string;
  dash: string;
  points: ChartPoint[];
}

export interface PeriodBand {
  period: number;
  x0Frac: number;
  x1Frac: number;
}

export interface ChartModel {
  series: ChartSeries[];
  dateMin: string;
  dateMax: string;
  valueMin: number;
  valueMax: number;
  invasionFrac: number | null;
  bands: PeriodBand[];
}

const TIMELINE_ANCHOR = "2020-02-24";

function addMonths(iso: string, months: number): string {
  const [y, m, d] = iso.split("-").map(Number);
  const total = y * 12 + (m - 1) + months;
  const year = Math.floor(total / 12);
  const month = (total % 12) + 1;
  return `${year}-${String(month).padStart(2, "0")}-${String(d).padStart(2, "0")}`;
}

function shiftDays(iso: string, days: number): string {
  const t = new Date(Date.parse(`${iso}T00:00:00Z`) + days * 86_400_000);
  return t.toISOString().slice(0, 10);
}

/** Inclusive [start, end] of assessment window n (n=0 is the reference
 * year); mirrors the service's timeline. */
export function periodRange(n: number): [string, string] {
  if (n === 0) {
    return [TIMELINE_ANCHOR, shiftDays(addMonths(TIMELINE_ANCHOR, 12), -1)];
  }
  const start = addMonths(TIMELINE_ANCHOR, 12 + 3 * (n - 1));
  const end = shiftDays(addMonths(TIMELINE_ANCHOR, 12 + 3 * n), -1);
  return [start, end];
}

const ORBIT_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

function dayNumber(iso: string): number {
  return Date.parse(`${iso}T00:00:00Z`) / 86_400_000;
}

export function buildChartModel(
  payload: TimeseriesPayload,
  shadePeriods: number[] = [],
): ChartModel {
  const allSamples = payload.series.flatMap((s) => s.samples);
  if (allSamples.length === 0) {
    return {
      series: [],
      dateMin: INVASION_DATE,
      dateMax: INVASION_DATE,
      valueMin: 0,
      valueMax: 0,
      invasionFrac: null,
      bands: [],
    };
  }
  const dates = allSamples.map((s) => s.date).sort();
  const dateMin = dates[0];
  const dateMax = dates[dates.length - 1];
  const d0 = dayNumber(dateMin);
  const d1 = dayNumber(dateMax);
  const span = Math.max(d1 - d0, 1);
  let valueMin = Infinity;
  let valueMax = -Infinity;
  for (const s of allSamples) {
    if (s.value_db < valueMin) valueMin = s.value_db;
    if (s.value_db > valueMax) valueMax = s.value_db;
  }
  if (valueMax === valueMin) valueMax = valueMin + 1;

  const orbits = [...new Set(payload.series.map((s) => s.orbit))].sort((a, b) => a - b);
  const series = payload.series.map((s: Series): ChartSeries => {
    const color = ORBIT_COLORS[orbits.indexOf(s.orbit) % ORBIT_COLORS.length];
    return {
      key: `${s.orbit}/${s.polarization}`,
      orbit: s.orbit,
      polarization: s.polarization,
      direction: s.direction,
      color,
      dash: s.polarization === "VH" ? "4 3" : "",
      points: s.samples.map((sample) => ({
        date: sample.date,
        value: sample.value_db, // carried through exactly, never rounded
        xFrac: (dayNumber(sample.date) - d0) / span,
        yFrac: (sample.value_db - valueMin) / (valueMax - valueMin),
      })),
    };
  });

  const invasionDay = dayNumber(INVASION_DATE);
  const invasionFrac =
    invasionDay >= d0 && invasionDay <= d1 ? (invasionDay - d0) / span : null;

  const bands: PeriodBand[] = [];
  for (const n of shadePeriods) {
    const [start, end] = periodRange(n);
    const b0 = Math.max((dayNumber(start) - d0) / span, 0);
    const b1 = Math.min((dayNumber(end) - d0) / span, 1);
    if (b1 > 0 && b0 < 1 && b1 > b0) {
      bands.push({ period: n, x0Frac: b0, x1Frac: b1 });
    }
  }

  return { series, dateMin, dateMax, valueMin, valueMax, invasionFrac, bands };
}

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 640;
const HEIGHT = 220;
const PAD = { left: 42, right: 8, top: 8, bottom: 22 };

function sx(frac: number): number {
  return PAD.left + frac * (WIDTH - PAD.left - PAD.right);
}

function sy(frac: number): number {
  return HEIGHT - PAD.bottom - frac * (HEIGHT - PAD.top - PAD.bottom);
}

export function renderChart(model: ChartModel, container: HTMLElement): void {
  container.innerHTML = "";
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("class", "ts-chart");

  for (const band of model.bands) {
    const rect = document.createElementNS(SVG_NS, "rect");
    rect.setAttribute("x", String(sx(band.x0Frac)));
    rect.setAttribute("y", String(sy(1)));
    rect.setAttribute("width", String(sx(band.x1Frac) - sx(band.x0Frac)));
    rect.setAttribute("height", String(sy(0) - sy(1)));
    rect.setAttribute("fill", "#ffd54d");
    rect.setAttribute("opacity", "0.25");
    const tip = document.createElementNS(SVG_NS, "title");
    tip.textContent = `T${band.period}`;
    rect.appendChild(tip);
    svg.appendChild(rect);
  }

  if (model.invasionFrac !== null) {
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(sx(model.invasionFrac)));
    line.setAttribute("x2", String(sx(model.invasionFrac)));
    line.setAttribute("y1", String(sy(0)));
    line.setAttribute("y2", String(sy(1)));
    line.setAttribute("stroke", "#000");
    line.setAttribute("stroke-dasharray", "6 4");
    svg.appendChild(line);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(sx(model.invasionFrac) + 4));
    label.setAttribute("y", String(sy(1) + 10));
    label.setAttribute("class", "ts-label");
    label.textContent = INVASION_DATE;
    svg.appendChild(label);
  }

  for (const frac of [0, 0.5, 1]) {
    const value = model.valueMin + frac * (model.valueMax - model.valueMin);
    const text = document.createElementNS(SVG_NS, "text");
    text.setAttribute("x", "2");
    text.setAttribute("y", String(sy(frac) + 4));
    text.setAttribute("class", "ts-label");
    text.textContent = `${value.toFixed(1)} dB`;
    svg.appendChild(text);
  }
  for (const [frac, label] of [
    [0, model.dateMin],
    [1, model.dateMax],
  ] as [number, string][]) {
    const text = document.createElementNS(SVG_NS, "text");
    text.setAttribute("x", String(sx(frac) - (frac === 1 ? 64 : 0)));
    text.setAttribute("y", String(HEIGHT - 6));
    text.setAttribute("class", "ts-label");
    text.textContent = label;
    svg.appendChild(text);
  }

  for (const series of model.series) {
    const path = document.createElementNS(SVG_NS, "polyline");
    path.setAttribute(
      "points",
      series.points.map((p) => `${sx(p.xFrac)},${sy(p.yFrac)}`).join(" "),
    );
    path.setAttribute("fill", "none");
    path.setAttribute("stroke", series.color);
    path.setAttribute("stroke-width", "1.2");
    if (series.dash) path.setAttribute("stroke-dasharray", series.dash);
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `orbit ${series.orbit} ${series.polarization} (${series.direction})`;
    path.appendChild(title);
    svg.appendChild(path);

    for (const p of series.points) {
      const dot = document.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(sx(p.xFrac)));
      dot.setAttribute("cy", String(sy(p.yFrac)));
      dot.setAttribute("r", "1.8");
      dot.setAttribute("fill", series.color);
      const tip = document.createElementNS(SVG_NS, "title");
      tip.textContent = `${p.date}: ${p.value} dB`;
      dot.appendChild(tip);
      svg.appendChild(dot);
    }
  }

  const legend = document.createElement("div");
  legend.className = "ts-legend";
  for (const series of model.series) {
    const item = document.createElement("span");
    item.style.color = series.color;
    item.textContent = `${series.dash ? "┅" : "—"} orbit ${series.orbit} ${series.polarization}`;
    legend.appendChild(item);
  }
  container.appendChild(svg);
  container.appendChild(legend);
}
