import { describe, expect, it } from "vitest";

import { buildChartModel, periodRange } from "../src/timeseries";
import type { TimeseriesPayload } from "../src/types";

const payload: TimeseriesPayload = {
  x: 500100,
  y: 5500200,
  col: 10,
  row: 44,
  series: [
    {
      orbit: 43,
      direction: "ASC",
      polarization: "VV",
      samples: [
        { date: "2020-03-01", value_db: -10.25 },
        { date: "2021-06-15", value_db: -9.5 },
        { date: "2022-08-01", value_db: -13.125 },
      ],
      gaps: ["2021-01-01"],
    },
    {
      orbit: 43,
      direction: "ASC",
      polarization: "VH",
      samples: [
        { date: "2020-03-01", value_db: -16.75 },
        { date: "2022-08-01", value_db: -19.0 },
      ],
      gaps: [],
    },
    {
      orbit: 116,
      direction: "DESC",
      polarization: "VV",
      samples: [{ date: "2020-05-01", value_db: -8.0 }],
      gaps: [],
    },
  ],
};

describe("buildChartModel", () => {
  it("carries payload values through exactly, no rounding", () => {
    const model = buildChartModel(payload);
    for (const [i, series] of model.series.entries()) {
      const source = payload.series[i];
      expect(series.points.map((p) => p.value)).toEqual(
        source.samples.map((s) => s.value_db),
      );
      expect(series.points.map((p) => p.date)).toEqual(
        source.samples.map((s) => s.date),
      );
    }
  });

  it("builds one series per (orbit, polarization) with distinct styling", () => {
    const model = buildChartModel(payload);
    expect(model.series.map((s) => s.key)).toEqual(["43/VV", "43/VH", "116/VV"]);
    const vv43 = model.series[0];
    const vh43 = model.series[1];
    const vv116 = model.series[2];
    expect(vv43.color).toBe(vh43.color); // same orbit, same hue
    expect(vv43.color).not.toBe(vv116.color); // different orbit, different hue
    expect(vv43.dash).toBe(""); // co-pol solid
    expect(vh43.dash).not.toBe(""); // cross-pol dashed
  });

  it("places the invasion marker between the data extremes", () => {
    const model = buildChartModel(payload);
    expect(model.invasionFrac).not.toBeNull();
    expect(model.invasionFrac!).toBeGreaterThan(0);
    expect(model.invasionFrac!).toBeLessThan(1);
    // 2022-02-24 sits later than halfway between 2020-03-01 and 2022-08-01
    expect(model.invasionFrac!).toBeGreaterThan(0.5);
  });

  it("normalizes fractions into [0, 1]", () => {
    const model = buildChartModel(payload);
    for (const series of model.series) {
      for (const p of series.points) {
        expect(p.xFrac).toBeGreaterThanOrEqual(0);
        expect(p.xFrac).toBeLessThanOrEqual(1);
        expect(p.yFrac).toBeGreaterThanOrEqual(0);
        expect(p.yFrac).toBeLessThanOrEqual(1);
      }
    }
  });

  it("handles an empty payload", () => {
    const model = buildChartModel({ x: 0, y: 0, col: 0, row: 0, series: [] });
    expect(model.series).toEqual([]);
    expect(model.invasionFrac).toBeNull();
  });

  it("shades requested periods clipped to the data range", () => {
    const model = buildChartModel(payload, [5, 12]);
    // data spans 2020-03-01 .. 2022-08-01; T5 (2022-02-24..2022-05-23) is
    // inside, T12 (2023-11-24..2024-02-23) is entirely after
    expect(model.bands.map((b) => b.period)).toEqual([5]);
    const band = model.bands[0];
    expect(band.x0Frac).toBeGreaterThan(0);
    expect(band.x1Frac).toBeLessThan(1);
    expect(band.x0Frac).toBeCloseTo(model.invasionFrac!, 10);
  });
});

describe("periodRange", () => {
  it("mirrors the service timeline", () => {
    expect(periodRange(0)).toEqual(["2020-02-24", "2021-02-23"]);
    expect(periodRange(1)).toEqual(["2021-02-24", "2021-05-23"]);
    expect(periodRange(5)).toEqual(["2022-02-24", "2022-05-23"]);
    expect(periodRange(12)).toEqual(["2023-11-24", "2024-02-23"]);
  });

  it("keeps windows contiguous", () => {
    for (let n = 1; n <= 12; n++) {
      const prevEnd = Date.parse(periodRange(n - 1)[1] + "T00:00:00Z");
      const start = Date.parse(periodRange(n)[0] + "T00:00:00Z");
      expect(start - prevEnd).toBe(86_400_000);
    }
  });
});
