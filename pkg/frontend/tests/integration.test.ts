// Integration against the real assessment service (spawned in global
// setup): the dashboard's client-side counts must equal the service's
// roll-up, threshold movement must not trigger inference, and the chart
// model must carry /timeseries values verbatim.

import { beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { runAssessment } from "../src/jobs";
import { buildChartModel } from "../src/timeseries";
import { damagedCount } from "../src/verdict";
import type { BuildingFeature, ServiceInfo } from "../src/types";

let api: ApiClient;
let info: ServiceInfo;

beforeAll(async () => {
  const url = process.env.SERVICE_URL;
  if (!url) throw new Error("SERVICE_URL not set; global setup failed");
  api = new ApiClient(url);
  info = await api.info();
  // one full-extent assessment so buildings/rollup have data
  const status = await runAssessment(
    api,
    { bbox: info.extent, periods: [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12] },
    () => {},
    100,
  );
  expect(status.status).toBe("done");
});

describe("dashboard consistency with the service", () => {
  it("client-side damaged count equals /rollup at 0.5, 0.655 and 0.9", async () => {
    for (const threshold of [0.5, 0.655, 0.9]) {
      const doc = await api.buildings(threshold);
      const features = doc.features as BuildingFeature[];
      expect(features.length).toBeGreaterThan(0);

      const uiCount = damagedCount(features, threshold);
      const serverCount = features.filter((f) => f.properties.final === 1).length;
      expect(uiCount).toBe(serverCount); // client mirrors the rule exactly

      const rollup = await api.rollup("region", threshold);
      const rollupCount = rollup.rows.reduce((acc, row) => acc + row.n_damaged, 0);
      expect(uiCount).toBe(rollupCount); // integer equality, per threshold
    }
  });

  it("damaged sets shrink as the threshold rises", async () => {
    const low = await api.buildings(0.5);
    const high = await api.buildings(0.9);
    const lowIds = new Set(
      low.features.filter((f) => f.properties.final === 1).map((f) => f.properties.id),
    );
    const highIds = new Set(
      high.features.filter((f) => f.properties.final === 1).map((f) => f.properties.id),
    );
    for (const id of highIds) expect(lowIds.has(id)).toBe(true);
  });

  it("slider movement issues zero /assess calls (inference counter unchanged)", async () => {
    const before = await api.metrics();
    // everything a slider drag triggers in the dashboard: recolor from the
    // already-loaded features, plus threshold-parameterized reads
    const doc = await api.buildings(0.5);
    const features = doc.features as BuildingFeature[];
    for (const threshold of [0.3, 0.5, 0.655, 0.8, 0.9]) {
      damagedCount(features, threshold);
      await api.buildings(threshold);
      await api.rollup("region", threshold);
    }
    const after = await api.metrics();
    expect(after.inference_calls).toBe(before.inference_calls);
    expect(after.assess_requests).toBe(before.assess_requests);
    expect(after.jobs_completed).toBe(before.jobs_completed);
  });

  it("time-series chart model equals the /timeseries payload exactly", async () => {
    const x = info.extent[0] + 35.0;
    const y = info.extent[1] + 35.0;
    const payload = await api.timeseries(x, y);
    expect(payload.series.length).toBe(info.orbits.length * 2);

    const model = buildChartModel(payload);
    for (const [i, series] of model.series.entries()) {
      const source = payload.series[i];
      expect(series.points.map((p) => [p.date, p.value])).toEqual(
        source.samples.map((s) => [s.date, s.value_db]),
      );
    }
  });

  it("re-posting the identical request reuses the finished job", async () => {
    const before = await api.metrics();
    const status = await runAssessment(
      api,
      { bbox: info.extent, periods: [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12] },
      () => {},
      50,
    );
    expect(status.status).toBe("done");
    const after = await api.metrics();
    expect(after.inference_calls).toBe(before.inference_calls);
  });
});
