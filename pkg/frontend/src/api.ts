// Thin client over the assessment service; every call is a plain fetch so
// tests can count exactly which endpoints fire.

import type {
  AssessRequest,
  BuildingCollection,
  JobStatus,
  RollupPayload,
  ServiceInfo,
  TimeseriesPayload,
} from "./types";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    const body = await resp.text();
    throw new ApiError(resp.status, `${resp.status}: ${body}`);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(public baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async info(): Promise<ServiceInfo> {
    return asJson(await fetch(this.url("/info")));
  }

  async assess(req: AssessRequest): Promise<{ job_id: string }> {
    return asJson(
      await fetch(this.url("/assess"), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(req),
      }),
    );
  }

  async jobStatus(jobId: string): Promise<JobStatus> {
    return asJson(await fetch(this.url(`/jobs/${jobId}`)));
  }

  async buildings(threshold: number, bbox?: [number, number, number, number]):
    Promise<BuildingCollection> {
    const params = new URLSearchParams({ threshold: String(threshold) });
    if (bbox) params.set("bbox", bbox.join(","));
    return asJson(await fetch(this.url(`/buildings?${params}`)));
  }

  async rollup(level: "region" | "class", threshold: number): Promise<RollupPayload> {
    const params = new URLSearchParams({ level, threshold: String(threshold) });
    return asJson(await fetch(this.url(`/rollup?${params}`)));
  }

  async timeseries(x: number, y: number): Promise<TimeseriesPayload> {
    const params = new URLSearchParams({ x: String(x), y: String(y) });
    return asJson(await fetch(this.url(`/timeseries?${params}`)));
  }

  async metrics(): Promise<Record<string, number>> {
    const resp = await fetch(this.url("/metrics"));
    const text = await resp.text();
    const out: Record<string, number> = {};
    for (const line of text.trim().split("\n")) {
      const [key, value] = line.split(" ");
      out[key] = Number(value);
    }
    return out;
  }

  fileUrl(baseUrl: string, name: string): string {
    return this.url(`${baseUrl}/${name}`);
  }
}
