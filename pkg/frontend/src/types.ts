// Shared shapes of the assessment service's JSON payloads.

export interface ServiceInfo {
  extent: [number, number, number, number];
  crs: string;
  width: number;
  height: number;
  transform: number[]; // [x0, dx, 0, y0, 0, dy]
  orbits: number[];
  model_id: string;
  n_footprints: number;
  n_regions: number;
  default_threshold: number;
  periods: number[];
}

export type PerPeriod = Record<number, number | null>;

export interface BuildingProperties {
  id: string;
  area_m2: number;
  osm_class?: string;
  final: 0 | 1;
  threshold: number;
  flag?: string;
  [key: string]: unknown; // y_T1..y_T12
}

export interface BuildingFeature {
  type: "Feature";
  geometry: {
    type: "Polygon" | "MultiPolygon";
    coordinates: number[][][] | number[][][][];
  };
  properties: BuildingProperties;
}

export interface BuildingCollection {
  type: "FeatureCollection";
  features: BuildingFeature[];
  coverage?: "ok" | "none";
}

export interface AssessRequest {
  bbox: [number, number, number, number];
  periods: number[];
  reference_period?: number;
  window?: string;
}

export interface JobResultRefs {
  base_url: string;
  rasters: Record<string, { png: string; mask: string }>;
  buildings: string;
  meta: string;
  n_buildings: number;
}

export interface JobStatus {
  id: string;
  status: "queued" | "running" | "done" | "error";
  progress: number;
  error: string | null;
  result?: JobResultRefs;
}

export interface RasterMeta {
  width: number;
  height: number;
  transform: number[];
  crs: string;
  periods: Record<string, { nan_code: number }>;
}

export interface SeriesSample {
  date: string;
  value_db: number;
}

export interface Series {
  orbit: number;
  direction: string;
  polarization: string;
  samples: SeriesSample[];
  gaps: string[];
}

export interface TimeseriesPayload {
  x: number;
  y: number;
  col: number;
  row: number;
  series: Series[];
}

export interface RollupRow {
  region_id?: string;
  name?: string;
  osm_class?: string;
  n_buildings: number;
  n_damaged: number;
  pct: number;
}

export interface RollupPayload {
  level: string;
  threshold: number;
  rows: RollupRow[];
}
