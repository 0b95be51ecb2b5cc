// Canvas map: probability rasters as positioned image overlays (no tile
// pyramid — fine for desk-scale areas), buildings as polygons colored by
// the client-side verdict, and a plain coordinate grid as the basemap.

import type { BuildingFeature, JobResultRefs, RasterMeta, ServiceInfo } from "./types";
import { finalVerdict, perPeriodOf } from "./verdict";

export interface Viewport {
  centerX: number;
  centerY: number;
  zoom: number; // screen px per CRS unit
}

export function worldToScreen(
  vp: Viewport, width: number, height: number, x: number, y: number,
): [number, number] {
  return [
    width / 2 + (x - vp.centerX) * vp.zoom,
    height / 2 - (y - vp.centerY) * vp.zoom,
  ];
}

export function screenToWorld(
  vp: Viewport, width: number, height: number, sx: number, sy: number,
): [number, number] {
  return [
    vp.centerX + (sx - width / 2) / vp.zoom,
    vp.centerY - (sy - height / 2) / vp.zoom,
  ];
}

export interface RasterOverlay {
  image: HTMLImageElement;
  mask: HTMLImageElement;
  meta: RasterMeta;
  period: number;
}

export async function loadOverlay(
  baseUrl: string, refs: JobResultRefs, meta: RasterMeta, period: number,
): Promise<RasterOverlay | null> {
  const entry = refs.rasters[String(period)];
  if (!entry) return null;
  const load = (name: string) =>
    new Promise<HTMLImageElement>((resolve, reject) => {
      const img = new Image();
      img.crossOrigin = "anonymous";
      img.onload = () => resolve(img);
      img.onerror = () => reject(new Error(`failed to load ${name}`));
      img.src = `${baseUrl}${refs.base_url}/${name}`;
    });
  const [image, mask] = await Promise.all([load(entry.png), load(entry.mask)]);
  return { image, mask, meta, period };
}

/** Pre-composite gray PNG + nodata mask into a colored, holed overlay. */
export function compositeOverlay(overlay: RasterOverlay): HTMLCanvasElement {
  const { image, mask, meta } = overlay;
  const canvas = document.createElement("canvas");
  canvas.width = meta.width;
  canvas.height = meta.height;
  const ctx = canvas.getContext("2d")!;
  ctx.drawImage(image, 0, 0);
  const data = ctx.getImageData(0, 0, meta.width, meta.height);
  const maskCanvas = document.createElement("canvas");
  maskCanvas.width = meta.width;
  maskCanvas.height = meta.height;
  const mctx = maskCanvas.getContext("2d")!;
  mctx.drawImage(mask, 0, 0);
  const maskData = mctx.getImageData(0, 0, meta.width, meta.height);
  for (let i = 0; i < meta.width * meta.height; i++) {
    const v = data.data[i * 4] / 255; // gray code -> probability
    const [r, g, b] = heatColor(v);
    data.data[i * 4] = r;
    data.data[i * 4 + 1] = g;
    data.data[i * 4 + 2] = b;
    const nodata = maskData.data[i * 4] > 127;
    data.data[i * 4 + 3] = nodata ? 0 : Math.round(40 + 180 * v);
  }
  ctx.putImageData(data, 0, 0);
  return canvas;
}

export function heatColor(p: number): [number, number, number] {
  // dark blue -> yellow -> red ramp
  const t = Math.min(1, Math.max(0, p));
  if (t < 0.5) {
    const u = t / 0.5;
    return [Math.round(30 + 225 * u), Math.round(40 + 200 * u), Math.round(90 * (1 - u))];
  }
  const u = (t - 0.5) / 0.5;
  return [255, Math.round(240 * (1 - u)), 0];
}

export function buildingColor(verdict: 0 | 1): string {
  return verdict === 1 ? "#d62728" : "#4f9d4f";
}

export class MapView {
  private ctx: CanvasRenderingContext2D;
  overlays: Map<number, HTMLCanvasElement> = new Map();
  overlayMeta: RasterMeta | null = null;
  buildings: BuildingFeature[] = [];
  regionCounts: { name: string; pct: number; ring: [number, number][] }[] = [];

  constructor(
    private canvas: HTMLCanvasElement,
    private info: ServiceInfo,
  ) {
    this.ctx = canvas.getContext("2d")!;
  }

  render(
    vp: Viewport,
    layer: "heatmap" | "buildings" | "rollup",
    threshold: number,
    activePeriod: number | null,
    dragRect: [number, number, number, number] | null,
  ): void {
    const { width, height } = this.canvas;
    const ctx = this.ctx;
    ctx.clearRect(0, 0, width, height);
    this.drawGrid(vp);
    this.drawExtent(vp);

    if (layer === "heatmap" && activePeriod !== null) {
      const composited = this.overlays.get(activePeriod);
      if (composited && this.overlayMeta) {
        const m = this.overlayMeta;
        const [x0, dx, , y0, , dy] = m.transform;
        const [sx0, sy0] = worldToScreen(vp, width, height, x0, y0);
        ctx.imageSmoothingEnabled = false;
        ctx.drawImage(
          composited,
          sx0,
          sy0,
          m.width * dx * vp.zoom,
          -m.height * dy * vp.zoom,
        );
      }
    }

    if (layer === "buildings" || layer === "heatmap") {
      for (const feature of this.buildings) {
        const verdict = finalVerdict(perPeriodOf(feature), threshold);
        this.drawBuilding(vp, feature, buildingColor(verdict));
      }
    }

    if (layer === "rollup") {
      for (const region of this.regionCounts) {
        this.drawRegion(vp, region);
      }
    }

    if (dragRect) {
      ctx.strokeStyle = "#0066ff";
      ctx.setLineDash([6, 4]);
      ctx.strokeRect(
        dragRect[0],
        dragRect[1],
        dragRect[2] - dragRect[0],
        dragRect[3] - dragRect[1],
      );
      ctx.setLineDash([]);
    }
  }

  private drawGrid(vp: Viewport): void {
    const { width, height } = this.canvas;
    const ctx = this.ctx;
    const step = this.gridStep(vp.zoom);
    const [wx0, wy1] = screenToWorld(vp, width, height, 0, 0);
    const [wx1, wy0] = screenToWorld(vp, width, height, width, height);
    ctx.strokeStyle = "#e4e4e4";
    ctx.fillStyle = "#999";
    ctx.font = "10px sans-serif";
    ctx.lineWidth = 1;
    for (let x = Math.floor(wx0 / step) * step; x <= wx1; x += step) {
      const [sx] = worldToScreen(vp, width, height, x, 0);
      ctx.beginPath();
      ctx.moveTo(sx, 0);
      ctx.lineTo(sx, height);
      ctx.stroke();
      ctx.fillText(x.toFixed(0), sx + 2, height - 4);
    }
    for (let y = Math.floor(wy0 / step) * step; y <= wy1; y += step) {
      const [, sy] = worldToScreen(vp, width, height, 0, y);
      ctx.beginPath();
      ctx.moveTo(0, sy);
      ctx.lineTo(width, sy);
      ctx.stroke();
      ctx.fillText(y.toFixed(0), 2, sy - 2);
    }
  }

  private gridStep(zoom: number): number {
    const targetPx = 90;
    const raw = targetPx / zoom;
    const mag = Math.pow(10, Math.floor(Math.log10(raw)));
    for (const m of [1, 2, 5, 10]) {
      if (mag * m >= raw) return mag * m;
    }
    return mag * 10;
  }

  private drawExtent(vp: Viewport): void {
    const [xmin, ymin, xmax, ymax] = this.info.extent;
    const { width, height } = this.canvas;
    const [sx0, sy0] = worldToScreen(vp, width, height, xmin, ymax);
    const [sx1, sy1] = worldToScreen(vp, width, height, xmax, ymin);
    this.ctx.strokeStyle = "#888";
    this.ctx.strokeRect(sx0, sy0, sx1 - sx0, sy1 - sy0);
  }

  private ringPath(vp: Viewport, ring: number[][] | [number, number][]): void {
    const { width, height } = this.canvas;
    const ctx = this.ctx;
    ring.forEach((pt, i) => {
      const [sx, sy] = worldToScreen(vp, width, height, pt[0] as number, pt[1] as number);
      if (i === 0) ctx.moveTo(sx, sy);
      else ctx.lineTo(sx, sy);
    });
    ctx.closePath();
  }

  private drawBuilding(vp: Viewport, feature: BuildingFeature, color: string): void {
    const ctx = this.ctx;
    ctx.beginPath();
    const geom = feature.geometry;
    const polys =
      geom.type === "Polygon"
        ? [geom.coordinates as number[][][]]
        : (geom.coordinates as number[][][][]);
    for (const rings of polys) {
      for (const ring of rings) this.ringPath(vp, ring);
    }
    ctx.fillStyle = color + "b0";
    ctx.strokeStyle = color;
    ctx.fill("evenodd");
    ctx.stroke();
  }

  private drawRegion(
    vp: Viewport, region: { name: string; pct: number; ring: [number, number][] },
  ): void {
    const ctx = this.ctx;
    ctx.beginPath();
    this.ringPath(vp, region.ring);
    const heat = Math.min(1, region.pct / 50);
    const [r, g, b] = heatColor(heat);
    ctx.fillStyle = `rgba(${r},${g},${b},0.45)`;
    ctx.fill();
    ctx.stroke();
    const cx = region.ring.reduce((acc, p) => acc + p[0], 0) / region.ring.length;
    const cy = region.ring.reduce((acc, p) => acc + p[1], 0) / region.ring.length;
    const { width, height } = this.canvas;
    const [sx, sy] = worldToScreen(vp, width, height, cx, cy);
    ctx.fillStyle = "#222";
    ctx.font = "12px sans-serif";
    ctx.fillText(`${region.name}: ${region.pct.toFixed(1)}%`, sx - 30, sy);
  }

  hitBuilding(vp: Viewport, sx: number, sy: number): BuildingFeature | null {
    const { width, height } = this.canvas;
    const [x, y] = screenToWorld(vp, width, height, sx, sy);
    for (const feature of this.buildings) {
      const geom = feature.geometry;
      const polys =
        geom.type === "Polygon"
          ? [geom.coordinates as number[][][]]
          : (geom.coordinates as number[][][][]);
      for (const rings of polys) {
        if (pointInRing(x, y, rings[0])) return feature;
      }
    }
    return null;
  }
}

export function pointInRing(x: number, y: number, ring: number[][]): boolean {
  let inside = false;
  for (let i = 0, j = ring.length - 1; i < ring.length; j = i++) {
    const [x1, y1] = ring[i];
    const [x2, y2] = ring[j];
    if (y1 > y !== y2 > y && x < ((x2 - x1) * (y - y1)) / (y2 - y1) + x1) {
      inside = !inside;
    }
  }
  return inside;
}
