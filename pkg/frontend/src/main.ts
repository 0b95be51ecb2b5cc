// Dashboard wiring: one Dashboard instance owns the state store, the API
// client, the canvas map and the side panels. Threshold moves only touch
// local state and redraw; data endpoints are queried when layers or
// assessments actually change.

import { ApiClient } from "./api";
import { runAssessment } from "./jobs";
import { MapView, loadOverlay, compositeOverlay, screenToWorld } from "./mapview";
import { StateStore, stateFromQuery, stateToQuery, ViewState } from "./state";
import { buildChartModel, renderChart } from "./timeseries";
import type { BuildingCollection, JobResultRefs, RasterMeta, ServiceInfo } from "./types";
import { damagedCount, perPeriodOf } from "./verdict";

const SERVICE_URL =
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8008";

type Mode = "pan" | "assess" | "inspect";

class Dashboard {
  private api = new ApiClient(SERVICE_URL);
  private store = new StateStore(stateFromQuery(location.search));
  private info!: ServiceInfo;
  private map!: MapView;
  private canvas = document.getElementById("map") as HTMLCanvasElement;
  private mode: Mode = "pan";
  private dragStart: [number, number] | null = null;
  private dragRect: [number, number, number, number] | null = null;
  private lastJob: { refs: JobResultRefs; meta: RasterMeta } | null = null;
  private banner = document.getElementById("banner")!;

  async start(): Promise<void> {
    try {
      this.info = await this.api.info();
    } catch (err) {
      this.banner.textContent =
        `service unreachable at ${SERVICE_URL} — start it with the serve ` +
        "command, then reload";
      this.banner.classList.add("error");
      return;
    }
    this.map = new MapView(this.canvas, this.info);
    const [xmin, ymin, xmax, ymax] = this.info.extent;
    const current = this.store.get();
    if (current.centerX === 0 && current.centerY === 0) {
      this.store.update({
        centerX: (xmin + xmax) / 2,
        centerY: (ymin + ymax) / 2,
        zoom: Math.min(
          (this.canvas.width * 0.8) / (xmax - xmin),
          (this.canvas.height * 0.8) / (ymax - ymin),
        ),
        threshold: this.store.get().threshold || this.info.default_threshold,
      });
    }
    this.bindControls();
    this.store.subscribe((state, changed) => this.onStateChange(state, changed));
    await this.refreshBuildings();
    await this.refreshRollup();
    this.redraw();
    this.banner.textContent =
      `connected to ${SERVICE_URL} — model ${this.info.model_id}, ` +
      `${this.info.n_footprints} footprints`;
  }

  // ------------------------------------------------------------- controls

  private bindControls(): void {
    const slider = document.getElementById("threshold") as HTMLInputElement;
    const readout = document.getElementById("threshold-readout")!;
    slider.value = String(this.store.get().threshold);
    readout.textContent = slider.value;
    slider.addEventListener("input", () => {
      // state-only: recolor from stored likelihoods, zero network calls
      this.store.update({ threshold: Number(slider.value) });
    });

    for (const kind of ["heatmap", "buildings", "rollup"] as const) {
      const btn = document.getElementById(`layer-${kind}`)!;
      btn.addEventListener("click", () => this.store.update({ layer: kind }));
    }

    const periodBox = document.getElementById("periods")!;
    for (const n of this.info.periods) {
      const label = document.createElement("label");
      const cb = document.createElement("input");
      cb.type = "checkbox";
      cb.value = String(n);
      cb.checked = this.store.get().periods.includes(n);
      cb.addEventListener("change", () => {
        const checked = [...periodBox.querySelectorAll("input:checked")].map((el) =>
          Number((el as HTMLInputElement).value),
        );
        this.store.update({ periods: checked });
      });
      label.appendChild(cb);
      label.appendChild(document.createTextNode(`T${n}`));
      periodBox.appendChild(label);
    }

    for (const mode of ["pan", "assess", "inspect"] as Mode[]) {
      const btn = document.getElementById(`mode-${mode}`)!;
      btn.addEventListener("click", () => {
        this.mode = mode;
        document
          .querySelectorAll(".mode-btn")
          .forEach((el) => el.classList.toggle("active", el.id === `mode-${mode}`));
      });
    }

    this.canvas.addEventListener("mousedown", (ev) => this.onMouseDown(ev));
    this.canvas.addEventListener("mousemove", (ev) => this.onMouseMove(ev));
    this.canvas.addEventListener("mouseup", (ev) => this.onMouseUp(ev));
    this.canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      const factor = ev.deltaY < 0 ? 1.2 : 1 / 1.2;
      this.store.update({ zoom: this.store.get().zoom * factor });
    });
  }

  private viewport() {
    const s = this.store.get();
    return { centerX: s.centerX, centerY: s.centerY, zoom: s.zoom };
  }

  private onMouseDown(ev: MouseEvent): void {
    this.dragStart = [ev.offsetX, ev.offsetY];
    if (this.mode === "assess") {
      this.dragRect = [ev.offsetX, ev.offsetY, ev.offsetX, ev.offsetY];
    }
  }

  private onMouseMove(ev: MouseEvent): void {
    if (!this.dragStart) return;
    if (this.mode === "pan") {
      const s = this.store.get();
      this.store.update({
        centerX: s.centerX - ev.movementX / s.zoom,
        centerY: s.centerY + ev.movementY / s.zoom,
      });
    } else if (this.mode === "assess" && this.dragRect) {
      this.dragRect[2] = ev.offsetX;
      this.dragRect[3] = ev.offsetY;
      this.redraw();
    }
  }

  private onMouseUp(ev: MouseEvent): void {
    const start = this.dragStart;
    this.dragStart = null;
    if (this.mode === "assess" && this.dragRect) {
      const rect = this.dragRect;
      this.dragRect = null;
      void this.assessRect(rect);
      return;
    }
    if (this.mode === "inspect" && start) {
      const [x, y] = screenToWorld(
        this.viewport(), this.canvas.width, this.canvas.height,
        ev.offsetX, ev.offsetY,
      );
      this.store.update({ selectedPixel: [x, y] });
      return;
    }
    if (this.mode === "pan" && start) {
      const moved =
        Math.abs(ev.offsetX - start[0]) + Math.abs(ev.offsetY - start[1]);
      if (moved < 3) {
        const hit = this.map.hitBuilding(this.viewport(), ev.offsetX, ev.offsetY);
        this.store.update({ selectedBuilding: hit ? hit.properties.id : null });
      }
    }
  }

  // ------------------------------------------------------------- data flow

  private async onStateChange(
    state: ViewState, changed: (keyof ViewState)[],
  ): Promise<void> {
    history.replaceState(null, "", `?${stateToQuery(state)}`);
    const sliderReadout = document.getElementById("threshold-readout")!;
    sliderReadout.textContent = state.threshold.toFixed(3);

    if (changed.includes("threshold") || changed.includes("periods")) {
      this.updateCounts();
    }
    if (changed.includes("threshold") && state.layer === "rollup") {
      await this.refreshRollup();
    }
    if (changed.includes("layer") && state.layer === "rollup") {
      await this.refreshRollup();
    }
    if (changed.includes("selectedPixel") && state.selectedPixel) {
      await this.showTimeseries(state.selectedPixel);
    }
    if (changed.includes("selectedBuilding")) {
      this.showBuildingPanel(state.selectedBuilding);
    }
    this.redraw();
  }

  private async refreshBuildings(): Promise<void> {
    const doc: BuildingCollection = await this.api.buildings(
      this.store.get().threshold,
    );
    this.map.buildings = doc.features;
    if (doc.coverage === "none") {
      this.banner.textContent =
        "no assessments yet — switch to assess mode and drag a rectangle";
    }
    this.updateCounts();
  }

  private async refreshRollup(): Promise<void> {
    if (this.info.n_regions === 0) return;
    const payload = await this.api.rollup("region", this.store.get().threshold);
    this.map.regionCounts = payload.rows
      .filter((row) => row.region_id !== "unassigned")
      .map((row) => ({
        name: row.name ?? row.region_id ?? "?",
        pct: row.pct,
        ring: [],
      }));
    const list = document.getElementById("rollup-list")!;
    list.innerHTML = "";
    for (const row of payload.rows) {
      const li = document.createElement("li");
      li.textContent =
        `${row.name ?? row.region_id}: ${row.n_damaged}/${row.n_buildings} ` +
        `(${row.pct.toFixed(1)}%)`;
      list.appendChild(li);
    }
  }

  /** The headline number: recomputed client-side from stored likelihoods,
   * and equal (integer-equal) to what /rollup reports at this threshold. */
  private updateCounts(): void {
    const state = this.store.get();
    const count = damagedCount(this.map.buildings, state.threshold);
    document.getElementById("damaged-count")!.textContent =
      `${count} of ${this.map.buildings.length} buildings damaged ` +
      `at t=${state.threshold.toFixed(3)}`;
    const t = state.threshold.toFixed(3);
    document.getElementById("legend")!.innerHTML =
      `<span class="swatch" style="background:#d62728"></span>likely damaged (≥ ${t})` +
      `<span class="swatch" style="background:#4f9d4f"></span>intact (&lt; ${t})`;
  }

  private async assessRect(rect: [number, number, number, number]): Promise<void> {
    const vp = this.viewport();
    const [x0, y0] = screenToWorld(vp, this.canvas.width, this.canvas.height, rect[0], rect[1]);
    const [x1, y1] = screenToWorld(vp, this.canvas.width, this.canvas.height, rect[2], rect[3]);
    const bbox: [number, number, number, number] = [
      Math.min(x0, x1), Math.min(y0, y1), Math.max(x0, x1), Math.max(y0, y1),
    ];
    const progress = document.getElementById("job-progress")!;
    try {
      const status = await runAssessment(
        this.api,
        { bbox, periods: this.store.get().periods, reference_period: 0 },
        (p) => {
          progress.textContent = `job ${p.jobId}: ${p.status} ${(p.progress * 100).toFixed(0)}%`;
        },
      );
      if (status.status === "error" || !status.result) {
        progress.textContent = `job failed: ${status.error}`;
        return;
      }
      const meta: RasterMeta = await (
        await fetch(`${SERVICE_URL}${status.result.base_url}/${status.result.meta}`)
      ).json();
      this.lastJob = { refs: status.result, meta };
      this.map.overlays.clear();
      this.map.overlayMeta = meta;
      for (const period of this.store.get().periods) {
        const overlay = await loadOverlay(SERVICE_URL, status.result, meta, period);
        if (overlay) this.map.overlays.set(period, compositeOverlay(overlay));
      }
      await this.refreshBuildings();
      progress.textContent = `job ${status.id} done (${status.result.n_buildings} buildings)`;
      this.redraw();
    } catch (err) {
      progress.textContent = `assessment failed: ${String(err)}`;
    }
  }

  private async showTimeseries(pixel: [number, number]): Promise<void> {
    const panel = document.getElementById("ts-panel")!;
    try {
      const payload = await this.api.timeseries(pixel[0], pixel[1]);
      renderChart(buildChartModel(payload, this.store.get().periods), panel);
    } catch (err) {
      panel.textContent = `no coverage at that point (${String(err)})`;
    }
  }

  private showBuildingPanel(buildingId: string | null): void {
    const panel = document.getElementById("building-panel")!;
    panel.innerHTML = "";
    if (!buildingId) return;
    const feature = this.map.buildings.find((f) => f.properties.id === buildingId);
    if (!feature) return;
    const per = perPeriodOf(feature);
    const title = document.createElement("h3");
    title.textContent = `building ${buildingId}`;
    panel.appendChild(title);
    const bars = document.createElement("div");
    bars.className = "bars";
    for (let n = 1; n <= 12; n++) {
      const v = per[n];
      const bar = document.createElement("div");
      bar.className = "bar";
      const fill = document.createElement("div");
      fill.className = "bar-fill" + (n >= 5 ? " post" : " pre");
      fill.style.height = `${(v ?? 0) * 100}%`;
      fill.title = `T${n}: ${v === null || v === undefined ? "nodata" : v.toFixed(3)}`;
      bar.appendChild(fill);
      const lab = document.createElement("span");
      lab.textContent = `T${n}`;
      bar.appendChild(lab);
      bars.appendChild(bar);
    }
    panel.appendChild(bars);
  }

  private redraw(): void {
    const state = this.store.get();
    const activePeriod = state.periods.length
      ? Math.max(...state.periods)
      : null;
    this.map.render(
      this.viewport(), state.layer, state.threshold, activePeriod, this.dragRect,
    );
  }
}

new Dashboard().start();
