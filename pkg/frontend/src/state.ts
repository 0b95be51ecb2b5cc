// Dashboard view state with URL mirroring: every client-visible knob lives
// in the query string, so a view is shareable by copying the address bar.
// Threshold changes are state-only; nothing here talks to the network.

export type LayerKind = "heatmap" | "buildings" | "rollup";

export interface ViewState {
  threshold: number;
  layer: LayerKind;
  periods: number[];
  centerX: number;
  centerY: number;
  zoom: number; // screen pixels per CRS unit, log-ish steps
  selectedPixel: [number, number] | null;
  selectedBuilding: string | null;
}

export const DEFAULT_STATE: ViewState = {
  threshold: 0.655,
  layer: "heatmap",
  periods: [5, 6, 7, 8, 9, 10, 11, 12],
  centerX: 0,
  centerY: 0,
  zoom: 1,
  selectedPixel: null,
  selectedBuilding: null,
};

type Listener = (state: ViewState, changed: (keyof ViewState)[]) => void;

export class StateStore {
  private state: ViewState;
  private listeners: Listener[] = [];

  constructor(initial?: Partial<ViewState>) {
    this.state = { ...DEFAULT_STATE, ...initial };
  }

  get(): ViewState {
    return this.state;
  }

  update(patch: Partial<ViewState>): void {
    const changed = (Object.keys(patch) as (keyof ViewState)[]).filter(
      (k) => JSON.stringify(this.state[k]) !== JSON.stringify(patch[k]),
    );
    if (changed.length === 0) return;
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state, changed);
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }
}

export function stateToQuery(state: ViewState): string {
  const params = new URLSearchParams();
  params.set("t", state.threshold.toString());
  params.set("layer", state.layer);
  params.set("periods", state.periods.join(","));
  params.set("cx", state.centerX.toFixed(1));
  params.set("cy", state.centerY.toFixed(1));
  params.set("z", state.zoom.toString());
  if (state.selectedPixel) params.set("px", state.selectedPixel.join(","));
  if (state.selectedBuilding) params.set("b", state.selectedBuilding);
  return params.toString();
}

export function stateFromQuery(query: string): Partial<ViewState> {
  const params = new URLSearchParams(query);
  const out: Partial<ViewState> = {};
  const t = params.get("t");
  if (t !== null && Number.isFinite(Number(t))) {
    out.threshold = Math.min(1, Math.max(0, Number(t)));
  }
  const layer = params.get("layer");
  if (layer === "heatmap" || layer === "buildings" || layer === "rollup") {
    out.layer = layer;
  }
  const periods = params.get("periods");
  if (periods) {
    const parsed = periods
      .split(",")
      .map((p) => Number(p))
      .filter((p) => Number.isInteger(p) && p >= 1 && p <= 12);
    if (parsed.length) out.periods = parsed;
  }
  const cx = params.get("cx");
  const cy = params.get("cy");
  if (cx !== null && cy !== null) {
    out.centerX = Number(cx);
    out.centerY = Number(cy);
  }
  const z = params.get("z");
  if (z !== null && Number(z) > 0) out.zoom = Number(z);
  const px = params.get("px");
  if (px) {
    const [x, y] = px.split(",").map(Number);
    if (Number.isFinite(x) && Number.isFinite(y)) out.selectedPixel = [x, y];
  }
  const b = params.get("b");
  if (b) out.selectedBuilding = b;
  return out;
}
