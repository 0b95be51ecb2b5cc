// Client-side mirror of the building decision rule, so the threshold
// slider recolors instantly from the per-period likelihoods already in the
// GeoJSON — no service round-trip, no re-inference.

import type { BuildingFeature, PerPeriod } from "./types";

export const PRE_INVASION_PERIODS = [1, 2, 3, 4];
export const POST_INVASION_PERIODS = [5, 6, 7, 8, 9, 10, 11, 12];

export function perPeriodOf(feature: BuildingFeature): PerPeriod {
  const out: PerPeriod = {};
  for (let n = 1; n <= 12; n++) {
    const raw = feature.properties[`y_T${n}`];
    if (raw !== undefined) out[n] = raw === null ? null : (raw as number);
  }
  return out;
}

function maxOver(perPeriod: PerPeriod, periods: number[]): number | null {
  let best: number | null = null;
  for (const n of periods) {
    const v = perPeriod[n];
    if (v !== null && v !== undefined && (best === null || v > best)) best = v;
  }
  return best;
}

/** Damaged iff some post-invasion period reaches the threshold while every
 * pre-invasion period stays below it (missing pre coverage is vacuous). */
export function finalVerdict(perPeriod: PerPeriod, threshold: number): 0 | 1 {
  const post = maxOver(perPeriod, POST_INVASION_PERIODS);
  if (post === null || post < threshold) return 0;
  const pre = maxOver(perPeriod, PRE_INVASION_PERIODS);
  if (pre !== null && pre >= threshold) return 0;
  return 1;
}

export function damagedCount(features: BuildingFeature[], threshold: number): number {
  let count = 0;
  for (const f of features) {
    count += finalVerdict(perPeriodOf(f), threshold);
  }
  return count;
}

export function damagedIds(features: BuildingFeature[], threshold: number): Set<string> {
  const out = new Set<string>();
  for (const f of features) {
    if (finalVerdict(perPeriodOf(f), threshold) === 1) out.add(f.properties.id);
  }
  return out;
}
