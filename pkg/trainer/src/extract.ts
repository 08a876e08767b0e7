/**
 * Sparse interference extraction, matching the dataset toolkit: fit the
 * serving link's log-distance parameters per LoS class from the sampled
 * total-power measurements, subtract the implied base-station power, flag
 * negative leftovers, and min-max normalize the clamped magnitudes in dB.
 */
import { Environment, GridMap } from "./mapio.js";
import { Transmitter, losGrid, transmitterDistances, transmitterPosition } from "./geometry.js";

export const POWER_FLOOR_W = 1e-20;

const TRIM_ROUNDS = 5;
const TRIM_FRACTION = 0.2;

export function powerToDb(powerW: number): number {
  return 10 * Math.log10(Math.max(powerW, POWER_FLOOR_W));
}

export function dbToPower(db: number): number {
  return Math.pow(10, db / 10);
}

export interface NormBounds {
  rMinDb: number;
  rMaxDb: number;
}

export function normalizeDb(bounds: NormBounds, db: number): number {
  const u = (db - bounds.rMinDb) / (bounds.rMaxDb - bounds.rMinDb);
  return u < 0 ? 0 : u > 1 ? 1 : u;
}

export function denormalizeDb(bounds: NormBounds, u: number): number {
  return u * (bounds.rMaxDb - bounds.rMinDb) + bounds.rMinDb;
}

export interface ChannelParams {
  los_exponent: number;
  los_intercept_db: number;
  nlos_exponent: number;
  nlos_intercept_db: number;
}

export interface EstimatedParams extends ChannelParams {
  losFallback: boolean;
  nlosFallback: boolean;
}

export class PathlossFitError extends Error {}

interface ClassFit {
  exponent: number;
  intercept: number;
}

function lsFit(logD: Float64Array, y: Float64Array, idx: Int32Array): ClassFit {
  // Centered normal equations; the centered second moment doubles as the
  // rank check (zero when all sampled distances coincide).
  const m = idx.length;
  let sx = 0;
  let sy = 0;
  for (let i = 0; i < m; i++) {
    sx += logD[idx[i]];
    sy += y[idx[i]];
  }
  const mx = sx / m;
  const my = sy / m;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < m; i++) {
    const dx = logD[idx[i]] - mx;
    sxx += dx * dx;
    sxy += dx * (y[idx[i]] - my);
  }
  if (!(sxx > 1e-12 * m)) {
    throw new PathlossFitError(
      "singular pathloss fit: sampled distances do not span the design"
    );
  }
  const exponent = sxy / sxx;
  return { exponent, intercept: my - exponent * mx };
}

function fitClass(logD: Float64Array, y: Float64Array, members: Int32Array, robust: boolean): ClassFit {
  let active = members;
  let theta = lsFit(logD, y, active);
  if (!robust) return theta;
  for (let round = 0; round < TRIM_ROUNDS; round++) {
    const m = active.length;
    const nDrop = Math.ceil(TRIM_FRACTION * m);
    if (m - nDrop < 3) break;
    const resid = new Float64Array(m);
    for (let i = 0; i < m; i++) {
      resid[i] = y[active[i]] - (theta.exponent * logD[active[i]] + theta.intercept);
    }
    // Keep the least positive residuals: positive residual means measured
    // power above the model, the signature of interference contamination.
    const byResid = Array.from({ length: m }, (_, i) => i).sort((a, b) =>
      resid[a] < resid[b] ? -1 : resid[a] > resid[b] ? 1 : a - b
    );
    const keep = byResid.slice(0, m - nDrop).sort((a, b) => a - b);
    const next = new Int32Array(keep.length);
    for (let i = 0; i < keep.length; i++) next[i] = active[keep[i]];
    active = next;
    theta = lsFit(logD, y, active);
  }
  return theta;
}

export type PathlossMode = "robust" | "plain";

/**
 * Fit per-class log-distance parameters from sampled received power.
 * Classes with fewer than two samples fall back to the supplied priors.
 */
export function estimatePathloss(
  sampleIdx: Int32Array,
  sampleValuesW: Float64Array,
  env: Environment,
  bs: Transmitter,
  mode: PathlossMode,
  priors: ChannelParams
): EstimatedParams {
  const dist = transmitterDistances(env, bs);
  const los = losGrid(env, transmitterPosition(env, bs));
  const m = sampleIdx.length;
  const logD = new Float64Array(m);
  const y = new Float64Array(m);
  const txOffset = 10 * Math.log10(bs.powerW);
  for (let i = 0; i < m; i++) {
    const p = sampleIdx[i];
    logD[i] = Math.log10(dist[p]);
    y[i] = powerToDb(sampleValuesW[i]) - txOffset;
  }

  const losMembers: number[] = [];
  const nlosMembers: number[] = [];
  for (let i = 0; i < m; i++) {
    (los[sampleIdx[i]] ? losMembers : nlosMembers).push(i);
  }

  const out: EstimatedParams = {
    los_exponent: priors.los_exponent,
    los_intercept_db: priors.los_intercept_db,
    nlos_exponent: priors.nlos_exponent,
    nlos_intercept_db: priors.nlos_intercept_db,
    losFallback: false,
    nlosFallback: false,
  };
  if (losMembers.length >= 2) {
    const fit = fitClass(logD, y, Int32Array.from(losMembers), mode === "robust");
    out.los_exponent = fit.exponent;
    out.los_intercept_db = fit.intercept;
  } else {
    out.losFallback = true;
  }
  if (nlosMembers.length >= 2) {
    const fit = fitClass(logD, y, Int32Array.from(nlosMembers), mode === "robust");
    out.nlos_exponent = fit.exponent;
    out.nlos_intercept_db = fit.intercept;
  } else {
    out.nlosFallback = true;
  }
  return out;
}

export interface Extraction {
  /** Signed sparse interference in watts, zero off the sample mask. */
  issSparseW: Float64Array;
  /** 1 where the sampled extraction came out negative. */
  negMask: Uint8Array;
  /** Normalized dB magnitudes in [0, 1], zero off the sample mask. */
  preprocessed: Float64Array;
  sampleMask: Uint8Array;
  params: EstimatedParams | ChannelParams;
}

/**
 * Subtract the estimated fading-free base-station power from the sampled
 * measurements and preprocess the leftovers.
 */
export function extractIss(
  sampleMask: Uint8Array,
  totalPowerW: Float64Array,
  params: EstimatedParams | ChannelParams,
  env: Environment,
  bs: Transmitter,
  bounds: NormBounds
): Extraction {
  const dist = transmitterDistances(env, bs);
  const los = losGrid(env, transmitterPosition(env, bs));
  const n = sampleMask.length;
  const issSparseW = new Float64Array(n);
  const negMask = new Uint8Array(n);
  const preprocessed = new Float64Array(n);
  for (let p = 0; p < n; p++) {
    if (!sampleMask[p]) continue;
    const gain = los[p]
      ? params.los_intercept_db + params.los_exponent * Math.log10(dist[p])
      : params.nlos_intercept_db + params.nlos_exponent * Math.log10(dist[p]);
    const bsHat = bs.powerW * dbToPower(gain);
    const iss = totalPowerW[p] - bsHat;
    issSparseW[p] = iss;
    if (iss < 0) negMask[p] = 1;
    const magnitude = Math.max(Math.abs(iss), POWER_FLOOR_W);
    preprocessed[p] = normalizeDb(bounds, powerToDb(magnitude));
  }
  return { issSparseW, negMask, preprocessed, sampleMask, params };
}
