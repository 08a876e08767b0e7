/**
 * Scene geometry: pixel centers, 3-D transmitter distances and the
 * line-of-sight grid.  This mirrors the dataset generator's geometry
 * exactly — same sample spacing, same shared step count, same strict
 * comparisons — because the extraction cross-check demands matching
 * boolean LoS decisions, not just close floats.
 */
import { Environment } from "./mapio.js";

export interface Transmitter {
  xPx: number;
  yPx: number;
  heightM: number;
  powerW: number;
}

export function pixelCenter(resolutionM: number, x: number, y: number): [number, number] {
  return [(x + 0.5) * resolutionM, (y + 0.5) * resolutionM];
}

export function transmitterPosition(env: Environment, tx: Transmitter): [number, number, number] {
  const [px, py] = pixelCenter(env.config.resolution_m, tx.xPx, tx.yPx);
  return [px, py, tx.heightM];
}

/** 3-D distance from a transmitter to every UAV-plane pixel center. */
export function transmitterDistances(env: Environment, tx: Transmitter): Float64Array {
  const cfg = env.config;
  const [bL, bW] = env.shape;
  const [qx, qy, qz] = transmitterPosition(env, tx);
  const out = new Float64Array(bL * bW);
  const dz = cfg.uav_altitude_m - qz;
  for (let x = 0; x < bL; x++) {
    const cx = (x + 0.5) * cfg.resolution_m;
    const dx = cx - qx;
    for (let y = 0; y < bW; y++) {
      const cy = (y + 0.5) * cfg.resolution_m;
      const dy = cy - qy;
      out[x * bW + y] = Math.sqrt(dx * dx + dy * dy + dz * dz);
    }
  }
  return out;
}

/**
 * Boolean LoS map from every UAV-plane pixel to the 3-D point q.
 *
 * The segment from q to each pixel is sampled with one shared step count,
 * the finest any pixel needs, never coarser than half the grid resolution.
 * A point strictly below the local building height blocks the link;
 * points outside the scene footprint are open ground.
 */
export function losGrid(env: Environment, q: [number, number, number]): Uint8Array {
  const cfg = env.config;
  const [bL, bW] = env.shape;
  const [qx, qy, qz] = q;
  const alt = cfg.uav_altitude_m;
  const res = cfg.resolution_m;

  let maxDist = 0;
  const dz = alt - qz;
  for (let x = 0; x < bL; x++) {
    const dx = (x + 0.5) * res - qx;
    for (let y = 0; y < bW; y++) {
      const dy = (y + 0.5) * res - qy;
      const d = Math.sqrt(dx * dx + dy * dy + dz * dz);
      if (d > maxDist) maxDist = d;
    }
  }
  const n = Math.max(2, Math.ceil(maxDist / (res / 2)) + 1);
  const t = new Float64Array(n);
  const step = 1 / (n - 1);
  for (let i = 0; i < n; i++) t[i] = i * step;
  t[n - 1] = 1;

  const out = new Uint8Array(bL * bW);
  for (let x = 0; x < bL; x++) {
    const cx = (x + 0.5) * res;
    for (let y = 0; y < bW; y++) {
      const cy = (y + 0.5) * res;
      let clear = 1;
      for (let i = 0; i < n; i++) {
        const ti = t[i];
        const sx = qx * (1 - ti) + cx * ti;
        const sy = qy * (1 - ti) + cy * ti;
        const sz = qz * (1 - ti) + alt * ti;
        if (sx >= 0 && sx < cfg.length_m && sy >= 0 && sy < cfg.width_m) {
          let ix = Math.floor(sx / res);
          let iy = Math.floor(sy / res);
          if (ix < 0) ix = 0;
          else if (ix > bL - 1) ix = bL - 1;
          if (iy < 0) iy = 0;
          else if (iy > bW - 1) iy = bW - 1;
          if (sz < env.heights[ix * bW + iy]) {
            clear = 0;
            break;
          }
        }
      }
      out[x * bW + y] = clear;
    }
  }
  return out;
}
