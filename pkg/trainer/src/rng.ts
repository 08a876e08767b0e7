/**
 * Counter-style deterministic draws matching the dataset generator: a
 * SplitMix64 mix keyed on (seed, salts, index).  BigInt keeps the 64-bit
 * wraparound exact; only the sampling-mask path is needed here, so there
 * is no normal-draw machinery.
 */

const MASK64 = (1n << 64n) - 1n;
const GAMMA = 0x9e3779b97f4a7c15n;
const M1 = 0xbf58476d1ce4e5b9n;
const M2 = 0x94d049bb133111ebn;

export function splitmix64(x: bigint): bigint {
  let v = (x + GAMMA) & MASK64;
  v ^= v >> 30n;
  v = (v * M1) & MASK64;
  v ^= v >> 27n;
  v = (v * M2) & MASK64;
  v ^= v >> 31n;
  return v;
}

function asU64(value: number | bigint): bigint {
  let v = BigInt(value);
  // Negative seeds map to their two's-complement uint64 representation.
  if (v < 0n) v &= MASK64;
  return v & MASK64;
}

/** Collapse a seed plus integer salts into one 64-bit stream key. */
export function streamKey(seed: number | bigint, ...salts: Array<number | bigint>): bigint {
  let key = splitmix64(asU64(seed));
  for (const salt of salts) {
    key = splitmix64(key ^ asU64(salt));
  }
  return key;
}

const SAMPLE_SALT = 0x53414d50n; // 'SAMP'

/**
 * Boolean mask selecting floor(rate * nPixels) pixels, identical to the
 * dataset toolkit's mask for the same (shape, rate, seed): pixels are
 * ranked by a per-pixel hash of the seed and the lowest hashes win, which
 * also nests masks across rates for a fixed seed.
 */
export function sampleMask(shape: [number, number], rate: number, seed: number): Uint8Array {
  if (!(rate > 0 && rate <= 1)) {
    throw new RangeError(`rate must be in (0, 1], got ${rate}`);
  }
  const n = shape[0] * shape[1];
  const k = Math.floor(rate * n);
  if (k < 1) {
    throw new RangeError(`rate ${rate} selects zero pixels on a ${shape} grid`);
  }
  const key = streamKey(seed, SAMPLE_SALT);
  const hashes = new BigUint64Array(n);
  for (let i = 0; i < n; i++) {
    hashes[i] = splitmix64(key ^ BigInt(i));
  }
  const order = new Uint32Array(n);
  for (let i = 0; i < n; i++) order[i] = i;
  // Hashes are effectively unique, so any comparison sort reproduces the
  // generator's stable argsort.
  const sorted = Array.from(order).sort((a, b) =>
    hashes[a] < hashes[b] ? -1 : hashes[a] > hashes[b] ? 1 : a - b
  );
  const mask = new Uint8Array(n);
  for (let i = 0; i < k; i++) mask[sorted[i]] = 1;
  return mask;
}
