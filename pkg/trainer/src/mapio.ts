/**
 * Readers and writers for the binary grid containers used by the dataset
 * toolkit: an 8-byte magic, a little-endian uint32 header length, a UTF-8
 * JSON header, then a raw little-endian row-major payload.  Maps carry
 * float32 fields (uint8 for binary masks); environment files carry the
 * float32 building-height field plus footprints and generator config in
 * the header.
 */
import { readFileSync, writeFileSync } from "node:fs";

const MAP_MAGIC = Buffer.from("CKMMAP1\0", "latin1");
const ENV_MAGIC = Buffer.from("CKMENV1\0", "latin1");
const FORMAT_VERSION = 1;

export const MAP_KINDS = ["rss_watts", "gain_db", "sinr_linear", "normalized"] as const;
export type MapKind = (typeof MAP_KINDS)[number];

export class ContainerError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ContainerError";
  }
}

export interface GridMap {
  /** Row-major float64 values, shape[0]*shape[1] long. */
  data: Float64Array;
  shape: [number, number];
  kind: MapKind;
  meta: Record<string, unknown>;
  /** Set when the payload was stored as uint8. */
  mask?: boolean;
}

export interface EnvConfig {
  length_m: number;
  width_m: number;
  max_height_m: number;
  resolution_m: number;
  built_ratio: number;
  buildings_per_km2: number;
  rayleigh_mean_height_m: number;
  uav_altitude_m: number;
  seed: number;
}

export interface Environment {
  config: EnvConfig;
  /** Row-major building heights in meters, gridShape(config) long. */
  heights: Float64Array;
  shape: [number, number];
}

export function gridShape(cfg: EnvConfig): [number, number] {
  return [
    Math.round(cfg.length_m / cfg.resolution_m),
    Math.round(cfg.width_m / cfg.resolution_m),
  ];
}

function readBlob(path: string, magic: Buffer): { header: any; payload: Buffer } {
  const data = readFileSync(path);
  if (data.length < magic.length + 4 || !data.subarray(0, magic.length).equals(magic)) {
    throw new ContainerError(`${path}: bad magic`);
  }
  const hlen = data.readUInt32LE(magic.length);
  const start = magic.length + 4;
  if (data.length < start + hlen) {
    throw new ContainerError(`${path}: truncated header`);
  }
  let header: any;
  try {
    header = JSON.parse(data.subarray(start, start + hlen).toString("utf-8"));
  } catch (err) {
    throw new ContainerError(`${path}: unreadable header: ${err}`);
  }
  return { header, payload: data.subarray(start + hlen) };
}

function writeBlob(path: string, magic: Buffer, header: object, payload: Buffer): void {
  const raw = Buffer.from(canonicalJson(header), "utf-8");
  const hlen = Buffer.alloc(4);
  hlen.writeUInt32LE(raw.length);
  writeFileSync(path, Buffer.concat([magic, hlen, raw, payload]));
}

/** JSON with sorted keys and no whitespace, matching the dataset writer. */
export function canonicalJson(value: unknown): string {
  if (value === null || typeof value !== "object") return JSON.stringify(value);
  if (Array.isArray(value)) return `[${value.map(canonicalJson).join(",")}]`;
  const keys = Object.keys(value as object).sort();
  const parts = keys.map(
    (k) => `${JSON.stringify(k)}:${canonicalJson((value as Record<string, unknown>)[k])}`
  );
  return `{${parts.join(",")}}`;
}

export function readMap(path: string): GridMap {
  const { header, payload } = readBlob(path, MAP_MAGIC);
  if (!MAP_KINDS.includes(header.kind)) {
    throw new ContainerError(`${path}: unknown map kind ${JSON.stringify(header.kind)}`);
  }
  const shape: [number, number] = [header.shape[0], header.shape[1]];
  const n = shape[0] * shape[1];
  const isMask = header.dtype === "uint8";
  const itemSize = isMask ? 1 : 4;
  if (payload.length !== n * itemSize) {
    throw new ContainerError(
      `${path}: payload size ${payload.length} does not match shape ${shape}`
    );
  }
  const data = new Float64Array(n);
  if (isMask) {
    for (let i = 0; i < n; i++) data[i] = payload[i];
  } else {
    // Copy out of the file buffer so alignment is guaranteed.
    const f32 = new Float32Array(n);
    Buffer.from(f32.buffer).set(payload);
    for (let i = 0; i < n; i++) data[i] = f32[i];
  }
  const out: GridMap = { data, shape, kind: header.kind, meta: header.meta ?? {} };
  if (isMask) out.mask = true;
  return out;
}

export function writeMap(path: string, grid: GridMap): void {
  const n = grid.shape[0] * grid.shape[1];
  if (grid.data.length !== n) {
    throw new ContainerError(`map data length ${grid.data.length} does not match shape`);
  }
  const asMask = Boolean(grid.mask);
  const header = {
    format: "ckm-map",
    version: FORMAT_VERSION,
    kind: grid.kind,
    dtype: asMask ? "uint8" : "float32",
    shape: [grid.shape[0], grid.shape[1]],
    units: unitsFor(grid.kind),
    order: "row-major",
    meta: grid.meta,
  };
  let payload: Buffer;
  if (asMask) {
    payload = Buffer.alloc(n);
    for (let i = 0; i < n; i++) payload[i] = grid.data[i] ? 1 : 0;
  } else {
    const f32 = new Float32Array(n);
    for (let i = 0; i < n; i++) f32[i] = grid.data[i];
    payload = Buffer.from(f32.buffer, f32.byteOffset, f32.byteLength);
  }
  writeBlob(path, MAP_MAGIC, header, payload);
}

function unitsFor(kind: MapKind): string {
  switch (kind) {
    case "rss_watts":
      return "W";
    case "gain_db":
      return "dB";
    case "sinr_linear":
      return "linear";
    case "normalized":
      return "unitless";
  }
}

export function readEnv(path: string): Environment {
  const { header, payload } = readBlob(path, ENV_MAGIC);
  const cfg: EnvConfig = header.config;
  const [bL, bW] = gridShape(cfg);
  if (payload.length !== bL * bW * 4) {
    throw new ContainerError(
      `${path}: payload size ${payload.length} does not match grid ${[bL, bW]}`
    );
  }
  const f32 = new Float32Array(bL * bW);
  Buffer.from(f32.buffer).set(payload);
  const heights = new Float64Array(bL * bW);
  for (let i = 0; i < heights.length; i++) heights[i] = f32[i];
  return { config: cfg, heights, shape: [bL, bW] };
}
