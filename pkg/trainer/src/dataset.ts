/**
 * Read access to a generated scene dataset: manifest, per-scene maps and
 * environments, and the dB normalization bounds shipped with the split.
 */
import { readFileSync } from "node:fs";
import { join } from "node:path";
import { Environment, GridMap, readEnv, readMap } from "./mapio.js";
import { Transmitter } from "./geometry.js";
import { ChannelParams, NormBounds } from "./extract.js";

export interface SceneEntry {
  id: string;
  index: number;
  seed: number;
  split: string;
  bs: [number, number, number, number];
  ins: Array<[number, number, number, number]>;
  files: Record<string, string>;
}

export interface Manifest {
  format: string;
  version: number;
  master_seed: number;
  config: {
    channel: ChannelParams & Record<string, number>;
    noise_power_w: number;
    [key: string]: unknown;
  };
  grid_shape: [number, number];
  counts: { train: number; val: number; test: number };
  norm_bounds: { r_min_db: number; r_max_db: number };
  splits: Record<string, string[]>;
  scenes: SceneEntry[];
}

export class DatasetReader {
  readonly root: string;
  readonly manifest: Manifest;
  private byId: Map<string, SceneEntry>;

  constructor(root: string) {
    this.root = root;
    const raw = readFileSync(join(root, "manifest.json"), "utf-8");
    this.manifest = JSON.parse(raw);
    if (this.manifest.format !== "ckm-dataset") {
      throw new Error(`${root}: not a scene dataset (format ${this.manifest.format})`);
    }
    this.byId = new Map(this.manifest.scenes.map((s) => [s.id, s]));
  }

  sceneIds(split?: string): string[] {
    if (split === undefined) return this.manifest.scenes.map((s) => s.id);
    const ids = this.manifest.splits[split];
    if (!ids) throw new Error(`unknown split ${JSON.stringify(split)}`);
    return [...ids];
  }

  record(sceneId: string): SceneEntry {
    const rec = this.byId.get(sceneId);
    if (!rec) throw new Error(`unknown scene ${JSON.stringify(sceneId)}`);
    return rec;
  }

  normBounds(): NormBounds {
    const nb = this.manifest.norm_bounds;
    return { rMinDb: nb.r_min_db, rMaxDb: nb.r_max_db };
  }

  channelParams(): ChannelParams {
    return this.manifest.config.channel;
  }

  gridShape(): [number, number] {
    return [this.manifest.grid_shape[0], this.manifest.grid_shape[1]];
  }

  loadMap(sceneId: string, name: string): GridMap {
    const files = this.record(sceneId).files;
    const rel = files[name];
    if (!rel) throw new Error(`scene file ${JSON.stringify(name)} not in manifest`);
    return readMap(join(this.root, rel));
  }

  loadEnv(sceneId: string): Environment {
    return readEnv(join(this.root, this.record(sceneId).files.env));
  }

  bsTransmitter(sceneId: string): Transmitter {
    const [x, y, h, p] = this.record(sceneId).bs;
    return { xPx: x, yPx: y, heightM: h, powerW: p };
  }

  trueInPixels(sceneId: string): Array<[number, number]> {
    return this.record(sceneId).ins.map(([x, y]) => [x, y]);
  }
}
