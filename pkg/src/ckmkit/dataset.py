"""Dataset generation: many scenes, deterministic from one master seed.

A dataset is a directory with a manifest and one subdirectory per scene
holding the environment, the four canonical maps and the interferer table.
Scene seeds are hashed from (master seed, scene index), so any scene can be
regenerated independently and a second run reproduces every byte.  The
dB-domain normalization bounds shipped in the manifest are percentiles of
the training split's interference maps, computed from the serialized
(float32) values so fresh runs and resumed runs agree exactly.

Layout:
    <root>/manifest.json
    <root>/scenes/<scene_id>/env.env
    <root>/scenes/<scene_id>/{r,rbs,rin,sinr}.map
    <root>/scenes/<scene_id>/ins.csv
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validate import check_positive
from .channel import (
    DEFAULT_BS_HEIGHT_M,
    DEFAULT_IN_HEIGHT_M,
    DEFAULT_NOISE_POWER_W,
    ChannelParams,
    Scene,
    Transmitter,
    build_scene_maps,
)
from .env import EnvConfig, Environment, generate_environment
from .grid import GridMap
from .mapio import read_env, read_map, write_env, write_map
from .rng import stream_key
from .sampling import NormBounds, power_to_db

MANIFEST_NAME = "manifest.json"
SCENE_MAP_FILES = ("r.map", "rbs.map", "rin.map", "sinr.map")
SCENE_FILES = ("env.env",) + SCENE_MAP_FILES + ("ins.csv",)

# Percentile clipping applied to the pooled training-split ISS dB values
# when deriving normalization bounds.
_BOUNDS_CLIP_PCT = 0.1


@dataclass(frozen=True)
class DatasetConfig:
    """Counts, scene template and transmitter layout for one dataset."""

    n_train: int = 700
    n_val: int = 100
    n_test: int = 200
    env: EnvConfig = field(default_factory=EnvConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    bs_power_w: float = 40.0
    bs_height_m: float = DEFAULT_BS_HEIGHT_M
    in_powers_w: tuple[float, ...] = (40.0, 10.0, 10.0)
    in_height_m: float = DEFAULT_IN_HEIGHT_M
    min_in_separation_px: float = 10.0
    noise_power_w: float = DEFAULT_NOISE_POWER_W
    realize_fading: bool = True

    def __post_init__(self):
        if min(self.n_train, self.n_val, self.n_test) < 0 or self.n_scenes < 1:
            raise ValueError("split counts must be non-negative and sum to >= 1")
        check_positive("bs_power_w", self.bs_power_w)
        check_positive("bs_height_m", self.bs_height_m)
        check_positive("in_height_m", self.in_height_m)
        check_positive("noise_power_w", self.noise_power_w)
        for p in self.in_powers_w:
            check_positive("in_powers_w entry", p)

    @property
    def n_scenes(self) -> int:
        return self.n_train + self.n_val + self.n_test

    def split_of(self, index: int) -> str:
        if index < self.n_train:
            return "train"
        if index < self.n_train + self.n_val:
            return "val"
        return "test"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["env"] = dataclasses.asdict(self.env)
        d["channel"] = dataclasses.asdict(self.channel)
        d["in_powers_w"] = list(self.in_powers_w)
        return d


def scene_id_for(index: int) -> str:
    return f"scene_{index:04d}"


def scene_seed(master_seed: int, index: int) -> int:
    return int(stream_key(master_seed, 0x5343454E, index))  # 'SCEN'


def place_bs(env: Environment, height_m: float, power_w: float) -> Transmitter:
    """The free pixel nearest the scene center (structures below the mast)."""
    b_l, b_w = env.config.grid_shape
    xs, ys = np.meshgrid(np.arange(b_l), np.arange(b_w), indexing="ij")
    d2 = (xs - b_l // 2) ** 2 + (ys - b_w // 2) ** 2
    d2 = np.where(env.heights < height_m, d2, np.iinfo(np.int64).max)
    if not np.any(env.heights < height_m):
        raise RuntimeError("no pixel can host the base station")
    x, y = np.unravel_index(int(np.argmin(d2)), d2.shape)
    return Transmitter(int(x), int(y), height_m, power_w)


def place_interferers(
    env: Environment,
    rng: np.random.Generator,
    powers_w,
    height_m: float,
    min_separation_px: float,
    max_tries: int = 10000,
) -> tuple[Transmitter, ...]:
    """Uniform draw over building-free pixels with pairwise separation."""
    free = np.argwhere(env.heights == 0.0)
    if free.shape[0] == 0 and len(powers_w) > 0:
        raise RuntimeError("no building-free pixel available for interferers")
    placed: list[tuple[int, int]] = []
    min_sq = float(min_separation_px) ** 2
    tries = 0
    while len(placed) < len(powers_w):
        tries += 1
        if tries > max_tries:
            raise RuntimeError(
                f"could not place {len(powers_w)} interferers with "
                f"separation >= {min_separation_px}px in {max_tries} tries"
            )
        x, y = (int(v) for v in free[rng.integers(free.shape[0])])
        if all((x - px) ** 2 + (y - py) ** 2 >= min_sq for px, py in placed):
            placed.append((x, y))
    return tuple(
        Transmitter(x, y, height_m, float(p)) for (x, y), p in zip(placed, powers_w)
    )


@dataclass
class SceneRecord:
    """Deterministic per-scene layout (no maps built yet)."""

    scene_id: str
    index: int
    seed: int
    split: str
    env: Environment
    bs: Transmitter
    interferers: tuple[Transmitter, ...]

    def scene(self, cfg: DatasetConfig) -> Scene:
        return Scene(
            env=self.env,
            channel=cfg.channel,
            bs=self.bs,
            interferers=self.interferers,
            noise_power_w=cfg.noise_power_w,
            seed=self.seed,
            meta={"scene_id": self.scene_id},
        )

    def manifest_entry(self) -> dict:
        return {
            "id": self.scene_id,
            "index": self.index,
            "seed": self.seed,
            "split": self.split,
            "built_ratio": self.env.realized_built_ratio,
            "built_ratio_ok": self.env.built_ratio_ok,
            "bs": [self.bs.x_px, self.bs.y_px, self.bs.height_m, self.bs.power_w],
            "ins": [
                [t.x_px, t.y_px, t.height_m, t.power_w] for t in self.interferers
            ],
            "files": {
                "env": f"scenes/{self.scene_id}/env.env",
                "r": f"scenes/{self.scene_id}/r.map",
                "rbs": f"scenes/{self.scene_id}/rbs.map",
                "rin": f"scenes/{self.scene_id}/rin.map",
                "sinr": f"scenes/{self.scene_id}/sinr.map",
                "ins": f"scenes/{self.scene_id}/ins.csv",
            },
        }


def build_scene_record(cfg: DatasetConfig, master_seed: int, index: int) -> SceneRecord:
    seed = scene_seed(master_seed, index)
    env = generate_environment(dataclasses.replace(cfg.env, seed=seed))
    bs = place_bs(env, cfg.bs_height_m, cfg.bs_power_w)
    rng = np.random.default_rng(stream_key(seed, 0x494E504C))  # 'INPL'
    ins = place_interferers(
        env, rng, cfg.in_powers_w, cfg.in_height_m, cfg.min_in_separation_px
    )
    return SceneRecord(
        scene_id=scene_id_for(index),
        index=index,
        seed=seed,
        split=cfg.split_of(index),
        env=env,
        bs=bs,
        interferers=ins,
    )


def _write_ins_csv(path: Path, interferers) -> None:
    lines = ["in_idx,x_px,y_px,height_m,power_w"]
    for i, t in enumerate(interferers):
        lines.append(f"{i},{t.x_px},{t.y_px},{t.height_m:.17g},{t.power_w:.17g}")
    path.write_text("\n".join(lines) + "\n")


def _scene_dir(root: Path, scene_id: str) -> Path:
    return Path(root) / "scenes" / scene_id


def scene_is_complete(root: Path, scene_id: str) -> bool:
    d = _scene_dir(root, scene_id)
    return all((d / name).exists() for name in SCENE_FILES)


def _materialize_scene(cfg: DatasetConfig, master_seed: int, index: int, root: str) -> str:
    """Build and write one scene; skips work if all files already exist."""
    record = build_scene_record(cfg, master_seed, index)
    root = Path(root)
    if scene_is_complete(root, record.scene_id):
        return record.scene_id
    d = _scene_dir(root, record.scene_id)
    d.mkdir(parents=True, exist_ok=True)
    scene = record.scene(cfg)
    maps = build_scene_maps(scene, realize_fading=cfg.realize_fading)
    write_env(d / "env.env", record.env)
    meta = {"scene_id": record.scene_id, "seed": record.seed}
    write_map(d / "r.map", GridMap(maps.total.data, "rss_watts", meta))
    write_map(d / "rbs.map", GridMap(maps.dss.data, "rss_watts", meta))
    write_map(d / "rin.map", GridMap(maps.iss.data, "rss_watts", meta))
    write_map(d / "sinr.map", GridMap(maps.sinr.data, "sinr_linear", meta))
    _write_ins_csv(d / "ins.csv", record.interferers)
    return record.scene_id


def canonical_manifest_hash(manifest: dict) -> str:
    body = {k: v for k, v in manifest.items() if k != "manifest_hash"}
    raw = json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(raw).hexdigest()


def compute_norm_bounds(root: Path, train_ids) -> NormBounds:
    """Percentile-clipped dB bounds over the training split's ISS maps."""
    pools = []
    for sid in train_ids:
        m = read_map(_scene_dir(root, sid) / "rin.map")
        pools.append(power_to_db(m.data).ravel())
    vals = np.concatenate(pools)
    lo, hi = np.percentile(vals, [_BOUNDS_CLIP_PCT, 100.0 - _BOUNDS_CLIP_PCT])
    if hi - lo < 1e-9:
        # Degenerate (e.g. interference-free) training split; widen so the
        # bounds stay usable.
        lo, hi = lo - 0.5, hi + 0.5
    return NormBounds(float(lo), float(hi))


def generate_dataset(
    cfg: DatasetConfig, out_dir, master_seed: int, workers: int = 1
) -> dict:
    """Generate (or resume) a dataset; returns the manifest dict.

    Scene content is a pure function of (cfg, master_seed, scene index);
    existing complete scenes are left untouched, so interrupted runs can be
    re-run to completion.  The manifest is written last.
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    indices = list(range(cfg.n_scenes))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(
                pool.map(
                    _materialize_scene,
                    [cfg] * len(indices),
                    [master_seed] * len(indices),
                    indices,
                    [str(root)] * len(indices),
                    chunksize=4,
                )
            )
    else:
        for i in indices:
            _materialize_scene(cfg, master_seed, i, str(root))

    records = [build_scene_record(cfg, master_seed, i) for i in indices]
    splits = {"train": [], "val": [], "test": []}
    for r in records:
        splits[r.split].append(r.scene_id)
    bounds = compute_norm_bounds(root, splits["train"] or splits["test"] or splits["val"])

    manifest = {
        "format": "ckm-dataset",
        "version": 1,
        "master_seed": int(master_seed),
        "config": cfg.to_dict(),
        "grid_shape": list(cfg.env.grid_shape),
        "counts": {"train": cfg.n_train, "val": cfg.n_val, "test": cfg.n_test},
        "norm_bounds": bounds.to_dict(),
        "splits": splits,
        "scenes": [r.manifest_entry() for r in records],
    }
    manifest["manifest_hash"] = canonical_manifest_hash(manifest)
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return manifest


class DatasetReader:
    """Random access over a generated dataset directory."""

    def __init__(self, root):
        self.root = Path(root)
        manifest_path = self.root / MANIFEST_NAME
        if not manifest_path.exists():
            raise FileNotFoundError(f"no {MANIFEST_NAME} under {self.root}")
        self.manifest = json.loads(manifest_path.read_text())
        self._by_id = {s["id"]: s for s in self.manifest["scenes"]}

    def scene_ids(self, split: str | None = None) -> list[str]:
        if split is None:
            return [s["id"] for s in self.manifest["scenes"]]
        if split not in self.manifest["splits"]:
            raise KeyError(f"unknown split {split!r}")
        return list(self.manifest["splits"][split])

    def record(self, scene_id: str) -> dict:
        return self._by_id[scene_id]

    def norm_bounds(self) -> NormBounds:
        return NormBounds.from_dict(self.manifest["norm_bounds"])

    def dataset_config(self) -> DatasetConfig:
        raw = dict(self.manifest["config"])
        raw["env"] = EnvConfig(**raw["env"])
        raw["channel"] = ChannelParams(**raw["channel"])
        raw["in_powers_w"] = tuple(raw["in_powers_w"])
        return DatasetConfig(**raw)

    def load_env(self, scene_id: str) -> Environment:
        return read_env(self.root / self.record(scene_id)["files"]["env"])

    def load_map(self, scene_id: str, name: str) -> GridMap:
        files = self.record(scene_id)["files"]
        if name not in files:
            raise KeyError(f"scene file {name!r} not in manifest (have {sorted(files)})")
        return read_map(self.root / files[name])

    def bs_transmitter(self, scene_id: str) -> Transmitter:
        x, y, h, p = self.record(scene_id)["bs"]
        return Transmitter(int(x), int(y), float(h), float(p))

    def true_in_pixels(self, scene_id: str) -> np.ndarray:
        ins = self.record(scene_id)["ins"]
        return np.array([[r[0], r[1]] for r in ins], dtype=float).reshape(-1, 2)

    def scene(self, scene_id: str) -> Scene:
        """Rebuild the full Scene object (env + transmitters) for a record."""
        cfg = self.dataset_config()
        rec = self.record(scene_id)
        env = self.load_env(scene_id)
        ins = tuple(
            Transmitter(int(x), int(y), float(h), float(p)) for x, y, h, p in rec["ins"]
        )
        return Scene(
            env=env,
            channel=cfg.channel,
            bs=self.bs_transmitter(scene_id),
            interferers=ins,
            noise_power_w=cfg.noise_power_w,
            seed=int(rec["seed"]),
            meta={"scene_id": scene_id},
        )
