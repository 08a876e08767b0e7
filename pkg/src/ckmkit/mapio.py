"""Binary containers for grid maps and environments.

Both formats share one layout: an 8-byte magic, a little-endian uint32
header length, a UTF-8 JSON header, then a raw little-endian payload in
row-major order.  Maps store float32 fields (uint8 for binary masks);
environments store the float32 height field plus the footprint list and
generator config in the header.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .env import Building, EnvConfig, Environment
from .grid import MAP_KINDS, GridMap

MAP_MAGIC = b"CKMMAP1\x00"
ENV_MAGIC = b"CKMENV1\x00"

FORMAT_VERSION = 1


class ContainerError(IOError):
    """Raised for malformed or truncated container files."""


def _write_blob(path, magic: bytes, header: dict, payload: bytes) -> None:
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        fh.write(payload)


def _read_blob(path, magic: bytes):
    data = Path(path).read_bytes()
    if len(data) < len(magic) + 4 or data[: len(magic)] != magic:
        raise ContainerError(f"{path}: bad magic, not a {magic.rstrip(bytes(1)).decode()} file")
    (hlen,) = struct.unpack_from("<I", data, len(magic))
    start = len(magic) + 4
    if len(data) < start + hlen:
        raise ContainerError(f"{path}: truncated header")
    try:
        header = json.loads(data[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{path}: unreadable header: {exc}") from exc
    return header, data[start + hlen :]


def write_map(path, grid: GridMap) -> None:
    """Serialize a GridMap; float32 payload, uint8 when meta['mask'] is set."""
    as_mask = bool(grid.meta.get("mask"))
    header = {
        "format": "ckm-map",
        "version": FORMAT_VERSION,
        "kind": grid.kind,
        "dtype": "uint8" if as_mask else "float32",
        "shape": list(grid.shape),
        "units": grid.units,
        "order": "row-major",
        "meta": {k: v for k, v in grid.meta.items() if k != "mask"},
    }
    if as_mask:
        payload = np.ascontiguousarray(grid.data.astype("<u1")).tobytes()
    else:
        payload = np.ascontiguousarray(grid.data.astype("<f4")).tobytes()
    _write_blob(path, MAP_MAGIC, header, payload)


def read_map(path) -> GridMap:
    header, payload = _read_blob(path, MAP_MAGIC)
    if header.get("kind") not in MAP_KINDS:
        raise ContainerError(f"{path}: unknown map kind {header.get('kind')!r}")
    shape = tuple(header["shape"])
    dtype = np.dtype("<u1") if header.get("dtype") == "uint8" else np.dtype("<f4")
    expected = int(np.prod(shape)) * dtype.itemsize
    if len(payload) != expected:
        raise ContainerError(
            f"{path}: payload size {len(payload)} does not match shape {shape}"
        )
    data = np.frombuffer(payload, dtype=dtype).reshape(shape).astype(np.float64)
    meta = dict(header.get("meta", {}))
    if header.get("dtype") == "uint8":
        meta["mask"] = True
    return GridMap(data, header["kind"], meta)


def write_env(path, env: Environment) -> None:
    header = {
        "format": "ckm-env",
        "version": FORMAT_VERSION,
        "config": asdict(env.config),
        "shape": list(env.config.grid_shape),
        "built_ratio_ok": env.built_ratio_ok,
        "realized_built_ratio": env.realized_built_ratio,
        "footprints": [[b.x0, b.y0, b.x1, b.y1, b.height_m] for b in env.buildings],
    }
    payload = np.ascontiguousarray(env.heights.astype("<f4")).tobytes()
    _write_blob(path, ENV_MAGIC, header, payload)


def read_env(path) -> Environment:
    header, payload = _read_blob(path, ENV_MAGIC)
    cfg = EnvConfig(**header["config"])
    b_l, b_w = cfg.grid_shape
    expected = b_l * b_w * 4
    if len(payload) != expected:
        raise ContainerError(
            f"{path}: payload size {len(payload)} does not match grid {(b_l, b_w)}"
        )
    heights = np.frombuffer(payload, dtype="<f4").reshape(b_l, b_w).astype(np.float64)
    buildings = tuple(
        Building(int(x0), int(y0), int(x1), int(y1), float(h))
        for x0, y0, x1, y1, h in header.get("footprints", [])
    )
    return Environment(cfg, heights, buildings, bool(header.get("built_ratio_ok", True)))
