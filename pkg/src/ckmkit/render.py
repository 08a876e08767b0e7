"""Raster exports of grid maps.

Two flavors: an 8-bit grayscale PNG whose pixel values are the quantized
normalized dB map (value = round(255 * normalized), exactly reproducible),
and a false-color PNG for human inspection with optional transmitter
overlays.  Every render writes a JSON sidecar recording the dB range and
overlay legend, since the PNG alone loses that.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .grid import GridMap
from .sampling import NormBounds, power_to_db

_MARKER_HALF = 2


def resolve_bounds(grid: GridMap, bounds: NormBounds | None) -> NormBounds:
    """Exact min/max dB bounds of the map unless explicit bounds are given."""
    if bounds is not None:
        return bounds
    if grid.kind == "normalized":
        return NormBounds(0.0, 1.0)
    db = power_to_db(grid.data) if grid.kind != "gain_db" else np.asarray(grid.data)
    lo, hi = float(np.min(db)), float(np.max(db))
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    return NormBounds(lo, hi)


def normalized_view(grid: GridMap, bounds: NormBounds | None = None) -> np.ndarray:
    """Map values into [0, 1] through the dB transform where applicable."""
    b = resolve_bounds(grid, bounds)
    if grid.kind == "normalized":
        return np.clip(np.asarray(grid.data, dtype=float), 0.0, 1.0)
    db = power_to_db(grid.data) if grid.kind != "gain_db" else np.asarray(grid.data, dtype=float)
    return b.normalize(db)


def to_gray_u8(grid: GridMap, bounds: NormBounds | None = None) -> np.ndarray:
    view = normalized_view(grid, bounds)
    return np.rint(view * 255.0).astype(np.uint8)


def write_grayscale_png(path, grid: GridMap, bounds: NormBounds | None = None) -> dict:
    """8-bit grayscale PNG plus a sidecar JSON with the dB range used."""
    path = Path(path)
    b = resolve_bounds(grid, bounds)
    u8 = to_gray_u8(grid, b)
    Image.fromarray(u8, mode="L").save(path, format="PNG")
    sidecar = {
        "source_kind": grid.kind,
        "encoding": "round(255 * normalized_db)",
        "range_db": b.to_dict() if grid.kind != "normalized" else None,
        "shape": list(u8.shape),
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=1, sort_keys=True))
    return sidecar


def _stamp_dot(rgb: np.ndarray, x: int, y: int, color) -> None:
    h, w = rgb.shape[:2]
    for dx in range(-_MARKER_HALF, _MARKER_HALF + 1):
        for dy in range(-_MARKER_HALF, _MARKER_HALF + 1):
            if dx * dx + dy * dy <= _MARKER_HALF * _MARKER_HALF:
                px, py = x + dx, y + dy
                if 0 <= px < h and 0 <= py < w:
                    rgb[px, py] = color


def _stamp_cross(rgb: np.ndarray, x: int, y: int, color) -> None:
    h, w = rgb.shape[:2]
    for d in range(-_MARKER_HALF, _MARKER_HALF + 1):
        for px, py in ((x + d, y + d), (x + d, y - d)):
            if 0 <= px < h and 0 <= py < w:
                rgb[px, py] = color


_TRUE_COLOR = (255, 255, 255)
_EST_COLOR = (255, 0, 0)


def write_falsecolor_png(
    path,
    grid: GridMap,
    bounds: NormBounds | None = None,
    true_px=None,
    est_px=None,
    colormap: str = "viridis",
) -> dict:
    """False-color PNG with optional true (dot) / estimated (cross) markers."""
    import matplotlib

    matplotlib.use("Agg")
    if colormap not in matplotlib.colormaps:
        raise ValueError(f"unknown colormap {colormap!r}")

    path = Path(path)
    b = resolve_bounds(grid, bounds)
    view = normalized_view(grid, b)
    rgb = (matplotlib.colormaps[colormap](view)[..., :3] * 255.0).astype(np.uint8)
    legend = {
        "source_kind": grid.kind,
        "colormap": colormap,
        "range_db": b.to_dict() if grid.kind != "normalized" else None,
        "markers": [],
    }
    if true_px is not None:
        for x, y in np.asarray(true_px, dtype=float).reshape(-1, 2):
            _stamp_dot(rgb, int(round(x)), int(round(y)), _TRUE_COLOR)
        legend["markers"].append(
            {"shape": "dot", "rgb": list(_TRUE_COLOR), "meaning": "true interferer"}
        )
    if est_px is not None:
        for x, y in np.asarray(est_px, dtype=float).reshape(-1, 2):
            _stamp_cross(rgb, int(round(x)), int(round(y)), _EST_COLOR)
        legend["markers"].append(
            {"shape": "cross", "rgb": list(_EST_COLOR), "meaning": "estimated interferer"}
        )
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")
    Path(str(path) + ".json").write_text(json.dumps(legend, indent=1, sort_keys=True))
    return legend
