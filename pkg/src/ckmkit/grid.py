"""2-D scalar fields with a declared physical interpretation.

Every map in the pipeline (received power, channel gain, SINR, normalized
reconstructions) is a rectangular grid indexed as data[x, y] with x along
the scene length and y along its width.  The `kind` tag travels with the
array through serialization so downstream steps can refuse inputs in the
wrong domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validate import as_float_grid

MAP_KINDS = ("rss_watts", "gain_db", "sinr_linear", "normalized")

_UNITS = {
    "rss_watts": "W",
    "gain_db": "dB",
    "sinr_linear": "linear",
    "normalized": "unitless",
}


@dataclass
class GridMap:
    """A b_L x b_W field of 64-bit reals plus domain metadata.

    meta carries optional provenance (scene id, seed, bounds).  Entries in
    `rss_watts` and `sinr_linear` maps are expected to be non-negative and
    `normalized` entries to lie in [0, 1]; call validate() to enforce that.
    A map that intentionally breaks the rule (the signed sparse difference
    produced during interference extraction) sets meta["signed"] = True.
    """

    data: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MAP_KINDS:
            raise ValueError(f"unknown map kind {self.kind!r}; expected one of {MAP_KINDS}")
        self.data = as_float_grid("data", self.data)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def units(self) -> str:
        return _UNITS[self.kind]

    def validate(self) -> "GridMap":
        """Check kind-specific value ranges; returns self for chaining."""
        if not np.all(np.isfinite(self.data)):
            raise ValueError(f"{self.kind} map contains non-finite entries")
        if self.meta.get("signed"):
            return self
        if self.kind in ("rss_watts", "sinr_linear") and np.any(self.data < 0):
            raise ValueError(f"{self.kind} map contains negative entries")
        if self.kind == "normalized" and (np.any(self.data < 0) or np.any(self.data > 1)):
            raise ValueError("normalized map has entries outside [0, 1]")
        return self

    def copy(self) -> "GridMap":
        return GridMap(self.data.copy(), self.kind, dict(self.meta))
