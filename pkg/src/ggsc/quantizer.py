"""Uniform scalar quantization of attribute groups.

Values are mapped onto a 2^q-level integer grid anchored at the
per-component minimum:

    b = floor((a - a_min) * (2^q - 1) / s + 1/2)

The scale `s` is shared by every component of a group ("group" mode, the
default -- it keeps one grid per attribute and makes the index stream
friendlier to the entropy coder) or chosen per component ("component"
mode).  A grid is fitted once over all values an attribute contributes
across every leaf, travels in the stream header, and is the only thing
the decoder needs to invert the mapping:

    a_hat = a_min + b * s / (2^q - 1)

so the round-trip error is bounded by half a step, 0.5 * s / (2^q - 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCALE_MODES = ("group", "component")


@dataclass(frozen=True)
class QuantGrid:
    """Fitted quantization grid for one attribute group.

    mins:   (C,) per-component minima.
    scales: (C,) per-component scale; in "group" mode all entries equal
            the widest component range.
    q:      bit depth, 1..31.
    mode:   "group" or "component".
    """

    mins: np.ndarray
    scales: np.ndarray
    q: int
    mode: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "mins", np.asarray(self.mins, dtype=np.float64))
        object.__setattr__(self, "scales", np.asarray(self.scales, dtype=np.float64))
        if self.mins.ndim != 1 or self.mins.shape != self.scales.shape:
            raise ValueError("mins and scales must be matching 1-D arrays")
        if not (np.isfinite(self.mins).all() and np.isfinite(self.scales).all()):
            raise ValueError("grid parameters must be finite")
        if np.any(self.scales < 0.0):
            raise ValueError("scales must be non-negative")
        if not 1 <= self.q <= 31:
            raise ValueError(f"q must be in [1, 31], got {self.q}")
        if self.mode not in SCALE_MODES:
            raise ValueError(f"mode must be one of {SCALE_MODES}, got {self.mode!r}")

    @property
    def components(self) -> int:
        return self.mins.shape[0]

    @property
    def levels(self) -> int:
        return (1 << self.q) - 1

    @property
    def step(self) -> np.ndarray:
        """Reconstruction spacing per component, s / (2^q - 1)."""
        return self.scales / self.levels


def fit_grid(values: np.ndarray, q: int, mode: str = "group") -> QuantGrid:
    """Fit a grid over samples shaped (S, C) (or (S,) for C = 1)."""
    vals = _as_samples(values)
    if vals.shape[0] < 1:
        raise ValueError("cannot fit a grid on zero samples")
    if not np.isfinite(vals).all():
        raise ValueError("samples must be finite")
    mins = vals.min(axis=0)
    ranges = vals.max(axis=0) - mins
    if mode == "group":
        scales = np.full_like(ranges, ranges.max())
    elif mode == "component":
        scales = ranges
    else:
        raise ValueError(f"mode must be one of {SCALE_MODES}, got {mode!r}")
    return QuantGrid(mins=mins, scales=scales, q=q, mode=mode)


def quantize(values: np.ndarray, grid: QuantGrid) -> np.ndarray:
    """Map values (..., C) to integer levels (int64, same leading shape).

    Constant components (scale 0) map to level 0.  Inputs are expected to
    lie inside the fitted range; a half-ulp excursion past either end is
    clamped rather than wrapped.
    """
    vals, squeeze = _align(values, grid)
    out = np.zeros(vals.shape, dtype=np.int64)
    live = grid.scales > 0.0
    if live.any():
        scaled = (vals[..., live] - grid.mins[live]) * grid.levels
        out[..., live] = np.floor(scaled / grid.scales[live] + 0.5).astype(np.int64)
    np.clip(out, 0, grid.levels, out=out)
    return out[..., 0] if squeeze else out


def dequantize(levels: np.ndarray, grid: QuantGrid) -> np.ndarray:
    """Invert `quantize` onto grid points; levels outside [0, 2^q-1] raise."""
    lev, squeeze = _align(levels, grid)
    if not np.issubdtype(lev.dtype, np.integer):
        if not np.equal(np.mod(lev, 1), 0).all():
            raise ValueError("levels must be integers")
        lev = lev.astype(np.int64)
    if lev.size and (lev.min() < 0 or lev.max() > grid.levels):
        raise ValueError(f"levels must lie in [0, {grid.levels}]")
    return grid.mins + lev * grid.scales / grid.levels


def _as_samples(values) -> np.ndarray:
    vals = np.asarray(values)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.ndim != 2:
        raise ValueError(f"expected (S, C) samples, got shape {vals.shape}")
    return vals.astype(np.float64, copy=False)


def _align(values, grid: QuantGrid):
    """Broadcast-check trailing dim against the grid; C=1 accepts (...,)."""
    vals = np.asarray(values)
    squeeze = False
    if grid.components == 1 and (vals.ndim == 0 or vals.shape[-1] != 1):
        vals = vals[..., None]
        squeeze = True
    if vals.ndim < 1 or vals.shape[-1] != grid.components:
        raise ValueError(
            f"trailing dimension must be {grid.components}, got {vals.shape}"
        )
    return vals, squeeze
