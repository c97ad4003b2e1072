"""Deterministic spatial ordering and KD-tree partitioning.

Both the encoder and the decoder run these routines on the *reconstructed*
(quantized, then dequantized) centers, so the leaf structure they see is
bit-identical by construction.  Everything here is pure integer / index
arithmetic with stable tie-breaking; no randomness, no hashing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Widest coordinate bit depth that still fits one interleaved Morton code
#: into a uint64 (3 * 21 = 63 bits).
_FAST_BITS = 21


def _spread3(v: np.ndarray) -> np.ndarray:
    """Spread the low 21 bits of each uint64 so they occupy every 3rd bit."""
    v = v & np.uint64(0x1FFFFF)
    v = (v | (v << np.uint64(32))) & np.uint64(0x1F00000000FFFF)
    v = (v | (v << np.uint64(16))) & np.uint64(0x1F0000FF0000FF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x100F00F00F00F00F)
    v = (v | (v << np.uint64(4))) & np.uint64(0x10C30C30C30C30C3)
    v = (v | (v << np.uint64(2))) & np.uint64(0x1249249249249249)
    return v


def _compact3(v: np.ndarray) -> np.ndarray:
    """Inverse of `_spread3`: gather every 3rd bit back into the low 21."""
    v = v & np.uint64(0x1249249249249249)
    v = (v ^ (v >> np.uint64(2))) & np.uint64(0x10C30C30C30C30C3)
    v = (v ^ (v >> np.uint64(4))) & np.uint64(0x100F00F00F00F00F)
    v = (v ^ (v >> np.uint64(8))) & np.uint64(0x1F0000FF0000FF)
    v = (v ^ (v >> np.uint64(16))) & np.uint64(0x1F00000000FFFF)
    v = (v ^ (v >> np.uint64(32))) & np.uint64(0x1FFFFF)
    return v


def _check_lattice(points: np.ndarray, q: int) -> np.ndarray:
    pts = np.asarray(points)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must be (N, 3), got {pts.shape}")
    if not np.issubdtype(pts.dtype, np.integer):
        raise ValueError("lattice points must be integers")
    if q < 1:
        raise ValueError("q must be >= 1")
    limit = 1 << q
    if pts.shape[0] and (pts.min() < 0 or pts.max() >= limit):
        raise ValueError(f"coordinates must lie in [0, 2^{q})")
    return pts.astype(np.int64, copy=False)


def morton_key_pair(points: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    """(high, low) uint64 sort keys of the interleaved z/y/x bit codes.

    Bit 0 of the code is bit 0 of x, bit 1 is bit 0 of y, bit 2 is bit 0
    of z, and so on.  For q <= 21 the whole code fits in `low` and `high`
    is zero; wider lattices split each coordinate at bit 16, putting the
    top interleave in `high`.
    """
    pts = _check_lattice(points, q)
    u = pts.astype(np.uint64)
    if q <= _FAST_BITS:
        low = _spread3(u[:, 0]) | (_spread3(u[:, 1]) << np.uint64(1)) | (
            _spread3(u[:, 2]) << np.uint64(2)
        )
        return np.zeros_like(low), low
    if q > 2 * _FAST_BITS - 5:  # split halves must each fit 21 bits
        raise ValueError(f"q={q} exceeds the supported Morton depth")
    lo_half = u & np.uint64(0xFFFF)
    hi_half = u >> np.uint64(16)
    low = _spread3(lo_half[:, 0]) | (_spread3(lo_half[:, 1]) << np.uint64(1)) | (
        _spread3(lo_half[:, 2]) << np.uint64(2)
    )
    high = _spread3(hi_half[:, 0]) | (_spread3(hi_half[:, 1]) << np.uint64(1)) | (
        _spread3(hi_half[:, 2]) << np.uint64(2)
    )
    return high, low


def morton_codes(points: np.ndarray, q: int) -> np.ndarray:
    """Full interleaved codes as uint64 (requires q <= 21)."""
    if q > _FAST_BITS:
        raise ValueError("morton_codes only covers q <= 21; "
                         "use morton_key_pair for deeper lattices")
    _, low = morton_key_pair(points, q)
    return low


def morton_order(points: np.ndarray, q: int) -> np.ndarray:
    """Permutation sorting lattice points into Morton (z-curve) order.

    The sort is stable: coincident points keep their input order.  The
    origin precedes (1, 0, 0) because x occupies the least significant
    interleaved bit.
    """
    high, low = morton_key_pair(points, q)
    return np.lexsort((low, high))


@dataclass
class Partition:
    """KD-tree leaves, left to right; each leaf is an index array."""

    leaves: list[np.ndarray] = field(default_factory=list)
    total: int = 0

    def sizes(self) -> list[int]:
        return [len(leaf) for leaf in self.leaves]


def kdtree_split(centers: np.ndarray, max_leaf: int = 200) -> Partition:
    """Partition points by recursive median splits until leaves fit `max_leaf`.

    At every internal node the split axis is the one with the widest
    coordinate extent (ties broken x before y before z) and the points are
    separated about the lower median of that coordinate: the ceil(n/2)
    smallest go left, the rest right, with equal coordinates assigned in
    input order.  Leaves are emitted left to right, so the partition of a
    Morton-ordered cloud is itself contiguous-free but deterministic.
    """
    pts = np.asarray(centers, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"centers must be (N, 3), got {pts.shape}")
    n = pts.shape[0]
    if n < 1:
        raise ValueError("cannot partition an empty cloud")
    if max_leaf < 1:
        raise ValueError("max_leaf must be >= 1")

    leaves: list[np.ndarray] = []
    # Explicit stack, right child pushed first, keeps emission left-to-right
    # without recursion-depth concerns.
    stack: list[np.ndarray] = [np.arange(n, dtype=np.int64)]
    while stack:
        idx = stack.pop()
        if len(idx) <= max_leaf:
            leaves.append(idx)
            continue
        sub = pts[idx]
        extents = sub.max(axis=0) - sub.min(axis=0)
        axis = int(np.argmax(extents))  # argmax takes the first (x<y<z) on ties
        coords = sub[:, axis]
        n_left = (len(idx) + 1) // 2
        kth = np.partition(coords, n_left - 1)[n_left - 1]
        below = coords < kth
        left = below.copy()
        # Equal-to-median points fill the left side in input order.
        need = n_left - int(below.sum())
        ties = np.flatnonzero(coords == kth)[:need]
        left[ties] = True
        stack.append(idx[~left])
        stack.append(idx[left])
    return Partition(leaves=leaves, total=n)
