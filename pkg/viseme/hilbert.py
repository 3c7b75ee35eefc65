"""
Hilbert Curves
--------------
Planar Hilbert curve as a recursive quad-tree traversal over four basic
patterns, its k-dimensional generalization (transpose / Gray-code method),
and the nearest-neighbor style visiting order of a point set.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]

# Quadrant visit order of each basic pattern; pattern A opens upward in image
# coordinates (y down) and starts at (0, 0).
PATTERNS: Dict[str, Tuple[Cell, ...]] = {
    "A": ((0, 0), (0, 1), (1, 1), (1, 0)),
    "B": ((0, 0), (1, 0), (1, 1), (0, 1)),
    "C": ((1, 1), (1, 0), (0, 0), (0, 1)),
    "D": ((1, 1), (0, 1), (0, 0), (1, 0)),
}
CHILD_PATTERNS: Dict[str, Tuple[str, str, str, str]] = {
    "A": ("B", "A", "A", "D"),
    "B": ("A", "B", "B", "C"),
    "C": ("D", "C", "C", "B"),
    "D": ("C", "D", "D", "A"),
}
_QUADRANT_DIGIT = {name: {cell: d for d, cell in enumerate(order)} for name, order in PATTERNS.items()}
BASE_PATTERN = "A"


def hilbert_d2xy(r: int, index: int) -> Cell:
    """Cell (i, j) visited at position `index` of the order-r planar curve."""
    if r < 0 or not 0 <= index < 4 ** r:
        raise ValueError(f"Hilbert index {index} out of range for r={r}")
    pattern = BASE_PATTERN
    i = j = 0
    for level in range(r - 1, -1, -1):
        digit = (index >> (2 * level)) & 3
        qi, qj = PATTERNS[pattern][digit]
        i = (i << 1) | qi
        j = (j << 1) | qj
        pattern = CHILD_PATTERNS[pattern][digit]
    return i, j


def hilbert_xy2d(r: int, i: int, j: int) -> int:
    """Inverse of hilbert_d2xy."""
    side = 1 << r
    if r < 0 or not (0 <= i < side and 0 <= j < side):
        raise ValueError(f"Cell ({i}, {j}) out of range for r={r}")
    pattern = BASE_PATTERN
    index = 0
    for level in range(r - 1, -1, -1):
        cell = ((i >> level) & 1, (j >> level) & 1)
        digit = _QUADRANT_DIGIT[pattern][cell]
        index = (index << 2) | digit
        pattern = CHILD_PATTERNS[pattern][digit]
    return index


def hilbert_kd(k: int, r: int, index: int) -> Tuple[int, ...]:
    """
    Cell of the k-dimensional order-r Hilbert curve at `index`.

    Args:
        k: dimension
        r: bits per coordinate
        index: position in [0, 2**(k*r))

    Returns:
        Tuple of k coordinates in [0, 2**r)
    """
    if k < 1 or r < 1 or not 0 <= index < 1 << (k * r):
        raise ValueError(f"Hilbert index {index} out of range for k={k}, r={r}")
    # transpose: coordinate c takes bits c, c + k, c + 2k, ... counted from the MSB
    x = [0] * k
    for b in range(k * r):
        bit = (index >> (k * r - 1 - b)) & 1
        x[b % k] = (x[b % k] << 1) | bit

    # Gray decode
    t = x[k - 1] >> 1
    for c in range(k - 1, 0, -1):
        x[c] ^= x[c - 1]
    x[0] ^= t

    # undo excess work
    top = 2 << (r - 1)
    q = 2
    while q != top:
        p = q - 1
        for c in range(k - 1, -1, -1):
            if x[c] & q:
                x[0] ^= p
            else:
                t = (x[0] ^ x[c]) & p
                x[0] ^= t
                x[c] ^= t
        q <<= 1
    return tuple(x)


def hilbert_kd_index(k: int, r: int, cell: Sequence[int]) -> int:
    """Inverse of hilbert_kd."""
    x = [int(v) for v in cell]
    if len(x) != k or any(not 0 <= v < 1 << r for v in x):
        raise ValueError(f"Cell {tuple(cell)} out of range for k={k}, r={r}")
    m = 1 << (r - 1)

    # inverse undo excess work
    q = m
    while q > 1:
        p = q - 1
        for c in range(k):
            if x[c] & q:
                x[0] ^= p
            else:
                t = (x[0] ^ x[c]) & p
                x[0] ^= t
                x[c] ^= t
        q >>= 1

    # Gray encode
    for c in range(1, k):
        x[c] ^= x[c - 1]
    t = 0
    q = m
    while q > 1:
        if x[k - 1] & q:
            t ^= q - 1
        q >>= 1
    for c in range(k):
        x[c] ^= t

    index = 0
    for level in range(r - 1, -1, -1):
        for c in range(k):
            index = (index << 1) | ((x[c] >> level) & 1)
    return index


def order_points(points: Sequence[Tuple[float, float]], r: int,
                 bounds: Optional[Tuple[float, float, float, float]] = None) -> List[int]:
    """
    Visiting order of points along the planar Hilbert curve.

    Args:
        points: (x, y) positions
        r: curve order; the box is cut into 2**r cells per side
        bounds: (x_min, y_min, x_max, y_max); the points' own box when omitted

    Returns:
        Permutation of point indices; ties keep the original order
    """
    if len(points) == 0:
        return []
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if bounds is None:
        x0, y0 = pts.min(axis=0)
        x1, y1 = pts.max(axis=0)
    else:
        x0, y0, x1, y1 = bounds
    side = 1 << r

    def to_cells(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
        span = hi - lo
        if span <= 0:
            return np.zeros(values.shape, dtype=np.int64)
        return np.clip(np.floor((values - lo) / span * side), 0, side - 1).astype(np.int64)

    ci = to_cells(pts[:, 0], x0, x1)
    cj = to_cells(pts[:, 1], y0, y1)
    keys = [hilbert_xy2d(r, int(i), int(j)) for i, j in zip(ci, cj)]
    return sorted(range(len(keys)), key=lambda n: (keys[n], n))


def hilbert_path(r: int) -> List[Cell]:
    return [hilbert_d2xy(r, d) for d in range(4 ** r)]


def tour_length(points: Sequence[Tuple[float, float]], order: Sequence[int]) -> float:
    """Length of the open polyline visiting points in the given order."""
    if len(order) < 2:
        return 0.0
    pts = np.asarray(points, dtype=float)[list(order)]
    return float(np.sqrt((np.diff(pts, axis=0) ** 2).sum(axis=1)).sum())


def random_tour_lengths(points: Sequence[Tuple[float, float]], trials: int, seed: int = 0) -> np.ndarray:
    """Tour lengths of `trials` seeded random permutations, the ordering baseline."""
    rng = np.random.default_rng(seed)
    n = len(points)
    return np.array([tour_length(points, rng.permutation(n)) for _ in range(trials)])
