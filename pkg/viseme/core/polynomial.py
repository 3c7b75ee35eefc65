"""
Cubic Surface Models
--------------------
Per-band polynomial models of total degree at most 3 and the truncated
bivariate arithmetic (products, shifts, linear substitutions) that the
segmenter, the rendering reduction and the grouping stage share.

Coefficients are kept in the order
(1, x, y, x², xy, y², x³, x²y, xy², y³). Internally a polynomial is also
handled as a 4×4 grid G where G[i, j] multiplies x**i * y**j and every
entry with i + j > 3 is zero.
"""

from dataclasses import dataclass
from math import comb
from typing import Sequence, Tuple

import numpy as np

MONOMIALS: Tuple[Tuple[int, int], ...] = (
    (0, 0), (1, 0), (0, 1),
    (2, 0), (1, 1), (0, 2),
    (3, 0), (2, 1), (1, 2), (0, 3),
)
MONOMIAL_NAMES = ("1", "x", "y", "x2", "xy", "y2", "x3", "x2y", "xy2", "y3")
MAX_DEGREE = 3
N_TERMS = {1: 3, 2: 6, 3: 10}

_DEGREE_MASK = np.add.outer(np.arange(4), np.arange(4)) <= MAX_DEGREE


def to_grid(coeffs: Sequence[float]) -> np.ndarray:
    grid = np.zeros((4, 4))
    for c, (i, j) in zip(coeffs, MONOMIALS):
        grid[i, j] = c
    return grid


def from_grid(grid: np.ndarray) -> np.ndarray:
    return np.array([grid[i, j] for i, j in MONOMIALS], dtype=float)


def truncate(grid: np.ndarray) -> np.ndarray:
    return np.where(_DEGREE_MASK, grid, 0.0)


def grid_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of two grid polynomials, terms above degree 3 dropped."""
    out = np.zeros((4, 4))
    for i in range(4):
        for j in range(4 - i):
            if a[i, j] != 0.0:
                out[i:, j:] += a[i, j] * b[:4 - i, :4 - j]
    return truncate(out)


def grid_pow(a: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((4, 4))
    out[0, 0] = 1.0
    for _ in range(n):
        out = grid_mul(out, a)
    return out


def grid_compose(p: np.ndarray, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Substitute x = s(X, Y) and y = t(X, Y) into p, truncated at degree 3."""
    s_pows = [grid_pow(s, n) for n in range(4)]
    t_pows = [grid_pow(t, n) for n in range(4)]
    out = np.zeros((4, 4))
    for i in range(4):
        for j in range(4 - i):
            if p[i, j] != 0.0:
                out += p[i, j] * grid_mul(s_pows[i], t_pows[j])
    return truncate(out)


def grid_shift(grid: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Return q with q(X, Y) = p(X + dx, Y + dy)."""
    out = np.zeros((4, 4))
    for i in range(4):
        for j in range(4 - i):
            c = grid[i, j]
            if c == 0.0:
                continue
            for a in range(i + 1):
                for b in range(j + 1):
                    out[a, b] += c * comb(i, a) * comb(j, b) * dx ** (i - a) * dy ** (j - b)
    return out


def grid_eval(grid: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    out = np.zeros(np.broadcast(xs, ys).shape)
    for i in range(4):
        for j in range(4 - i):
            if grid[i, j] != 0.0:
                out = out + grid[i, j] * xs ** i * ys ** j
    return out


def linear_grid(cx: float, cy: float, c0: float = 0.0) -> np.ndarray:
    grid = np.zeros((4, 4))
    grid[0, 0] = c0
    grid[1, 0] = cx
    grid[0, 1] = cy
    return grid


def degree_of(coeffs: np.ndarray, tol: float = 0.0) -> int:
    """Highest total degree carrying a coefficient above tol (at least 1)."""
    degree = 1
    for c, (i, j) in zip(coeffs, MONOMIALS):
        if abs(c) > tol:
            degree = max(degree, i + j)
    return degree


@dataclass
class PolyModel:
    """
    Per-band cubic model.

    Attributes:
        coeffs: array of shape (bands, 10) in MONOMIALS order
        order: declared order, 1 to 3; coefficients above it are zero
        degenerate: set when a fit had to fall back to a lower order
    """
    coeffs: np.ndarray
    order: int = 1
    degenerate: bool = False

    def __post_init__(self):
        self.coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if self.coeffs.shape[1] != len(MONOMIALS):
            raise ValueError(f"Expected 10 coefficients per band, got {self.coeffs.shape[1]}")
        if self.order not in (1, 2, 3):
            raise ValueError(f"Model order must be 1, 2 or 3, got {self.order}")
        keep = np.array([i + j <= self.order for i, j in MONOMIALS])
        self.coeffs = np.where(keep, self.coeffs, 0.0)

    @property
    def bands(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def constant(cls, values: Sequence[float]) -> "PolyModel":
        coeffs = np.zeros((len(values), len(MONOMIALS)))
        coeffs[:, 0] = values
        return cls(coeffs, order=1)

    @classmethod
    def from_grids(cls, grids: Sequence[np.ndarray], order: int) -> "PolyModel":
        return cls(np.stack([from_grid(g) for g in grids]), order=order)

    def grid(self, band: int) -> np.ndarray:
        return to_grid(self.coeffs[band])

    def evaluate(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Evaluate every band; returns an array of shape (n, bands)."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        cols = [xs ** i * ys ** j for i, j in MONOMIALS]
        design = np.stack(cols, axis=-1)
        return design @ self.coeffs.T

    def copy(self) -> "PolyModel":
        return PolyModel(self.coeffs.copy(), order=self.order, degenerate=self.degenerate)

    def same_form(self, other: "PolyModel") -> bool:
        return self.coeffs.shape == other.coeffs.shape and bool(np.array_equal(self.coeffs, other.coeffs))


def design_matrix(xs: np.ndarray, ys: np.ndarray, order: int) -> np.ndarray:
    terms = MONOMIALS[:N_TERMS[order]]
    return np.stack([xs ** i * ys ** j for i, j in terms], axis=1)
