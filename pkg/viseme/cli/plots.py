"""
Plots
-----
SVG renderings of Hilbert curves and point tours, and Pillow rasters of
segmentations and label maps.
"""

import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from ..hilbert import hilbert_path, order_points
from ..image import MultiImage

logger = logging.getLogger(__name__)

PLOT_KINDS = ("hilbert-curve", "point-tour", "segmentation-overlay", "label-map")
SVG_SIZE = 512


def _polyline_svg(points: Sequence[Tuple[float, float]], width: float, height: float,
                  scale: float, dots: bool = False) -> str:
    svg_parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="0 0 {width * scale:g} {height * scale:g}" '
        f'width="{width * scale:g}" height="{height * scale:g}">'
    ]
    coords = " ".join(f"{x * scale:.2f},{y * scale:.2f}" for x, y in points)
    svg_parts.append(f'<polyline points="{coords}" fill="none" stroke="#000000" stroke-width="1"/>')
    if dots:
        for x, y in points:
            svg_parts.append(f'<circle cx="{x * scale:.2f}" cy="{y * scale:.2f}" r="3" fill="#d62728"/>')
    svg_parts.append("</svg>")
    return "\n".join(svg_parts) + "\n"


def hilbert_curve_svg(r: int) -> str:
    """Polyline through the cell centers of the order-r planar curve."""
    side = 1 << r
    cells = hilbert_path(r)
    return _polyline_svg([(i + 0.5, j + 0.5) for i, j in cells], side, side, SVG_SIZE / side)


def read_points(path: Union[str, Path]) -> List[Tuple[float, float]]:
    """Whitespace separated "x y" lines; blank lines and # comments are skipped."""
    points = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        x, y = line.split()[:2]
        points.append((float(x), float(y)))
    return points


def point_tour(points: Sequence[Tuple[float, float]], r: int) -> List[Tuple[float, float]]:
    return [points[n] for n in order_points(points, r)]


def point_tour_svg(points: Sequence[Tuple[float, float]], r: int) -> str:
    tour = point_tour(points, r)
    pts = np.asarray(tour, dtype=float).reshape(-1, 2)
    lo = pts.min(axis=0)
    span = max(float((pts.max(axis=0) - lo).max()), 1.0)
    margin = 0.05 * span
    shifted = [(x - lo[0] + margin, y - lo[1] + margin) for x, y in tour]
    extent = span + 2 * margin
    return _polyline_svg(shifted, extent, extent, SVG_SIZE / extent, dots=True)


def label_colors(count: int) -> np.ndarray:
    """Fixed pseudo-random palette, one RGB color per label."""
    rng = np.random.default_rng(count)
    return rng.integers(32, 256, size=(count, 3), dtype=np.uint8)


def label_map_image(labels: np.ndarray) -> Image.Image:
    _, dense = np.unique(labels, return_inverse=True)
    dense = dense.reshape(labels.shape)
    palette = label_colors(int(dense.max()) + 1)
    return Image.fromarray(palette[dense])


def boundary_mask(labels: np.ndarray) -> np.ndarray:
    edges = np.zeros(labels.shape, dtype=bool)
    edges[:, 1:] |= labels[:, 1:] != labels[:, :-1]
    edges[1:, :] |= labels[1:, :] != labels[:-1, :]
    return edges


def segmentation_overlay(img: MultiImage, labels: np.ndarray) -> Image.Image:
    """Image in gray or color with region boundaries painted red."""
    if img.bands >= 3:
        rgb = img.samples[:3]
    else:
        rgb = np.repeat(img.samples[:1], 3, axis=0)
    rgb = (rgb * 255 // max(img.depth - 1, 1)).astype(np.uint8).transpose(1, 2, 0).copy()
    rgb[boundary_mask(labels)] = (255, 0, 0)
    return Image.fromarray(rgb)


def write_svg(svg: str, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg, encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def write_ppm(image: Image.Image, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image.save(path, format="PPM")
    logger.info(f"Wrote {path}")
    return path
