"""
Piecewise Regular Segmenter
---------------------------
Recursive dichotomous decomposition of an image into a binary tree of
polynomial patches. Each set is fitted by least squares; when the L∞ error
exceeds the precision, the points of highest error (the singular set) are
located from the error histogram, a regression line is fitted through them
and the set is split along it. On the way back up, the children of every node
are replaced by one model of their union whenever a single model meets the
precision there.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from .core.errors import CoincidentCentersError, DimensionMismatchError, FormatVersionError, UnknownCodeError
from .core.polynomial import (
    MONOMIALS,
    N_TERMS,
    PolyModel,
    design_matrix,
    grid_mul,
    grid_shift,
    linear_grid,
)
from .image import MultiImage, SampleSet, full_sample_set
from .models.schemas import AggregationOutcome, Modality, SegmentStats, TreeNodeRecord, TreeRecord

logger = logging.getLogger(__name__)

Point = Tuple[float, float]


@dataclass
class LinearModel:
    """Per-band plane z = a_1 + a_x x + a_y y; coeffs has shape (bands, 3)."""
    coeffs: np.ndarray
    degenerate: bool = False

    def to_poly(self) -> PolyModel:
        full = np.zeros((self.coeffs.shape[0], len(MONOMIALS)))
        full[:, :3] = self.coeffs
        return PolyModel(full, order=1, degenerate=self.degenerate)


@dataclass
class CovStats:
    center: Point
    band_means: np.ndarray
    r_xx: float
    r_xy: float
    r_yy: float
    r_z: np.ndarray
    lambda1: float
    lambda2: float
    theta: float


@dataclass
class ErrorHistogram:
    bins: np.ndarray
    modality: Modality
    threshold: int


@dataclass
class SplitLine:
    """Line a x + b y + c = 0 through the singular set."""
    center: Point
    sigma_x2: float
    sigma_xy: float
    sigma_y2: float
    a: float
    b: float
    c: float
    regression: str = "y-on-x"

    def evaluate(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return self.a * xs + self.b * ys + self.c


@dataclass
class DecompNode:
    samples: SampleSet
    model: PolyModel
    error: float
    center: Point
    band_means: np.ndarray
    depth: int = 0
    left: Optional["DecompNode"] = None
    right: Optional["DecompNode"] = None
    node_id: int = -1
    unmergeable: bool = False
    outcome: AggregationOutcome = AggregationOutcome.LEAF

    @property
    def order(self) -> int:
        return self.model.order

    @property
    def card(self) -> int:
        return self.samples.card

    @property
    def is_leaf(self) -> bool:
        return self.left is None and self.right is None

    @property
    def children(self) -> Tuple["DecompNode", ...]:
        return () if self.is_leaf else (self.left, self.right)


@dataclass
class DecompTree:
    image: MultiImage
    root: DecompNode
    precision: float
    min_card: int
    _by_id: Dict[int, DecompNode] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.renumber()

    def renumber(self) -> None:
        """Assign node ids in preorder."""
        self._by_id = {}
        for i, node in enumerate(self.nodes()):
            node.node_id = i
            self._by_id[i] = node

    def nodes(self) -> Iterator[DecompNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)

    def leaves(self) -> List[DecompNode]:
        return [n for n in self.nodes() if n.is_leaf]

    def node(self, node_id: int) -> DecompNode:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise UnknownCodeError(f"Unknown node id {node_id}")

    def parents(self) -> Dict[int, int]:
        out = {}
        for node in self.nodes():
            for child in node.children:
                out[child.node_id] = node.node_id
        return out

    def label_map(self) -> np.ndarray:
        """Leaf node id of every pixel, shape (height, width)."""
        labels = np.full(self.image.width * self.image.height, -1, dtype=np.int64)
        for leaf in self.leaves():
            labels[leaf.samples.indices] = leaf.node_id
        return labels.reshape(self.image.height, self.image.width)

    def stats(self) -> SegmentStats:
        leaves = self.leaves()
        histogram: Dict[str, int] = {}
        for leaf in leaves:
            histogram[str(leaf.order)] = histogram.get(str(leaf.order), 0) + 1
        return SegmentStats(
            leaf_count=len(leaves),
            node_count=len(self._by_id),
            max_error=max(leaf.error for leaf in leaves),
            order_histogram=dict(sorted(histogram.items())),
        )


def cov_eigen(r_xx: float, r_xy: float, r_yy: float) -> Tuple[float, float, float]:
    """
    Eigenvalues and major-axis angle of a symmetric 2×2 covariance.

    Returns:
        (lambda1, lambda2, theta) with lambda1 >= lambda2 and theta in [0, pi)
    """
    disc = math.sqrt((r_xx - r_yy) ** 2 + 4.0 * r_xy ** 2)
    lambda1 = 0.5 * (r_xx + r_yy + disc)
    lambda2 = 0.5 * (r_xx + r_yy - disc)
    if r_xy != 0.0:
        theta = math.atan((lambda1 - r_xx) / r_xy)
    else:
        theta = 0.0 if r_xx >= r_yy else math.pi / 2
    return lambda1, lambda2, theta % math.pi


def fit_linear_lsq(V: SampleSet) -> Tuple[LinearModel, CovStats]:
    """
    Least-squares plane per band, solved through the centered covariances.

    Collinear or too small sets fall back to the band means, flagged degenerate.
    """
    xs = V.xs.astype(float)
    ys = V.ys.astype(float)
    z = V.z
    n = V.card
    xm, ym = xs.mean(), ys.mean()
    zm = z.mean(axis=0)
    dx, dy, dz = xs - xm, ys - ym, z - zm
    r_xx = float(dx @ dx) / n
    r_xy = float(dx @ dy) / n
    r_yy = float(dy @ dy) / n
    r_z = np.stack([dz.T @ dx, dz.T @ dy], axis=1) / n
    lambda1, lambda2, theta = cov_eigen(r_xx, r_xy, r_yy)
    stats = CovStats((xm, ym), zm, r_xx, r_xy, r_yy, r_z, lambda1, lambda2, theta)

    det = r_xx * r_yy - r_xy ** 2
    coeffs = np.zeros((z.shape[1], 3))
    coeffs[:, 0] = zm
    if n < 3 or det <= 1e-12 * max((r_xx + r_yy) ** 2, 1e-300):
        return LinearModel(coeffs, degenerate=True), stats

    a_x = (r_z[:, 0] * r_yy - r_z[:, 1] * r_xy) / det
    a_y = (r_z[:, 1] * r_xx - r_z[:, 0] * r_xy) / det
    coeffs[:, 0] = zm - a_x * xm - a_y * ym
    coeffs[:, 1] = a_x
    coeffs[:, 2] = a_y
    return LinearModel(coeffs), stats


def point_errors(V: SampleSet, model: PolyModel) -> np.ndarray:
    """Per-point L∞ error across bands."""
    residual = V.z - model.evaluate(V.xs, V.ys)
    return np.abs(residual).max(axis=1)


def max_error(V: SampleSet, model: PolyModel) -> float:
    return float(point_errors(V, model).max())


def error_levels(errors: np.ndarray, depth: int) -> np.ndarray:
    return np.clip(np.rint(errors), 0, depth - 1).astype(np.int64)


def detect_threshold(bins: np.ndarray, card: int) -> Tuple[Modality, int]:
    """
    Modality and threshold of an error histogram.

    The histogram is smoothed by a centered 3-bin mean; local maxima holding
    at least max(2, card/1000) make the modes. Two or more modes place the
    threshold in the highest valley between the two rightmost modes;
    otherwise it is placed before the ceil(sqrt(card)) highest errors.
    """
    bins = np.asarray(bins, dtype=float)
    padded = np.concatenate([[0.0], bins, [0.0]])
    smooth = (padded[:-2] + padded[1:-1] + padded[2:]) / 3.0
    left = np.concatenate([[0.0], smooth[:-1]])
    right = np.concatenate([smooth[1:], [0.0]])
    min_count = max(2.0, card / 1000.0)
    modes = np.flatnonzero((smooth > left) & (smooth >= right) & (smooth >= min_count))

    if modes.size >= 2:
        lo, hi = int(modes[-2]), int(modes[-1])
        inner = np.arange(lo + 1, hi)
        strict = inner[(smooth[inner] < smooth[inner - 1]) & (smooth[inner] < smooth[inner + 1])]
        if strict.size:
            return Modality.MULTI, int(strict[-1])
        segment = smooth[inner]
        return Modality.MULTI, int(inner[len(inner) - 1 - int(np.argmin(segment[::-1]))])

    return Modality.MONO, _tail_threshold(bins, card)


def _tail_threshold(bins: np.ndarray, card: int) -> int:
    limit = math.ceil(math.sqrt(card))
    tail = np.cumsum(bins[::-1])[::-1]
    candidates = np.flatnonzero((tail > 0) & (tail <= limit))
    if candidates.size:
        return int(candidates[0])
    return int(np.flatnonzero(bins)[-1])


def build_histogram(V: SampleSet, model: PolyModel) -> ErrorHistogram:
    errors = point_errors(V, model)
    bins = np.bincount(error_levels(errors, V.image.depth), minlength=V.image.depth)
    modality, threshold = detect_threshold(bins, V.card)
    return ErrorHistogram(bins, modality, threshold)


def singular_set(V: SampleSet, errors: np.ndarray, threshold: int, modality: Modality) -> SampleSet:
    """Points above the threshold, or the ceil(sqrt(card)) worst points when mono-modal."""
    if modality == Modality.MULTI:
        mask = np.rint(errors) > threshold
        if mask.any():
            return V.subset(mask)
        logger.debug("Empty singular set above the valley, using the tail rule")
    count = math.ceil(math.sqrt(V.card))
    worst = np.argsort(-errors, kind="stable")[:count]
    mask = np.zeros(V.card, dtype=bool)
    mask[worst] = True
    return V.subset(mask)


def fit_split_line(VS: SampleSet) -> SplitLine:
    """
    Regression line of y on x through the singular set, slope sigma_xy / sigma_x2.

    A set at most one pixel wide gives the vertical line x = x_mean, and a
    single point gives no line at all; split_set then cuts along the
    principal axis of the whole set.
    """
    xs = VS.xs.astype(float)
    ys = VS.ys.astype(float)
    xm, ym = xs.mean(), ys.mean()
    dx, dy = xs - xm, ys - ym
    s_x2 = float(dx @ dx) / VS.card
    s_xy = float(dx @ dy) / VS.card
    s_y2 = float(dy @ dy) / VS.card

    if VS.card == 1:
        return SplitLine((xm, ym), s_x2, s_xy, s_y2, 0.0, 0.0, 0.0, regression="point")
    if xs.max() - xs.min() <= 1.0:
        return SplitLine((xm, ym), s_x2, s_xy, s_y2, 1.0, 0.0, -xm, regression="vertical")
    return SplitLine((xm, ym), s_x2, s_xy, s_y2,
                     s_xy, -s_x2, ym * s_x2 - xm * s_xy)


def _closer_to_negative(V: SampleSet, below: np.ndarray, above: np.ndarray,
                        on_line: np.ndarray) -> np.ndarray:
    """On-line points better fitted by the plane of the negative side; ties go positive."""
    on = V.subset(on_line)
    e_below = point_errors(on, fit_linear_lsq(V.subset(below))[0].to_poly())
    e_above = point_errors(on, fit_linear_lsq(V.subset(above))[0].to_poly())
    closer = np.zeros(V.card, dtype=bool)
    closer[np.flatnonzero(on_line)[e_below < e_above]] = True
    return closer


def split_set(V: SampleSet, line: SplitLine) -> Tuple[SampleSet, SampleSet]:
    """
    Partition V by the sign of the line; both sides are always non-empty.

    Points lying on the line join the side whose plane fits them best. When
    the line leaves a side empty the set is cut through its centroid along
    the principal axis instead.
    """
    if V.card < 2:
        raise ValueError("Cannot split a set of fewer than two points")
    xs = V.xs.astype(float)
    ys = V.ys.astype(float)
    negative = None
    if line.regression != "point":
        values = line.evaluate(xs, ys)
        tol = 1e-9 * (abs(line.a) + abs(line.b)) * (1.0 + np.abs(xs).max() + np.abs(ys).max())
        on_line = np.abs(values) <= tol
        below = (values < 0) & ~on_line
        above = ~below & ~on_line
        if below.any() and above.any():
            negative = below
            if on_line.any():
                negative = below | _closer_to_negative(V, below, above, on_line)
        elif on_line.any() and (below.any() or above.any()):
            negative = below if below.any() else on_line

    if negative is None:
        logger.debug(f"Split line leaves one side empty on {V.card} points, using the principal axis")
        xm, ym = xs.mean(), ys.mean()
        dx, dy = xs - xm, ys - ym
        _, _, theta = cov_eigen(float(dx @ dx), float(dx @ dy), float(dy @ dy))
        negative = dx * math.cos(theta) + dy * math.sin(theta) < 0
        if negative.all() or not negative.any():
            negative = np.arange(V.card) < V.card // 2
    return V.subset(negative), V.subset(~negative)


def barycentric_combine(f_minus: PolyModel, f_plus: PolyModel,
                        m_minus: Point, m_plus: Point) -> PolyModel:
    """
    Order-raising combination w f- + (1 - w) f+ with w affine along the axis
    of the two centers, w = 1 at M- and 0 at M+. Terms above degree 3 are dropped.
    """
    d_x = m_plus[0] - m_minus[0]
    d_y = m_plus[1] - m_minus[1]
    dd = d_x * d_x + d_y * d_y
    if dd == 0.0:
        raise CoincidentCentersError(f"Sibling centers coincide at {m_minus}")
    weight = linear_grid(-d_x / dd, -d_y / dd, (m_plus[0] * d_x + m_plus[1] * d_y) / dd)
    grids = []
    for band in range(f_minus.bands):
        g_plus = f_plus.grid(band)
        grids.append(g_plus + grid_mul(weight, f_minus.grid(band) - g_plus))
    order = min(max(f_minus.order, f_plus.order) + 1, 3)
    return PolyModel.from_grids(grids, order=order)


def fit_poly_lsq(V: SampleSet, order: int) -> PolyModel:
    """
    Least-squares polynomial of total degree `order` per band.

    Coordinates are centered and scaled before solving. A rank-deficient
    design falls back to the highest full-rank order, flagged degenerate.
    """
    if order not in (1, 2, 3):
        raise ValueError(f"Order must be 1, 2 or 3, got {order}")
    xs = V.xs.astype(float)
    ys = V.ys.astype(float)
    z = V.z
    xm, ym = xs.mean(), ys.mean()
    scale = max(float(xs.std()), float(ys.std()), 1.0)
    u, v = (xs - xm) / scale, (ys - ym) / scale

    for o in range(order, 0, -1):
        if V.card < N_TERMS[o]:
            continue
        design = design_matrix(u, v, o)
        if np.linalg.matrix_rank(design) < design.shape[1]:
            continue
        solution, *_ = np.linalg.lstsq(design, z, rcond=None)
        grids = []
        for band in range(z.shape[1]):
            local = np.zeros((4, 4))
            for t, (i, j) in enumerate(MONOMIALS[:N_TERMS[o]]):
                local[i, j] = solution[t, band] / scale ** (i + j)
            grids.append(grid_shift(local, -xm, -ym))
        model = PolyModel.from_grids(grids, order=o)
        model.degenerate = o < order
        if model.degenerate:
            logger.debug(f"Rank-deficient order-{order} fit on {V.card} points, used order {o}")
        return model

    model = PolyModel.constant(z.mean(axis=0))
    model.degenerate = True
    return model


def _make_node(V: SampleSet, depth: int) -> DecompNode:
    linear, stats = fit_linear_lsq(V)
    model = linear.to_poly()
    return DecompNode(V, model, max_error(V, model), stats.center, stats.band_means, depth=depth)


def try_aggregate(node: DecompNode, precision: float, least_squares: bool = True) -> DecompNode:
    """
    Try to replace the two children of a node by a single model of their union.

    Outcomes, in priority order: the child model with the smaller union error
    when it fits (ties go left); the barycentric combination when the child
    orders allow raising and it fits; with `least_squares`, a direct fit one
    order above the children; otherwise the node is marked unmergeable.
    A successful aggregation drops the whole subtree below the node.
    """
    if node.is_leaf:
        raise ValueError(f"Node {node.node_id} has no children to aggregate")
    V = node.samples
    left, right = node.left, node.right
    e_left = max_error(V, left.model)
    e_right = max_error(V, right.model)
    chosen, e_chosen = (left, e_left) if e_left <= e_right else (right, e_right)
    if e_chosen <= precision:
        node.model = chosen.model.copy()
        node.error = e_chosen
        node.left = node.right = None
        node.outcome = AggregationOutcome.PROPAGATED
        logger.debug(f"Propagated order-{node.order} child model over {V.card} points")
        return node

    if max(left.order, right.order) < 3 and left.center != right.center:
        combined = barycentric_combine(left.model, right.model, left.center, right.center)
        e_combined = max_error(V, combined)
        if e_combined <= precision:
            node.model = combined
            node.error = e_combined
            node.left = node.right = None
            node.outcome = AggregationOutcome.COMBINED
            logger.debug(f"Raised to order {combined.order} over {V.card} points (error {e_combined:.3f})")
            return node

    if least_squares:
        fitted = fit_poly_lsq(V, min(max(left.order, right.order) + 1, 3))
        e_fitted = max_error(V, fitted)
        if not fitted.degenerate and e_fitted <= precision:
            node.model = fitted
            node.error = e_fitted
            node.left = node.right = None
            node.outcome = AggregationOutcome.FITTED
            logger.debug(f"Fitted order {fitted.order} over {V.card} points (error {e_fitted:.3f})")
            return node

    node.unmergeable = True
    node.outcome = AggregationOutcome.SPLIT
    return node


def decompose(img: MultiImage, precision: float, min_card: int = 8,
              least_squares: bool = True) -> DecompTree:
    """
    Piecewise regular decomposition of the whole image.

    Args:
        img: Source image
        precision: L∞ error bound, in levels
        min_card: Sets smaller than this become leaves regardless of error
        least_squares: Also try a direct higher-order fit when aggregating

    Returns:
        DecompTree whose leaves tile the image
    """
    if precision < 0:
        raise ValueError(f"Precision must be non-negative, got {precision}")
    if min_card < 6:
        raise ValueError(f"min_card must be at least 6, got {min_card}")

    root = _make_node(full_sample_set(img), depth=0)
    stack: List[Tuple[DecompNode, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if not expanded:
            if node.error <= precision or node.card < min_card:
                continue
            hist = build_histogram(node.samples, node.model)
            errors = point_errors(node.samples, node.model)
            VS = singular_set(node.samples, errors, hist.threshold, hist.modality)
            V_minus, V_plus = split_set(node.samples, fit_split_line(VS))
            node.left = _make_node(V_minus, node.depth + 1)
            node.right = _make_node(V_plus, node.depth + 1)
            stack.append((node, True))
            stack.append((node.right, False))
            stack.append((node.left, False))
        else:
            try_aggregate(node, precision, least_squares)

    tree = DecompTree(img, root, precision, min_card)
    stats = tree.stats()
    logger.info(f"Decomposed {img.width}x{img.height} image: {stats.leaf_count} leaves, "
                f"max error {stats.max_error:.3f}, orders {stats.order_histogram}")
    return tree


def tree_to_record(tree: DecompTree, label_map: str = "labels.pgm") -> TreeRecord:
    parents = tree.parents()
    nodes = []
    for node in tree.nodes():
        nodes.append(TreeNodeRecord(
            id=node.node_id,
            parent=parents.get(node.node_id),
            depth=node.depth,
            order=node.order,
            card=node.card,
            center=[float(node.center[0]), float(node.center[1])],
            band_means=[float(v) for v in node.band_means],
            coefficients=[[float(c) for c in row] for row in node.model.coeffs],
            error=float(node.error),
            children=[c.node_id for c in node.children],
            unmergeable=node.unmergeable,
            outcome=node.outcome,
            degenerate=node.model.degenerate,
        ))
    return TreeRecord(
        width=tree.image.width,
        height=tree.image.height,
        bands=tree.image.bands,
        depth=tree.image.depth,
        precision=tree.precision,
        min_card=tree.min_card,
        label_map=label_map,
        nodes=nodes,
    )


def tree_from_record(record: TreeRecord, labels: np.ndarray,
                     img: Optional[MultiImage] = None) -> DecompTree:
    """
    Rebuild a decomposition from its JSON record and leaf label map.

    Without the source image a blank placeholder of the recorded shape is
    used; geometry and models are restored exactly.
    """
    if img is None:
        img = MultiImage.blank(record.width, record.height, record.bands, record.depth)
    if labels.shape != (record.height, record.width):
        raise DimensionMismatchError(f"Label map shape {labels.shape} does not match tree {record.height}x{record.width}")
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    ids, starts = np.unique(flat[order], return_index=True)
    pixel_lists = dict(zip(ids.tolist(), np.split(order, starts[1:])))

    by_id = {n.id: n for n in record.nodes}
    built: Dict[int, DecompNode] = {}
    for rec in sorted(record.nodes, key=lambda n: -n.id):
        if rec.children:
            left, right = built[rec.children[0]], built[rec.children[1]]
            indices = np.sort(np.concatenate([left.samples.indices, right.samples.indices]))
        else:
            left = right = None
            if rec.id not in pixel_lists:
                raise UnknownCodeError(f"Leaf {rec.id} has no pixels in the label map")
            indices = np.sort(pixel_lists[rec.id])
        model = PolyModel(np.array(rec.coefficients), order=rec.order, degenerate=rec.degenerate)
        built[rec.id] = DecompNode(
            SampleSet(img, indices), model, rec.error, (rec.center[0], rec.center[1]),
            np.array(rec.band_means), depth=rec.depth, left=left, right=right,
            node_id=rec.id, unmergeable=rec.unmergeable, outcome=rec.outcome)
    root_ids = [n.id for n in record.nodes if n.parent is None]
    if len(root_ids) != 1 or not by_id:
        raise FormatVersionError("Tree record must have exactly one root")
    return DecompTree(img, built[root_ids[0]], record.precision, record.min_card)
