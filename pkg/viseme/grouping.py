"""
Perceptual Grouping
-------------------
Bottom-up aggregation of raw attributes along the decomposition tree. Each
internal node becomes a compound shape whose moments are the sums of its
children's moments and whose rendering model is the barycentric combination
of its children's models truncated at degree 3.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import numpy as np

from .core.errors import CoincidentCentersError, UnknownCodeError
from .core.polynomial import PolyModel
from .core.utils import parallel_map
from .domain import DomainDescriptor, RawMoments, descriptor_from_moments, raw_moments
from .models.schemas import BandRenderingRecord, DomainRecord, NodeDescriptorRecord
from .rendering import BandRendering, RenderingDescriptor, rendering_descriptor
from .segmenter import DecompNode, DecompTree, barycentric_combine

logger = logging.getLogger(__name__)


@dataclass
class CompoundShape:
    node_id: int
    depth: int
    leaf_ids: List[int]
    raw: RawMoments
    domain: DomainDescriptor
    model: Optional[PolyModel] = None
    rendering: Optional[RenderingDescriptor] = None
    label: Optional[str] = None
    coincident: bool = False

    @property
    def is_leaf(self) -> bool:
        return self.leaf_ids == [self.node_id]

    def invariant_vector(self) -> np.ndarray:
        parts = [self.domain.invariant_vector()]
        if self.rendering is not None:
            parts.extend(b.invariant_vector() for b in self.rendering.bands)
        return np.concatenate(parts)


@dataclass
class FeatureSeries:
    leaf_id: int
    vectors: List[np.ndarray]
    label: Optional[str] = None

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass
class Grouping:
    """Compound shapes of every node, keyed by node id."""
    tree: DecompTree
    shapes: Dict[int, CompoundShape] = field(default_factory=dict)

    def __getitem__(self, node_id: int) -> CompoundShape:
        try:
            return self.shapes[node_id]
        except KeyError:
            raise UnknownCodeError(f"Unknown node id {node_id}")

    def leaves(self) -> List[CompoundShape]:
        return [self.shapes[n.node_id] for n in self.tree.leaves()]

    def compounds(self) -> List[CompoundShape]:
        return [s for s in self.shapes.values() if not s.is_leaf]


def _postorder(tree: DecompTree) -> List[DecompNode]:
    return list(reversed(list(tree.nodes())))


def aggregate_domain(tree: DecompTree) -> Grouping:
    """
    One bottom-up pass summing raw moments; each node is centered,
    normalized and scaled only after the summation.
    """
    grouping = Grouping(tree)
    leaves = tree.leaves()
    raws = parallel_map(lambda n: raw_moments(n.samples.xs, n.samples.ys), leaves)
    sums: Dict[int, RawMoments] = {leaf.node_id: raw for leaf, raw in zip(leaves, raws)}
    members: Dict[int, List[int]] = {leaf.node_id: [leaf.node_id] for leaf in leaves}
    for node in _postorder(tree):
        if not node.is_leaf:
            sums[node.node_id] = sums[node.left.node_id] + sums[node.right.node_id]
            members[node.node_id] = members[node.left.node_id] + members[node.right.node_id]
    for node in tree.nodes():
        grouping.shapes[node.node_id] = CompoundShape(
            node_id=node.node_id,
            depth=node.depth,
            leaf_ids=members[node.node_id],
            raw=sums[node.node_id],
            domain=descriptor_from_moments(sums[node.node_id]),
        )
    return grouping


def aggregate_rendering(tree: DecompTree, grouping: Optional[Grouping] = None) -> Grouping:
    """
    Combine sibling models up to the root without an order guard, truncating
    above degree 3, then derive the rendering descriptor of every node.
    """
    if grouping is None:
        grouping = aggregate_domain(tree)
    models: Dict[int, PolyModel] = {}
    for node in _postorder(tree):
        shape = grouping.shapes[node.node_id]
        if node.is_leaf:
            models[node.node_id] = node.model
            continue
        left, right = node.left, node.right
        try:
            models[node.node_id] = barycentric_combine(
                models[left.node_id], models[right.node_id], left.center, right.center)
        except CoincidentCentersError:
            larger = left if left.card >= right.card else right
            logger.warning(f"Coincident sibling centers under node {node.node_id}, copying child {larger.node_id}")
            models[node.node_id] = models[larger.node_id].copy()
            shape.coincident = True

    depth = tree.image.depth
    nodes = list(tree.nodes())
    descriptors = parallel_map(lambda n: rendering_descriptor(models[n.node_id], n.center, depth), nodes)
    for node, desc in zip(nodes, descriptors):
        shape = grouping.shapes[node.node_id]
        shape.model = models[node.node_id]
        shape.rendering = desc
    return grouping


def group(tree: DecompTree) -> Grouping:
    """Domain and rendering aggregation of the whole tree."""
    grouping = aggregate_rendering(tree, aggregate_domain(tree))
    logger.info(f"Grouped {len(grouping.shapes)} nodes ({len(grouping.compounds())} compounds)")
    return grouping


def label_node(grouping: Grouping, node_id: int, label: str) -> None:
    grouping[node_id].label = label


def feature_series(grouping: Grouping, leaf_id: int) -> FeatureSeries:
    """
    Invariant vectors from a leaf up to the root. The series carries the
    label of the nearest labelled node on that path.
    """
    tree = grouping.tree
    node = tree.node(leaf_id)
    if not node.is_leaf:
        raise UnknownCodeError(f"Node {leaf_id} is not a leaf")
    parents = tree.parents()
    vectors = []
    label = None
    current: Optional[int] = leaf_id
    while current is not None:
        shape = grouping[current]
        vectors.append(shape.invariant_vector())
        if label is None and shape.label is not None:
            label = shape.label
        current = parents.get(current)
    return FeatureSeries(leaf_id, vectors, label)


def majority_label(labels: Iterable[Optional[str]]) -> Optional[str]:
    """Most frequent label, ties resolved by name; None when nothing is labelled."""
    counts = Counter(label for label in labels if label is not None)
    if not counts:
        return None
    best = max(counts.values())
    return min(label for label, count in counts.items() if count == best)


def leaf_majority(grouping: Grouping, leaf_id: int) -> Optional[str]:
    """Majority label over the nodes on the path from a leaf to the root."""
    parents = grouping.tree.parents()
    labels = []
    current: Optional[int] = leaf_id
    while current is not None:
        labels.append(grouping[current].label)
        current = parents.get(current)
    return majority_label(labels)


def domain_record(d: DomainDescriptor) -> DomainRecord:
    return DomainRecord(
        x=d.x_g,
        y=d.y_g,
        angle=d.theta,
        scale=d.scale,
        surface=d.area,
        eccentricity=d.eccentricity,
        asymmetries=list(d.asymmetries),
        isotropic=d.isotropic,
        degenerate=d.degenerate,
    )


def band_record(b: BandRendering) -> BandRenderingRecord:
    return BandRenderingRecord(
        invariants=list(b.invariants),
        z_bar=b.z_bar,
        theta_xz=b.theta_xz,
        theta_yz=b.theta_yz,
        theta_xu=b.theta_xu,
        lambda_u=b.lambda_u,
        flat=b.flat,
    )


def describe_nodes(grouping: Grouping, compounds_only: bool = False,
                   with_series: bool = False) -> List[NodeDescriptorRecord]:
    """
    Descriptor records of every node in preorder, columns in attribute-table
    order. Leaves optionally carry their feature series up to the root.
    """
    records = []
    for node in grouping.tree.nodes():
        shape = grouping[node.node_id]
        if compounds_only and shape.is_leaf:
            continue
        record = NodeDescriptorRecord(
            id=shape.node_id,
            depth=shape.depth,
            leaves=list(shape.leaf_ids),
            domain=domain_record(shape.domain),
            rendering=[band_record(b) for b in shape.rendering.bands],
            label=shape.label,
        )
        if with_series and shape.is_leaf:
            series = feature_series(grouping, shape.node_id)
            record.series = [[float(v) for v in vec] for vec in series.vectors]
            record.series_label = series.label
        records.append(record)
    return records
