"""
Tests for Perceptual Grouping
-----------------------------
Moment aggregation, rendering combination, labels and feature series.
"""

import numpy as np
import pytest

from viseme.core.errors import UnknownCodeError
from viseme.domain import raw_moments
from viseme.grouping import (
    aggregate_domain,
    describe_nodes,
    feature_series,
    group,
    label_node,
    leaf_majority,
    majority_label,
)
from viseme.image import MultiImage, full_sample_set
from viseme.segmenter import DecompTree, _make_node, decompose


def two_blocks():
    ys, xs = np.mgrid[0:32, 0:32]
    return decompose(MultiImage(40 + xs + 2 * ys + 100 * (xs >= 16)), precision=2.0, min_card=8)


def ramps():
    ys, xs = np.mgrid[0:48, 0:48]
    return decompose(MultiImage(np.where(xs < 24, 10 + xs + ys, 200 - xs - ys)), precision=2.0)


def test_domain_moments_sum_to_root():
    tree = ramps()
    grouping = aggregate_domain(tree)
    img = tree.image
    root = full_sample_set(img)
    assert grouping[tree.root.node_id].raw == raw_moments(root.xs, root.ys)
    for node in tree.nodes():
        if not node.is_leaf:
            shape = grouping[node.node_id]
            assert shape.raw == grouping[node.left.node_id].raw + grouping[node.right.node_id].raw
            assert sorted(shape.leaf_ids) == sorted(grouping[node.left.node_id].leaf_ids
                                                    + grouping[node.right.node_id].leaf_ids)


def test_every_node_gets_a_rendering():
    tree = ramps()
    grouping = group(tree)
    for node in tree.nodes():
        shape = grouping[node.node_id]
        assert shape.rendering is not None
        assert len(shape.rendering.bands) == tree.image.bands
        if node.is_leaf:
            assert np.array_equal(shape.model.coeffs, node.model.coeffs)
    assert len(grouping.leaves()) == len(tree.leaves())
    assert all(not s.is_leaf for s in grouping.compounds())


def test_coincident_centers_copy_larger_child():
    ys, xs = np.mgrid[0:9, 0:9]
    inner = (abs(xs - 4) <= 1) & (abs(ys - 4) <= 1)
    img = MultiImage(np.where(inner, 200, 10))
    V = full_sample_set(img)
    root = _make_node(V, 0)
    root.left = _make_node(V.subset(inner.ravel()), 1)
    root.right = _make_node(V.subset(~inner.ravel()), 1)
    tree = DecompTree(img, root, 2.0, 8)
    grouping = group(tree)
    shape = grouping[tree.root.node_id]
    assert shape.coincident
    assert np.array_equal(shape.model.coeffs, root.right.model.coeffs)


def test_feature_series_runs_to_root():
    tree = two_blocks()
    grouping = group(tree)
    leaf = tree.leaves()[0]
    label_node(grouping, tree.root.node_id, "block")
    series = feature_series(grouping, leaf.node_id)
    assert len(series) == leaf.depth + 1
    assert series.label == "block"
    assert np.array_equal(series.vectors[0], grouping[leaf.node_id].invariant_vector())


def test_nearest_label_wins():
    tree = two_blocks()
    grouping = group(tree)
    leaf = tree.leaves()[1]
    label_node(grouping, tree.root.node_id, "scene")
    label_node(grouping, leaf.node_id, "right")
    assert feature_series(grouping, leaf.node_id).label == "right"


def test_feature_series_needs_a_leaf():
    grouping = group(two_blocks())
    with pytest.raises(UnknownCodeError):
        feature_series(grouping, grouping.tree.root.node_id)
    with pytest.raises(UnknownCodeError):
        label_node(grouping, 999, "missing")


def test_majority_label():
    assert majority_label(["a", "b", "b", None]) == "b"
    assert majority_label(["b", "a"]) == "a"
    assert majority_label([None, None]) is None


def test_leaf_majority_over_path():
    tree = two_blocks()
    grouping = group(tree)
    left, right = (leaf.node_id for leaf in tree.leaves())
    label_node(grouping, tree.root.node_id, "scene")
    label_node(grouping, left, "left")
    assert leaf_majority(grouping, left) == "left"
    assert leaf_majority(grouping, right) == "scene"


def test_describe_nodes():
    tree = two_blocks()
    grouping = group(tree)
    records = describe_nodes(grouping, with_series=True)
    assert [r.id for r in records] == [n.node_id for n in tree.nodes()]
    for record in records:
        assert 0.0 <= record.domain.eccentricity <= 1.0
        assert (record.series is not None) == (len(record.leaves) == 1)
    compounds = describe_nodes(grouping, compounds_only=True)
    assert [r.id for r in compounds] == [tree.root.node_id]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
