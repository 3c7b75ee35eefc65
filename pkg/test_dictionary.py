"""
Tests for the Visual Alphabet and Dictionary
--------------------------------------------
Quantization trees, Hausdorff search, descriptor normalization, domain masks
and the alphabet/dictionary built from a grouped decomposition.
"""

import numpy as np
import pytest

from viseme.core.errors import (
    DimensionMismatchError,
    EmptyTreeError,
    FormatVersionError,
    InvalidDescriptorError,
    UnknownCodeError,
)
from viseme.dictionary import (
    BELOW_ONE,
    Alphabet,
    Dictionary,
    QuantTree,
    _common_prefix,
    build_alphabet,
    build_dictionary,
    deinterleave,
    domain_mask,
    hausdorff_distance,
    interleave,
    mask_grid,
    normalize_descriptor,
    quantize,
    read_tree,
    record_digest,
    write_tree,
)
from viseme.domain import DomainDescriptor, domain_descriptor, own_frame
from viseme.grouping import group, label_node
from viseme.image import MultiImage
from viseme.segmenter import decompose


def two_blocks():
    ys, xs = np.mgrid[0:32, 0:32]
    return group(decompose(MultiImage(40 + xs + 2 * ys + 100 * (xs >= 16)), precision=2.0, min_card=8))


def ramps():
    ys, xs = np.mgrid[0:48, 0:48]
    return group(decompose(MultiImage(np.where(xs < 24, 10 + xs + ys, 200 - xs - ys)), precision=2.0))


def brute_distance(tree: QuantTree, v, r_prime: int) -> float:
    query = tree.code_of(v)
    best = max(min(_common_prefix(query, c, tree.depth), tree.k * r_prime) // tree.k for c in tree.cells())
    return 2.0 ** -best


def test_single_insert_path():
    tree = QuantTree(2, 1)
    code = tree.insert((0.75, 0.75))
    assert code == 0b11
    assert tree.cell_count() == 1
    assert tree.node_count() == 5
    assert tree.membership((0.9, 0.6))
    assert not tree.membership((0.1, 0.6))


def test_full_siblings_collapse():
    tree = QuantTree(2, 1)
    for v in ((0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)):
        tree.insert(v)
    assert tree.node_count() == 1
    assert tree.cell_count() == 4
    assert len(tree) == 4


def test_labels_block_merging():
    tree = QuantTree(2, 1)
    tree.insert((0.25, 0.25), label="a")
    for v in ((0.25, 0.75), (0.75, 0.25), (0.75, 0.75)):
        tree.insert(v)
    assert tree.cell_count() == 4
    assert tree.node_count() == 5
    assert tree.recognize((0.3, 0.2)) == ["a"]


def test_reinsert_counts_without_growing():
    tree = QuantTree(3, 4)
    v = (0.1, 0.5, 0.9)
    code = tree.insert(v)
    nodes = tree.node_count()
    tree.insert(v)
    assert tree.node_count() == nodes
    assert tree.counts[code] == 2


def test_random_membership():
    rng = np.random.default_rng(7)
    tree = QuantTree(5, 4)
    points = rng.uniform(0.0, 1.0, size=(1000, 5))
    for p in points:
        tree.insert(p)
    assert all(tree.membership(p) for p in points)
    assert tree.cell_count() == len({quantize(p, 4) for p in points})


def test_rejects_bad_vectors():
    tree = QuantTree(2, 3)
    with pytest.raises(DimensionMismatchError):
        tree.insert((0.5,))
    with pytest.raises(InvalidDescriptorError):
        tree.insert((0.5, 1.0))


def test_empty_tree_queries():
    tree = QuantTree(2, 3)
    assert tree.is_empty()
    assert not tree.membership((0.5, 0.5))
    with pytest.raises(EmptyTreeError):
        tree.nearest((0.5, 0.5))
    with pytest.raises(EmptyTreeError):
        tree.self_sort()


def test_interleave_inverse():
    for code in range(1 << 9):
        assert interleave(deinterleave(code, 3, 3), 3, 3) == code


def test_hausdorff_distance():
    assert hausdorff_distance((0.3, 0.3), (0.3, 0.3), 5) == 2.0 ** -5
    assert hausdorff_distance((0.1,), (0.9,), 4) == 1.0
    assert hausdorff_distance((0.1, 0.1), (0.2, 0.2), 4) == 0.25
    with pytest.raises(DimensionMismatchError):
        hausdorff_distance((0.1,), (0.1, 0.2), 4)


def test_hausdorff_matches_cell_inclusion():
    rng = np.random.default_rng(9)
    for _ in range(200):
        u, v = rng.uniform(0, 1, size=(2, 3))
        q = max(q for q in range(5) if quantize(u, q) == quantize(v, q))
        assert hausdorff_distance(u, v, 4) == 2.0 ** -q


@pytest.mark.parametrize("r_prime", [4, 2])
def test_nearest_matches_exhaustive_scan(r_prime):
    rng = np.random.default_rng(13)
    tree = QuantTree(2, 4)
    for p in rng.uniform(0.0, 1.0, size=(40, 2)):
        tree.insert(p)
    for query in rng.uniform(0.0, 1.0, size=(50, 2)):
        code, dist = tree.nearest(query, r_prime)
        assert dist == brute_distance(tree, query, r_prime)
        assert tree.contains_code(code)


def test_nearest_single_entry():
    tree = QuantTree(3, 4)
    code = tree.insert((0.2, 0.4, 0.6))
    assert tree.nearest((0.9, 0.1, 0.3)) == (code, 1.0)
    assert tree.nearest((0.2, 0.4, 0.6)) == (code, 2.0 ** -4)


def test_rank_by_similarity_starts_with_nearest():
    rng = np.random.default_rng(21)
    tree = QuantTree(2, 3)
    for p in rng.uniform(0.0, 1.0, size=(10, 2)):
        tree.insert(p)
    query = (0.4, 0.6)
    ranked = tree.rank_by_similarity(query)
    assert len(ranked) == tree.cell_count()
    assert ranked[0][1] == tree.nearest(query)[1]
    assert [d for _, d in ranked] == sorted(d for _, d in ranked)


def test_self_sort_walks_adjacent_cells():
    tree = QuantTree(3, 1)
    for code in range(8):
        tree.insert_code(code)
    order = tree.self_sort()
    assert sorted(order) == list(range(8))
    for a, b in zip(order, order[1:]):
        ca, cb = deinterleave(a, 3, 1), deinterleave(b, 3, 1)
        assert sum(abs(p - q) for p, q in zip(ca, cb)) == 1


def test_tree_file_round_trip(tmp_path):
    rng = np.random.default_rng(17)
    tree = QuantTree(3, 4)
    for n, p in enumerate(rng.uniform(0.0, 1.0, size=(30, 3))):
        tree.insert(p, label="odd" if n % 2 else None)
    path = tmp_path / "tree.vqt"
    write_tree(tree, path)
    loaded = read_tree(path)
    assert loaded.cells() == tree.cells()
    assert loaded.node_count() == tree.node_count()
    assert loaded.counts == tree.counts
    assert loaded.labels == tree.labels
    assert loaded.to_bytes() == tree.to_bytes()


def test_tree_stream_rejects_garbage():
    with pytest.raises(FormatVersionError):
        QuantTree.from_bytes(b"NOPE" + bytes(12))
    with pytest.raises(FormatVersionError):
        QuantTree.from_bytes(QuantTree(2, 2).to_bytes()[:10])


def test_normalize_domain_descriptor():
    d = DomainDescriptor(0.0, 0.0, 0.0, 1.0, 10, 1.0, (0.0, 5.0, -5.0, 0.0))
    assert normalize_descriptor(d) == [BELOW_ONE, 0.5, BELOW_ONE, 0.0, 0.5]
    assert normalize_descriptor(d, profile="convex-hull") == [BELOW_ONE, 0.5, 0.5]
    assert normalize_descriptor(d, clamp=10.0)[1:3] == [0.5, 0.75]


def test_normalize_rejects_non_finite():
    d = DomainDescriptor(0.0, 0.0, 0.0, 1.0, 10, float("nan"), (0.0, 0.0, 0.0, 0.0))
    with pytest.raises(InvalidDescriptorError):
        normalize_descriptor(d)


def test_domain_mask_covers_pixels():
    ys, xs = np.mgrid[3:9, 5:20]
    xs, ys = xs.ravel(), ys.ravel()
    d = domain_descriptor(xs, ys)
    mask = domain_mask(xs, ys, d, bits=5)
    grid = mask_grid(mask)
    u1, u2 = own_frame(d, xs, ys)
    side = 1 << 5
    length = max(d.length, 0.5)
    i1 = np.floor((u1 / length + 4.0) / 8.0 * side).astype(int)
    i2 = np.floor((u2 / length + 4.0) / 8.0 * side).astype(int)
    assert grid[i1, i2].all()
    assert not grid.all()


def test_repeated_shape_is_one_letter():
    grouping = two_blocks()
    alphabet, letters = build_alphabet(grouping, r=4)
    assert len(alphabet) == 1
    code = next(iter(alphabet.entries))
    assert alphabet[code].count == 2
    assert set(letters.values()) == {code}
    assert alphabet[code].mask is not None


def test_alphabet_grows_with_precision():
    grouping = ramps()
    coarse, _ = build_alphabet(grouping, r=2)
    fine, _ = build_alphabet(grouping, r=6)
    assert len(coarse) <= len(fine)


def test_alphabet_record_round_trip():
    alphabet, _ = build_alphabet(ramps(), r=4)
    record = alphabet.to_record()
    restored = Alphabet.from_record(record)
    assert record_digest(restored.to_record()) == record_digest(record)
    assert restored.domain_tree.cells() == alphabet.domain_tree.cells()
    assert sorted(restored.sorted_codes()) == sorted(alphabet.entries)


def test_unknown_letter():
    alphabet = Alphabet(bands=1)
    with pytest.raises(UnknownCodeError):
        alphabet["00000.00000"]


def test_dictionary_words_and_synonyms():
    grouping = two_blocks()
    tree = grouping.tree
    label_node(grouping, tree.leaves()[0].node_id, "block")
    label_node(grouping, tree.root.node_id, "block")
    alphabet, letters = build_alphabet(grouping)
    dictionary = build_dictionary(grouping, alphabet, letters)
    letter = next(iter(alphabet.entries))
    pair = Dictionary.word_key([letter, letter])
    assert sorted(dictionary.words) == sorted([letter, pair])
    assert dictionary[letter].count == 2
    assert dictionary[pair].count == 1
    assert dictionary.node_words[tree.root.node_id] == pair
    assert dictionary.synonyms() == {"block": sorted([letter, pair])}
    assert dictionary.alphabet_digest == alphabet.digest()

    restored = Dictionary.from_record(dictionary.to_record())
    assert restored.to_record() == dictionary.to_record()


def test_dictionary_needs_letters():
    grouping = two_blocks()
    alphabet, _ = build_alphabet(grouping)
    with pytest.raises(UnknownCodeError):
        build_dictionary(grouping, alphabet, {})
    assert len(build_dictionary(grouping, alphabet, {}, skip_uncoded=True)) == 0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
