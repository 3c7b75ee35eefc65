"""
Tests for the Sentence Coder
----------------------------
Encoding images into sentences, synthesis back from sentences, the binary
and JSON sentence files and the round-trip report.
"""

import numpy as np
import pytest

from viseme.coder import (
    codec_report,
    decode,
    encode,
    fill_holes,
    interior_mask,
    median_labels,
    read_sentence,
    sentence_from_bytes,
    sentence_to_bytes,
    synthesize,
    synthesize_partition,
    write_sentence,
)
from viseme.core.config import RunConfig
from viseme.core.errors import FormatVersionError, UnknownCodeError
from viseme.image import MultiImage
from viseme.models.schemas import Sentence, WordKind


def two_blocks() -> MultiImage:
    ys, xs = np.mgrid[0:32, 0:32]
    return MultiImage(40 + xs + 2 * ys + 100 * (xs >= 16))


def flat() -> MultiImage:
    return MultiImage(np.full((16, 16), 77))


def test_constant_image_round_trip():
    img = flat()
    result = encode(img)
    assert len(result.sentence.words) == 1
    decoded, labels = synthesize(result.sentence, result.alphabet)
    assert np.array_equal(decoded.samples, img.samples)
    assert (labels == 0).all()
    report = codec_report(img, decoded, result)
    assert report.max_error == 0.0
    assert report.psnr is None


def test_two_blocks_round_trip():
    img = two_blocks()
    result = encode(img, RunConfig(precision=2.0, min_card=8))
    words = result.sentence.words
    assert len(words) == 2
    assert words[0].pose.x < words[1].pose.x
    assert all(w.kind is WordKind.LEAF for w in words)
    assert len(result.alphabet) == 1
    decoded, labels = synthesize(result.sentence, result.alphabet)
    assert (labels >= 0).all()
    report = codec_report(img, decoded, result)
    assert report.words == report.leaves == 2
    assert report.interior_max_error <= 3.0


def test_compound_words_on_request():
    result = encode(two_blocks(), RunConfig(include_compounds=True))
    kinds = [w.kind for w in result.sentence.words]
    assert kinds.count(WordKind.COMPOUND) == 1
    assert kinds.count(WordKind.LEAF) == 2
    decoded, _ = synthesize(result.sentence, result.alphabet)
    assert decoded.shape == (32, 32, 1)


def test_encoding_is_deterministic():
    a = encode(two_blocks()).sentence
    b = encode(two_blocks()).sentence
    assert a.model_dump_json() == b.model_dump_json()


def test_partition_synthesis_is_exact():
    img = two_blocks()
    exact = synthesize_partition(encode(img).tree)
    assert np.array_equal(exact.samples, img.samples)


def test_decode_checks_alphabet():
    result = encode(two_blocks())
    record = result.alphabet.to_record()
    decoded, _ = decode(result.sentence, record)
    expected, _ = synthesize(result.sentence, result.alphabet)
    assert np.array_equal(decoded.samples, expected.samples)

    other = encode(flat()).alphabet.to_record()
    with pytest.raises(FormatVersionError):
        decode(result.sentence, other)


def test_letter_without_mask():
    result = encode(flat())
    for entry in result.alphabet.entries.values():
        entry.mask = None
    with pytest.raises(UnknownCodeError):
        synthesize(result.sentence, result.alphabet)


def test_empty_sentence_is_blank():
    sentence = encode(flat()).sentence
    empty = Sentence(header=sentence.header, words=[])
    img, labels = synthesize(empty, encode(flat()).alphabet)
    assert img.shape == (16, 16, 1)
    assert (img.samples == 0).all()
    assert (labels == -1).all()


def test_binary_sentence(tmp_path):
    sentence = encode(two_blocks(), RunConfig(include_compounds=True)).sentence
    loaded = sentence_from_bytes(sentence_to_bytes(sentence))
    assert loaded.header == sentence.header
    assert [(w.code, w.kind, w.node) for w in loaded.words] == [(w.code, w.kind, w.node) for w in sentence.words]
    for a, b in zip(loaded.words, sentence.words):
        assert a.pose.x == pytest.approx(b.pose.x, rel=1e-6)
        assert a.pose.area == b.pose.area
        assert a.pose.bands[0].z_bar == pytest.approx(b.pose.bands[0].z_bar, rel=1e-6)

    path = write_sentence(sentence, tmp_path / "sentence.vsn", binary=True)
    assert read_sentence(path).header == sentence.header
    with pytest.raises(FormatVersionError):
        sentence_from_bytes(sentence_to_bytes(sentence)[:30])


def test_json_sentence(tmp_path):
    sentence = encode(two_blocks()).sentence
    path = write_sentence(sentence, tmp_path / "sentence.json")
    assert read_sentence(path) == sentence


def test_fill_holes_lower_median():
    labels = np.array([[1, 1, 1], [1, -1, 2], [2, 2, 2]])
    assert fill_holes(labels)[1, 1] == 1


def test_fill_holes_spreads_from_one_seed():
    labels = np.full((5, 5), -1)
    labels[0, 0] = 3
    assert (fill_holes(labels) == 3).all()
    assert (fill_holes(np.full((3, 3), -1)) == -1).all()


def test_median_removes_isolated_label():
    labels = np.zeros((5, 5), dtype=np.int64)
    labels[2, 2] = 7
    assert (median_labels(labels) == 0).all()


def test_interior_mask():
    labels = np.zeros((10, 10), dtype=np.int64)
    labels[:, 5:] = 1
    inside = interior_mask(labels)
    assert inside[0, 0] and inside[5, 2] and inside[5, 7]
    assert not inside[5, 3] and not inside[5, 4] and not inside[5, 5]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
