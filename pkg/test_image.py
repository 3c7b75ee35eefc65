"""
Tests for Image Core
--------------------
Netpbm parsing, raw sidecar images, Pillow fallback and sample-set views.
"""

import numpy as np
import pytest
from PIL import Image

from viseme.core.errors import ImageFormatError
from viseme.image import (
    MultiImage,
    SampleSet,
    full_sample_set,
    load_image,
    load_label_map,
    parse_netpbm,
    save_image,
    save_label_map,
)


def test_parse_p5_with_comment():
    data = b"P5\n# made by hand\n3 2\n255\n" + bytes([0, 1, 2, 3, 4, 5])
    samples, maxval = parse_netpbm(data)
    assert maxval == 255
    assert samples.shape == (1, 2, 3)
    assert samples[0, 1].tolist() == [3, 4, 5]


def test_parse_p6_band_order():
    data = b"P6 2 1 255\n" + bytes([10, 20, 30, 40, 50, 60])
    samples, _ = parse_netpbm(data)
    assert samples.shape == (3, 1, 2)
    assert samples[:, 0, 0].tolist() == [10, 20, 30]
    assert samples[:, 0, 1].tolist() == [40, 50, 60]


@pytest.mark.parametrize("data", [
    b"P2\n1 1\n255\n0",
    b"P5\n2 2\n255\n" + bytes([1, 2, 3]),
    b"P5\n1 1\n0\n" + bytes([0]),
    b"P5\n1 1\n100\n" + bytes([200]),
])
def test_parse_rejects_malformed(data):
    with pytest.raises(ImageFormatError):
        parse_netpbm(data)


def test_trailing_bytes_are_ignored():
    samples, _ = parse_netpbm(b"P5\n1 1\n255\n" + bytes([7, 99, 99]))
    assert samples.tolist() == [[[7]]]


def test_multi_image_validates_range():
    with pytest.raises(ImageFormatError):
        MultiImage(np.array([[0, 256]]), depth=256)
    img = MultiImage(np.array([[0, 255]]))
    assert img.shape == (2, 1, 1)
    assert not img.samples.flags.writeable


def test_pgm_and_ppm_save_load(tmp_path):
    rng = np.random.default_rng(3)
    gray = MultiImage(rng.integers(0, 256, size=(1, 5, 7)))
    color = MultiImage(rng.integers(0, 256, size=(3, 4, 6)))
    assert np.array_equal(load_image(save_image(gray, tmp_path / "g.pgm")).samples, gray.samples)
    assert np.array_equal(load_image(save_image(color, tmp_path / "c.ppm")).samples, color.samples)


def test_raw_multiband_sidecar(tmp_path):
    rng = np.random.default_rng(4)
    img = MultiImage(rng.integers(0, 16, size=(4, 3, 5)), depth=16)
    path = save_image(img, tmp_path / "multi.raw")
    assert (tmp_path / "multi.raw.hdr").read_text().split() == ["5", "3", "4", "16"]
    loaded = load_image(path)
    assert loaded.depth == 16
    assert np.array_equal(loaded.samples, img.samples)


def test_raw_without_sidecar(tmp_path):
    path = tmp_path / "orphan.raw"
    path.write_bytes(bytes(12))
    with pytest.raises(ImageFormatError):
        load_image(path)


def test_pillow_fallback(tmp_path):
    Image.new("L", (4, 3), color=42).save(tmp_path / "flat.png")
    img = load_image(tmp_path / "flat.png")
    assert img.shape == (4, 3, 1)
    assert img.depth == 256
    assert (img.samples == 42).all()


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.pgm")


def test_sample_set_coordinates():
    img = MultiImage(np.arange(12).reshape(1, 3, 4))
    V = SampleSet(img, np.array([1, 6, 11]))
    assert V.card == 3
    assert V.xs.tolist() == [1, 2, 3]
    assert V.ys.tolist() == [0, 1, 2]
    assert V.z[:, 0].tolist() == [1.0, 6.0, 11.0]
    assert V.subset(np.array([True, False, True])).indices.tolist() == [1, 11]
    assert full_sample_set(img).card == 12


def test_label_map_sixteen_bit(tmp_path):
    labels = np.array([[0, 300], [65535, 7]])
    loaded = load_label_map(save_label_map(labels, tmp_path / "labels.pgm"))
    assert np.array_equal(loaded, labels)


def test_label_map_rejects_ids_beyond_sixteen_bits(tmp_path):
    with pytest.raises(ImageFormatError):
        save_label_map(np.array([[0, 70000]]), tmp_path / "labels.pgm")
    assert not (tmp_path / "labels.pgm").exists()


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
