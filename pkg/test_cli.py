"""
Tests for the Command Line
--------------------------
Runs the subcommands end to end through main() and checks the files they
write and the exit codes they return.
"""

import json

import numpy as np
import pytest

from viseme.core.config import RunConfig
from viseme.image import MultiImage, load_image, save_image
from viseme.main import main


@pytest.fixture
def blocks_image(tmp_path):
    ys, xs = np.mgrid[0:32, 0:32]
    return save_image(MultiImage(40 + xs + 2 * ys + 100 * (xs >= 16)), tmp_path / "blocks.pgm")


@pytest.fixture
def segmented(tmp_path, blocks_image):
    out = tmp_path / "seg"
    assert main(["segment", str(blocks_image), "--out", str(out)]) == 0
    return out


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_segment_outputs(segmented):
    stats = read_json(segmented / "stats.json")
    assert stats["leaf_count"] == 2
    assert stats["max_error"] <= 2.0
    assert (segmented / "labels.pgm").is_file()
    assert read_json(segmented / "tree.json")["format"] == "viseme-tree/1"
    assert RunConfig.from_file(segmented / "config.txt").precision == 2.0


def test_describe_and_group(tmp_path, segmented, blocks_image):
    tree = str(segmented / "tree.json")
    out = tmp_path / "desc"
    assert main(["describe", tree, "--image", str(blocks_image), "--series", "--out", str(out)]) == 0
    nodes = read_json(out / "descriptors.json")["nodes"]
    assert len(nodes) == 3
    assert all(0.0 <= n["domain"]["eccentricity"] <= 1.0 for n in nodes)

    assert main(["group", tree, "--label", "0=blocks", "--out", str(out)]) == 0
    groups = read_json(out / "groups.json")["nodes"]
    assert [g["id"] for g in groups] == [0]
    assert groups[0]["label"] == "blocks"


def test_dict_writes_codebooks(tmp_path, segmented, blocks_image):
    out = tmp_path / "dict"
    args = ["dict", str(segmented / "tree.json"), "--image", str(blocks_image), "--out", str(out)]
    assert main(args + ["--label", "1=left"]) == 0
    alphabet = read_json(out / "alphabet.json")
    dictionary = read_json(out / "dictionary.json")
    assert len(alphabet["entries"]) == 1
    assert alphabet["entries"][0]["count"] == 2
    assert len(dictionary["words"]) == 2
    assert (out / "domain.vqt").read_bytes()[:4] == b"VQT1"

    enriched = tmp_path / "enriched"
    assert main(args[:-1] + [str(enriched), "--alphabet", str(out / "alphabet.json"),
                             "--dictionary", str(out / "dictionary.json")]) == 0
    assert read_json(enriched / "alphabet.json")["entries"][0]["count"] == 4


def test_bad_label_is_a_usage_error(segmented):
    assert main(["group", str(segmented / "tree.json"), "--label", "root=x"]) == 2


def test_encode_decode(tmp_path, blocks_image):
    out = tmp_path / "enc"
    assert main(["encode", str(blocks_image), "--partition", "--out", str(out)]) == 0
    report = read_json(out / "report.json")
    assert report["words"] == 2
    assert report["interior_max_error"] <= 3.0
    assert np.array_equal(load_image(out / "partition.pgm").samples, load_image(blocks_image).samples)

    decoded = tmp_path / "decoded.pgm"
    assert main(["decode", str(out / "sentence.json"), "--alphabet", str(out / "alphabet.json"),
                 "--output", str(decoded), "--out", str(tmp_path / "dec")]) == 0
    assert np.array_equal(load_image(decoded).samples, load_image(out / "decoded.pgm").samples)


def test_encoding_output_is_reproducible(tmp_path, blocks_image):
    for name in ("first", "second"):
        assert main(["encode", str(blocks_image), "--out", str(tmp_path / name)]) == 0
    for name in ("sentence.json", "alphabet.json", "dictionary.json", "domain.vqt", "report.json", "decoded.pgm"):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_binary_sentence_decodes(tmp_path, blocks_image):
    out = tmp_path / "bin"
    assert main(["encode", str(blocks_image), "--binary", "--out", str(out)]) == 0
    assert (out / "sentence.vsn").read_bytes()[:4] == b"VSN1"
    assert main(["decode", str(out / "sentence.vsn"), "--alphabet", str(out / "alphabet.json"),
                 "--out", str(out)]) == 0


def test_decode_with_foreign_alphabet(tmp_path, blocks_image):
    flat = save_image(MultiImage(np.full((8, 8), 5)), tmp_path / "flat.pgm")
    assert main(["encode", str(blocks_image), "--out", str(tmp_path / "a")]) == 0
    assert main(["encode", str(flat), "--out", str(tmp_path / "b")]) == 0
    assert main(["decode", str(tmp_path / "a" / "sentence.json"),
                 "--alphabet", str(tmp_path / "b" / "alphabet.json"), "--out", str(tmp_path)]) == 1


def test_missing_input(tmp_path):
    assert main(["segment", str(tmp_path / "missing.pgm"), "--out", str(tmp_path)]) == 2


def test_malformed_image(tmp_path):
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    assert main(["segment", str(bad), "--out", str(tmp_path)]) == 2


def test_unknown_subcommand_and_plot_kind():
    assert main(["frobnicate"]) == 2
    assert main(["plot", "spiral"]) == 2


def test_config_file_and_flag_precedence(tmp_path, blocks_image):
    config = tmp_path / "run.txt"
    config.write_text("precision=5.0\nmin_card=10\n", encoding="utf-8")
    out = tmp_path / "cfg"
    assert main(["segment", str(blocks_image), "--config", str(config), "--precision", "3", "--out", str(out)]) == 0
    written = RunConfig.from_file(out / "config.txt")
    assert written.precision == 3.0
    assert written.min_card == 10


def test_invalid_config_value(tmp_path, blocks_image):
    config = tmp_path / "run.txt"
    config.write_text("precision=-1\n", encoding="utf-8")
    assert main(["segment", str(blocks_image), "--config", str(config), "--out", str(tmp_path)]) == 2


def test_config_file_round_trip(tmp_path):
    config = RunConfig(precision=1.5, profile="convex-hull", include_compounds=True, out=str(tmp_path))
    assert RunConfig.from_file(config.to_file(tmp_path / "config.txt")) == config


def test_plot_hilbert_curve(tmp_path):
    path = tmp_path / "curve.svg"
    assert main(["plot", "hilbert-curve", "--order", "3", "--output", str(path), "--out", str(tmp_path)]) == 0
    svg = path.read_text(encoding="utf-8")
    points = svg.split('points="', 1)[1].split('"', 1)[0].split()
    assert len(points) == 64


def test_plot_point_tour(tmp_path):
    points = tmp_path / "points.txt"
    points.write_text("# quadrant centers\n0.75 0.25\n0.25 0.75\n0.25 0.25\n0.75 0.75\n", encoding="utf-8")
    assert main(["plot", "point-tour", str(points), "--order", "1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "tour.svg").is_file()
    assert main(["plot", "point-tour", "--out", str(tmp_path)]) == 2


def test_plot_segmentation(tmp_path, segmented, blocks_image):
    tree = str(segmented / "tree.json")
    assert main(["plot", "label-map", tree, "--out", str(tmp_path)]) == 0
    assert load_image(tmp_path / "label-map.ppm").shape == (32, 32, 3)
    assert main(["plot", "segmentation-overlay", tree, "--image", str(blocks_image), "--out", str(tmp_path)]) == 0
    assert load_image(tmp_path / "segmentation-overlay.ppm").shape == (32, 32, 3)


def test_selftest(tmp_path):
    assert main(["selftest", "--out", str(tmp_path)]) == 0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
