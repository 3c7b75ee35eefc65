import argparse
import logging
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..coder import (
    codec_report,
    decode,
    encode,
    read_sentence,
    synthesize,
    synthesize_partition,
    write_sentence,
)
from ..core.config import TREE_FORMAT, RunConfig
from ..core.errors import ConfigError, FormatVersionError
from ..core.utils import ensure_dir, read_record, write_record
from ..dictionary import (
    Alphabet,
    Dictionary,
    QuantTree,
    build_alphabet,
    build_dictionary,
    write_tree,
)
from ..grouping import Grouping, describe_nodes, group, label_node, leaf_majority
from ..hilbert import (
    hilbert_d2xy,
    hilbert_kd,
    order_points,
    random_tour_lengths,
    tour_length,
)
from ..image import MultiImage, load_image, load_label_map, save_image, save_label_map
from ..models.schemas import AlphabetRecord, DescriptorsRecord, DictionaryRecord, TreeRecord
from ..segmenter import DecompTree, decompose, tree_from_record, tree_to_record
from .plots import (
    hilbert_curve_svg,
    label_map_image,
    point_tour_svg,
    read_points,
    segmentation_overlay,
    write_ppm,
    write_svg,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_STAGE = 1
EXIT_USAGE = 2

TOUR_TRIALS = 200
IMAGE_SUFFIX = {1: "pgm", 3: "ppm"}


def run_config(args: argparse.Namespace) -> RunConfig:
    """Run configuration from the optional config file, flags winning."""
    return RunConfig.from_file(
        getattr(args, "config", None),
        precision=getattr(args, "precision", None),
        min_card=getattr(args, "min_card", None),
        lsq_aggregation=getattr(args, "lsq_aggregation", None),
        vq_bits=getattr(args, "vq_bits", None),
        profile=getattr(args, "profile", None),
        clamp=getattr(args, "clamp", None),
        mask_bits=getattr(args, "mask_bits", None),
        include_compounds=getattr(args, "include_compounds", None),
        seed=getattr(args, "seed", None),
        out=getattr(args, "out", None),
    )


def parse_labels(items: Optional[List[str]]) -> Dict[int, str]:
    labels = {}
    for item in items or []:
        node, sep, name = item.partition("=")
        if not sep or not node.strip().isdigit() or not name:
            raise ConfigError(f"Expected NODE=LABEL, got '{item}'")
        labels[int(node)] = name
    return labels


def image_name(stem: str, bands: int) -> str:
    return f"{stem}.{IMAGE_SUFFIX.get(bands, 'raw')}"


def load_tree(path: Path, image: Optional[Path] = None) -> DecompTree:
    """Decomposition tree from its JSON record and the label map next to it."""
    path = Path(path)
    record = read_record(TreeRecord, path)
    if record.format != TREE_FORMAT:
        raise FormatVersionError(f"Unsupported tree format '{record.format}'")
    labels = load_label_map(path.parent / record.label_map)
    img = load_image(image) if image is not None else None
    return tree_from_record(record, labels, img)


def _grouped(args: argparse.Namespace) -> Grouping:
    grouping = group(load_tree(args.tree, args.image))
    for node_id, label in parse_labels(args.label).items():
        label_node(grouping, node_id, label)
    return grouping


def cmd_segment(args: argparse.Namespace) -> int:
    config = run_config(args)
    out = ensure_dir(config.out)
    img = load_image(args.image)
    start_time = time.time()
    tree = decompose(img, config.precision, config.min_card, config.lsq_aggregation)
    logger.info(f"Segmentation took {time.time() - start_time:.2f} s")

    save_label_map(tree.label_map(), out / "labels.pgm")
    write_record(tree_to_record(tree, "labels.pgm"), out / "tree.json")
    stats = tree.stats()
    write_record(stats, out / "stats.json")
    config.to_file(out / "config.txt")
    print(stats.model_dump_json(indent=2))
    return EXIT_OK


def cmd_describe(args: argparse.Namespace) -> int:
    config = run_config(args)
    grouping = _grouped(args)
    record = DescriptorsRecord(tree=Path(args.tree).name, nodes=describe_nodes(grouping, with_series=args.series))
    write_record(record, ensure_dir(config.out) / "descriptors.json")
    print(f"{len(record.nodes)} node descriptors")
    return EXIT_OK


def cmd_group(args: argparse.Namespace) -> int:
    config = run_config(args)
    grouping = _grouped(args)
    record = DescriptorsRecord(tree=Path(args.tree).name,
                               nodes=describe_nodes(grouping, compounds_only=True, with_series=True))
    write_record(record, ensure_dir(config.out) / "groups.json")
    print(f"{len(record.nodes)} compound shapes over {len(grouping.leaves())} leaves")
    for leaf in grouping.tree.leaves():
        label = leaf_majority(grouping, leaf.node_id)
        if label is not None:
            print(f"leaf {leaf.node_id}: {label}")
    return EXIT_OK


def _existing(args: argparse.Namespace) -> Tuple[Optional[Alphabet], Optional[Dictionary]]:
    alphabet = dictionary = None
    if getattr(args, "alphabet", None):
        alphabet = Alphabet.from_record(read_record(AlphabetRecord, args.alphabet))
    if getattr(args, "dictionary", None):
        dictionary = Dictionary.from_record(read_record(DictionaryRecord, args.dictionary))
    return alphabet, dictionary


def _write_codebooks(out: Path, alphabet: Alphabet, dictionary: Dictionary) -> None:
    write_record(alphabet.to_record(), out / "alphabet.json")
    write_record(dictionary.to_record(), out / "dictionary.json")
    write_tree(alphabet.domain_tree, out / "domain.vqt")


def cmd_dict(args: argparse.Namespace) -> int:
    config = run_config(args)
    out = ensure_dir(config.out)
    grouping = _grouped(args)
    alphabet, dictionary = _existing(args)
    alphabet, letters = build_alphabet(
        grouping,
        r=config.vq_bits,
        profile=config.profile,
        clamp=config.clamp,
        mask_bits=config.mask_bits,
        include_degenerate=config.include_degenerate,
        alphabet=alphabet,
    )
    dictionary = build_dictionary(grouping, alphabet, letters, dictionary,
                                  skip_uncoded=not config.include_degenerate)
    _write_codebooks(out, alphabet, dictionary)
    print(f"{len(alphabet)} letters, {len(dictionary)} words, {len(dictionary.synonyms())} synonym labels")
    print("alphabet order: " + " ".join(alphabet.sorted_codes()))
    return EXIT_OK


def cmd_encode(args: argparse.Namespace) -> int:
    config = run_config(args)
    out = ensure_dir(config.out)
    img = load_image(args.image)
    alphabet, dictionary = _existing(args)
    start_time = time.time()
    result = encode(img, config, alphabet, dictionary)
    logger.info(f"Encoding took {time.time() - start_time:.2f} s")

    _write_codebooks(out, result.alphabet, result.dictionary)
    sentence_path = out / ("sentence.vsn" if args.binary else "sentence.json")
    write_sentence(result.sentence, sentence_path, binary=args.binary)
    config.to_file(out / "config.txt")

    decoded, _ = synthesize(result.sentence, result.alphabet)
    save_image(decoded, out / image_name("decoded", decoded.bands))
    report = codec_report(img, decoded, result)
    write_record(report, out / "report.json")
    if args.partition:
        exact = synthesize_partition(result.tree)
        save_image(exact, out / image_name("partition", exact.bands))
        logger.info(f"Partition synthesis max error {int(np.abs(exact.samples - img.samples).max())}")
    print(report.model_dump_json(indent=2))
    return EXIT_OK


def cmd_decode(args: argparse.Namespace) -> int:
    config = run_config(args)
    out = ensure_dir(config.out)
    sentence = read_sentence(args.sentence)
    record = read_record(AlphabetRecord, args.alphabet)
    img, labels = decode(sentence, record)
    path = Path(args.output) if args.output else out / image_name("decoded", img.bands)
    save_image(img, path)
    save_label_map(np.maximum(labels, 0), out / "decoded-labels.pgm")
    print(f"Decoded {len(sentence.words)} words into {path}")
    return EXIT_OK


def _plot_labels(path: Path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".json":
        record = read_record(TreeRecord, path)
        return load_label_map(path.parent / record.label_map)
    return load_label_map(path)


def cmd_plot(args: argparse.Namespace) -> int:
    config = run_config(args)
    out = ensure_dir(config.out)
    kind = args.kind
    if kind == "hilbert-curve":
        path = Path(args.output or out / f"hilbert-{args.order}.svg")
        write_svg(hilbert_curve_svg(args.order), path)
    elif kind == "point-tour":
        if args.input is None:
            raise ConfigError("point-tour needs a points file")
        points = read_points(args.input)
        path = Path(args.output or out / "tour.svg")
        write_svg(point_tour_svg(points, args.order), path)
        length = tour_length(points, order_points(points, args.order))
        baseline = random_tour_lengths(points, TOUR_TRIALS, config.seed)
        print(f"Hilbert tour {length:.3f}, random mean {baseline.mean():.3f} over {TOUR_TRIALS} trials")
    elif kind in ("segmentation-overlay", "label-map"):
        if args.input is None:
            raise ConfigError(f"{kind} needs a tree or label map")
        labels = _plot_labels(args.input)
        path = Path(args.output or out / f"{kind}.ppm")
        if kind == "label-map":
            write_ppm(label_map_image(labels), path)
        else:
            if args.image is None:
                raise ConfigError("segmentation-overlay needs --image")
            img = load_image(args.image)
            if (img.height, img.width) != labels.shape:
                raise ConfigError(f"Image {img.width}x{img.height} does not match label map {labels.shape[::-1]}")
            write_ppm(segmentation_overlay(img, labels), path)
    else:
        raise ConfigError(f"Unknown plot kind '{kind}'")
    print(f"Wrote {path}")
    return EXIT_OK


def _check_hilbert() -> bool:
    r = 4
    cells = [hilbert_d2xy(r, d) for d in range(4 ** r)]
    steps = all(abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1 for a, b in zip(cells, cells[1:]))
    kd = [hilbert_kd(3, 2, d) for d in range(64)]
    kd_steps = all(sum(abs(p - q) for p, q in zip(a, b)) == 1 for a, b in zip(kd, kd[1:]))
    return len(set(cells)) == 4 ** r and steps and len(set(kd)) == 64 and kd_steps


def _check_collapse() -> bool:
    tree = QuantTree(2, 1)
    for v in ((0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)):
        tree.insert(v)
    return tree.node_count() == 1 and tree.cell_count() == 4


def _check_tour(seed: int) -> bool:
    rng = np.random.default_rng(seed)
    points = [tuple(p) for p in rng.uniform(0.0, 100.0, size=(100, 2))]
    length = tour_length(points, order_points(points, 8))
    return length < random_tour_lengths(points, TOUR_TRIALS, seed).mean()


def _check_round_trip(config: RunConfig) -> bool:
    ys, xs = np.mgrid[0:32, 0:32]
    for samples in (np.full((32, 32), 77), 40 + xs + 2 * ys + 100 * (xs >= 16)):
        img = MultiImage(samples)
        result = encode(img, config)
        decoded, _ = synthesize(result.sentence, result.alphabet)
        if codec_report(img, decoded, result).interior_max_error > config.precision + 1:
            return False
    return True


def cmd_selftest(args: argparse.Namespace) -> int:
    config = run_config(args)
    checks: List[Tuple[str, Callable[[], bool]]] = [
        ("hilbert bijection and adjacency", _check_hilbert),
        ("quantization tree collapse", _check_collapse),
        ("hilbert tour beats random order", lambda: _check_tour(config.seed)),
        ("encode/decode round trip", lambda: _check_round_trip(config)),
    ]
    failed = 0
    for name, check in checks:
        ok = check()
        failed += not ok
        print(f"{'ok' if ok else 'FAILED':6} {name}")
    return EXIT_OK if failed == 0 else EXIT_STAGE
