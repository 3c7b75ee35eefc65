# CLI initialization module
import argparse

from .commands import (
    cmd_decode,
    cmd_describe,
    cmd_dict,
    cmd_encode,
    cmd_group,
    cmd_plot,
    cmd_segment,
    cmd_selftest,
)
from .plots import PLOT_KINDS
from ..core.config import (
    PACKAGE_TITLE,
    PACKAGE_DESCRIPTION,
    PACKAGE_VERSION,
    RunConfig,
    settings,
)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    """Flags mirroring the keys of a run config file; unset flags defer to the file."""
    defaults = RunConfig.model_fields
    parser.add_argument("--config", help="key=value run config file")
    parser.add_argument("--precision", type=float,
                        help=f"L-infinity precision in levels (default: {defaults['precision'].default})")
    parser.add_argument("--min-card", type=int,
                        help=f"Smallest splittable patch (default: {defaults['min_card'].default})")
    parser.add_argument("--lsq-aggregation", action=argparse.BooleanOptionalAction, default=None,
                        help="Try a direct next-order fit when aggregating "
                             f"(default: {defaults['lsq_aggregation'].default})")
    parser.add_argument("--vq-bits", type=int,
                        help=f"Quantization bits per coordinate (default: {defaults['vq_bits'].default})")
    parser.add_argument("--profile", choices=["full", "convex-hull"],
                        help=f"Descriptor profile (default: {defaults['profile'].default})")
    parser.add_argument("--clamp", type=float,
                        help=f"Signed coordinate bound (default: {defaults['clamp'].default})")
    parser.add_argument("--mask-bits", type=int,
                        help=f"Domain mask bits per side (default: {defaults['mask_bits'].default})")
    parser.add_argument("--seed", type=int,
                        help=f"Seed of randomized diagnostics (default: {defaults['seed'].default})")
    parser.add_argument("--out", help=f"Output directory (default: {defaults['out'].default})")


def _add_tree_input(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("tree", help="tree.json written by segment")
    parser.add_argument("--image", help="Source image, restores sample values")
    parser.add_argument("--label", action="append", metavar="NODE=LABEL",
                        help="Attach a label to a node (repeatable)")


def create_parser() -> argparse.ArgumentParser:
    """
    Create the command-line parser.

    Returns:
        argparse.ArgumentParser: Parser whose subcommands set a `handler`
    """
    parser = argparse.ArgumentParser(prog=PACKAGE_TITLE, description=PACKAGE_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"%(prog)s {PACKAGE_VERSION}")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL,
                        help=f"Logging level (default: {settings.LOG_LEVEL})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="Piecewise regular decomposition of an image")
    p.add_argument("image", help="Input PGM/PPM, raw with .hdr sidecar, or any Pillow format")
    _add_run_flags(p)
    p.set_defaults(handler=cmd_segment)

    p = sub.add_parser("describe", help="Domain and rendering descriptors of every node")
    _add_tree_input(p)
    p.add_argument("--series", action="store_true", help="Attach leaf-to-root feature series")
    _add_run_flags(p)
    p.set_defaults(handler=cmd_describe)

    p = sub.add_parser("group", help="Compound shapes and feature series")
    _add_tree_input(p)
    _add_run_flags(p)
    p.set_defaults(handler=cmd_group)

    p = sub.add_parser("dict", help="Build or enrich the alphabet and dictionary")
    _add_tree_input(p)
    p.add_argument("--alphabet", help="Existing alphabet.json to enrich")
    p.add_argument("--dictionary", help="Existing dictionary.json to enrich")
    _add_run_flags(p)
    p.set_defaults(handler=cmd_dict)

    p = sub.add_parser("encode", help="Encode an image as a sentence and report the round trip")
    p.add_argument("image", help="Input image")
    p.add_argument("--alphabet", help="Existing alphabet.json to enrich")
    p.add_argument("--dictionary", help="Existing dictionary.json to enrich")
    p.add_argument("--include-compounds", action="store_true", default=None,
                   help="List compound words in the sentence too")
    p.add_argument("--binary", action="store_true", help="Write the compact binary sentence")
    p.add_argument("--partition", action="store_true",
                   help="Also render the exact leaf partition, bypassing masks")
    _add_run_flags(p)
    p.set_defaults(handler=cmd_encode)

    p = sub.add_parser("decode", help="Synthesize an image from a sentence")
    p.add_argument("sentence", help="sentence.json or binary sentence")
    p.add_argument("--alphabet", required=True, help="alphabet.json the sentence was encoded with")
    p.add_argument("--output", help="Output image path")
    _add_run_flags(p)
    p.set_defaults(handler=cmd_decode)

    p = sub.add_parser("plot", help="Hilbert curves, point tours and segmentation rasters")
    p.add_argument("kind", choices=PLOT_KINDS)
    p.add_argument("input", nargs="?", help="Points file, tree.json or label map")
    p.add_argument("--order", type=int, default=3, help="Hilbert curve order (default: 3)")
    p.add_argument("--image", help="Image under a segmentation overlay")
    p.add_argument("--output", help="Output path")
    _add_run_flags(p)
    p.set_defaults(handler=cmd_plot)

    p = sub.add_parser("selftest", help="Quick internal consistency checks")
    _add_run_flags(p)
    p.set_defaults(handler=cmd_selftest)

    return parser


__all__ = ["create_parser"]
