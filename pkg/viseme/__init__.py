# Package initialization
from .core.config import PACKAGE_VERSION, RunConfig
from .image import MultiImage, load_image, save_image
from .segmenter import decompose
from .grouping import group
from .dictionary import Alphabet, Dictionary, QuantTree, build_alphabet, build_dictionary
from .coder import encode, synthesize

__version__ = PACKAGE_VERSION

__all__ = [
    "RunConfig",
    "MultiImage",
    "load_image",
    "save_image",
    "decompose",
    "group",
    "Alphabet",
    "Dictionary",
    "QuantTree",
    "build_alphabet",
    "build_dictionary",
    "encode",
    "synthesize",
]
