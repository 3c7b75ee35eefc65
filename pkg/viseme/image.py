"""
Image Core
----------
Multispectral raster representation, Netpbm / raw-with-sidecar ingestion and
the sample-set view that the segmentation and description stages consume.

Pixel coordinates are integer cell centers, origin top-left, y growing
downward; the raster index of (x, y) is y * width + x.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from PIL import Image

from .core.errors import ImageFormatError

logger = logging.getLogger(__name__)

NETPBM_MAGIC = {b"P5": 1, b"P6": 3}
PathLike = Union[str, Path]


@dataclass(frozen=True)
class MultiImage:
    """
    Multispectral raster.

    Attributes:
        samples: integer array of shape (bands, height, width)
        depth: number of levels per band (N_G)
    """
    samples: np.ndarray
    depth: int = 256

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim == 2:
            samples = samples[np.newaxis]
        if samples.ndim != 3:
            raise ImageFormatError(f"Expected a (bands, height, width) array, got shape {samples.shape}")
        if min(samples.shape) < 1:
            raise ImageFormatError(f"Empty image of shape {samples.shape}")
        if self.depth < 2:
            raise ImageFormatError(f"Depth must be at least 2, got {self.depth}")
        if samples.size and (samples.min() < 0 or samples.max() > self.depth - 1):
            raise ImageFormatError(
                f"Sample out of range [0, {self.depth - 1}]: min {samples.min()}, max {samples.max()}")
        samples = samples.astype(np.int64, copy=True)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def bands(self) -> int:
        return self.samples.shape[0]

    @property
    def height(self) -> int:
        return self.samples.shape[1]

    @property
    def width(self) -> int:
        return self.samples.shape[2]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.width, self.height, self.bands

    @classmethod
    def blank(cls, width: int, height: int, bands: int = 1, depth: int = 256) -> "MultiImage":
        return cls(np.zeros((bands, height, width), dtype=np.int64), depth=depth)

    def band_table(self) -> np.ndarray:
        """All samples as an array of shape (width * height, bands), raster order."""
        return self.samples.reshape(self.bands, -1).T.astype(float)


@dataclass(frozen=True)
class SampleSet:
    """
    Index view over an image region.

    Attributes:
        image: the source raster
        indices: sorted raster indices of the member pixels
    """
    image: MultiImage
    indices: np.ndarray

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64)
        if indices.ndim != 1 or indices.size == 0:
            raise ValueError("A sample set must hold at least one pixel")
        object.__setattr__(self, "indices", indices)

    @property
    def card(self) -> int:
        return int(self.indices.size)

    @property
    def xs(self) -> np.ndarray:
        return self.indices % self.image.width

    @property
    def ys(self) -> np.ndarray:
        return self.indices // self.image.width

    @property
    def z(self) -> np.ndarray:
        """Band values, shape (card, bands)."""
        flat = self.image.samples.reshape(self.image.bands, -1)
        return flat[:, self.indices].T.astype(float)

    def subset(self, mask: np.ndarray) -> "SampleSet":
        return SampleSet(self.image, self.indices[mask])


def full_sample_set(img: MultiImage) -> SampleSet:
    """Every pixel of the image, in raster order."""
    return SampleSet(img, np.arange(img.width * img.height, dtype=np.int64))


def _read_tokens(data: bytes, count: int) -> Tuple[List[bytes], int]:
    """Read whitespace-separated header tokens, skipping # comments."""
    tokens: List[bytes] = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError("Truncated Netpbm header")
        tokens.append(data[start:pos])
    return tokens, pos


def parse_netpbm(data: bytes, max_maxval: int = 255) -> Tuple[np.ndarray, int]:
    """
    Parse a binary P5/P6 payload.

    Args:
        data: File contents
        max_maxval: Largest accepted maxval (255 for images, 65535 for label maps)

    Returns:
        (samples of shape (bands, height, width), maxval)
    """
    magic = data[:2]
    if magic not in NETPBM_MAGIC:
        raise ImageFormatError(f"Unsupported Netpbm magic {magic!r}")
    bands = NETPBM_MAGIC[magic]
    tokens, pos = _read_tokens(data[2:], 3)
    pos += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise ImageFormatError(f"Malformed Netpbm header: {tokens}") from e
    if width < 1 or height < 1:
        raise ImageFormatError(f"Invalid image dimensions {width}x{height}")
    if not 1 <= maxval <= max_maxval:
        raise ImageFormatError(f"Unsupported maxval {maxval} (must be in [1, {max_maxval}])")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ImageFormatError("Missing whitespace after Netpbm maxval")
    pos += 1

    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * bands * dtype.itemsize
    payload = data[pos:pos + expected]
    if len(payload) < expected:
        raise ImageFormatError(f"Truncated payload: expected {expected} bytes, got {len(payload)}")
    if len(data) > pos + expected:
        logger.warning(f"Ignoring {len(data) - pos - expected} trailing bytes after Netpbm payload")

    samples = np.frombuffer(payload, dtype=dtype).astype(np.int64)
    if samples.max(initial=0) > maxval:
        raise ImageFormatError(f"Sample {samples.max()} exceeds declared maxval {maxval}")
    samples = samples.reshape(height, width, bands).transpose(2, 0, 1)
    return samples, maxval


def _load_raw(path: Path) -> MultiImage:
    header_path = Path(str(path) + ".hdr")
    if not header_path.is_file():
        raise ImageFormatError(f"Raw image {path} has no sidecar header {header_path}")
    fields = header_path.read_text(encoding="utf-8").split()
    try:
        width, height, bands, depth = (int(f) for f in fields[:4])
    except ValueError as e:
        raise ImageFormatError(f"Malformed raw sidecar header: {fields}") from e
    if len(fields) != 4 or min(width, height, bands) < 1 or not 2 <= depth <= 256:
        raise ImageFormatError(f"Malformed raw sidecar header: {fields}")
    data = path.read_bytes()
    expected = width * height * bands
    if len(data) < expected:
        raise ImageFormatError(f"Truncated payload: expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        logger.warning(f"Ignoring {len(data) - expected} trailing bytes in raw image {path}")
    samples = np.frombuffer(data[:expected], dtype=np.uint8).astype(np.int64)
    if samples.max(initial=0) > depth - 1:
        raise ImageFormatError(f"Sample {samples.max()} exceeds declared depth {depth}")
    return MultiImage(samples.reshape(bands, height, width), depth=depth)


def _load_with_pillow(path: Path) -> MultiImage:
    try:
        with Image.open(path) as handle:
            if handle.mode == "L":
                array = np.asarray(handle)[np.newaxis]
            else:
                array = np.asarray(handle.convert("RGB")).transpose(2, 0, 1)
    except (OSError, ValueError) as e:
        raise ImageFormatError(f"Cannot decode image {path}: {str(e)}") from e
    return MultiImage(array, depth=256)


def load_image(path: PathLike, format_hint: Optional[str] = None) -> MultiImage:
    """
    Load a PGM (P5), PPM (P6), raw multiband (with sidecar) or any image
    Pillow can decode.

    Args:
        path: Image file
        format_hint: "pgm", "ppm", "raw" or "pillow"; detected when omitted

    Returns:
        MultiImage
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Image file not found: {path}")
    hint = (format_hint or "").lower()
    if not hint:
        if path.suffix.lower() == ".raw" or Path(str(path) + ".hdr").is_file():
            hint = "raw"
        else:
            with open(path, "rb") as handle:
                hint = "pgm" if handle.read(2) in NETPBM_MAGIC else "pillow"

    if hint == "raw":
        img = _load_raw(path)
    elif hint in ("pgm", "ppm", "pnm"):
        samples, maxval = parse_netpbm(path.read_bytes())
        img = MultiImage(samples, depth=maxval + 1)
    elif hint == "pillow":
        img = _load_with_pillow(path)
    else:
        raise ImageFormatError(f"Unknown format hint: {format_hint}")
    logger.info(f"Loaded {path}: {img.width}x{img.height}, {img.bands} band(s), depth {img.depth}")
    return img


def encode_netpbm(samples: np.ndarray, maxval: int) -> bytes:
    samples = np.asarray(samples)
    bands, height, width = samples.shape
    if bands not in (1, 3):
        raise ImageFormatError(f"Netpbm holds 1 or 3 bands, got {bands}")
    magic = b"P5" if bands == 1 else b"P6"
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    header = magic + f"\n{width} {height}\n{maxval}\n".encode("ascii")
    return header + samples.transpose(1, 2, 0).astype(dtype).tobytes()


def save_image(img: MultiImage, path: PathLike) -> Path:
    """
    Save as P5/P6 for 1 or 3 bands, raw with sidecar otherwise.

    Returns:
        The path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if img.bands in (1, 3) and path.suffix.lower() != ".raw":
        path.write_bytes(encode_netpbm(img.samples, img.depth - 1))
    else:
        path.write_bytes(img.samples.astype(np.uint8).tobytes())
        Path(str(path) + ".hdr").write_text(
            f"{img.width} {img.height} {img.bands} {img.depth}\n", encoding="utf-8")
    logger.info(f"Wrote image {path}")
    return path


def save_label_map(labels: np.ndarray, path: PathLike) -> Path:
    """Save a region-id map as P5, 16-bit when ids exceed 255."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() > 65535):
        raise ImageFormatError(f"Region ids {labels.min()}..{labels.max()} do not fit a 16-bit map")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    maxval = max(int(labels.max(initial=0)), 1)
    maxval = 255 if maxval <= 255 else 65535
    path.write_bytes(encode_netpbm(labels[np.newaxis], maxval))
    return path


def load_label_map(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Label map not found: {path}")
    samples, _ = parse_netpbm(path.read_bytes(), max_maxval=65535)
    if samples.shape[0] != 1:
        raise ImageFormatError(f"Label map {path} must have one band")
    return samples[0]
