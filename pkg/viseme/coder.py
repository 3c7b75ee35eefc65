"""
Sentence Coder
--------------
Encodes an image as a sentence: the letters of its simple shapes (and
optionally the words of its compound shapes) listed along the Hilbert order
of their gravity centers, each with the pose needed to put it back. Decoding
rasterizes the stored domain masks at those poses and renders each band
through the inverse descriptor chain.
"""

import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .core.config import SENTENCE_FORMAT, RunConfig
from .core.errors import FormatVersionError, UnknownCodeError
from .core.utils import parallel_map, write_record
from .dictionary import (
    MASK_SPAN,
    MIN_MASK_LENGTH,
    WORD_ORDER_BITS,
    Alphabet,
    Dictionary,
    build_alphabet,
    build_dictionary,
    mask_grid,
    record_digest,
)
from .domain import to_principal
from .grouping import CompoundShape, Grouping, group
from .hilbert import order_points
from .image import MultiImage
from .models.schemas import (
    AlphabetRecord,
    BandPose,
    CodecReport,
    Pose,
    Sentence,
    SentenceHeader,
    SentenceWord,
    WordKind,
)
from .rendering import BandRendering, evaluate_band
from .segmenter import DecompTree, decompose

logger = logging.getLogger(__name__)

SENTENCE_MAGIC = b"VSN1"
_KINDS = [WordKind.LEAF, WordKind.COMPOUND]


@dataclass
class EncodeResult:
    tree: DecompTree
    grouping: Grouping
    alphabet: Alphabet
    dictionary: Dictionary
    letters: Dict[int, str]
    sentence: Sentence


def pose_of(shape: CompoundShape) -> Pose:
    d = shape.domain
    bands = [
        BandPose(z_bar=b.z_bar, theta_xz=b.theta_xz, theta_yz=b.theta_yz,
                 theta_xu=b.theta_xu, lambda_u=b.lambda_u, flat=b.flat)
        for b in shape.rendering.bands
    ]
    return Pose(x=d.x_g, y=d.y_g, theta=d.theta, scale=d.scale, area=d.area, bands=bands)


def make_sentence(grouping: Grouping, alphabet: Alphabet, letters: Dict[int, str],
                  dictionary: Optional[Dictionary] = None, precision: float = 2.0,
                  include_compounds: bool = False) -> Sentence:
    """
    Leaf letters, and compound words on request, in Hilbert order of their
    gravity centers over the image box.
    """
    image = grouping.tree.image
    words: List[SentenceWord] = []
    for shape in grouping.leaves():
        if shape.node_id in letters:
            words.append(SentenceWord(code=letters[shape.node_id], kind=WordKind.LEAF,
                                      node=shape.node_id, pose=pose_of(shape)))
    if include_compounds and dictionary is not None:
        for shape in grouping.compounds():
            code = dictionary.node_words.get(shape.node_id)
            if code is not None:
                words.append(SentenceWord(code=code, kind=WordKind.COMPOUND,
                                          node=shape.node_id, pose=pose_of(shape)))

    order = order_points([(w.pose.x, w.pose.y) for w in words], WORD_ORDER_BITS,
                         (0.0, 0.0, image.width, image.height))
    header = SentenceHeader(
        width=image.width,
        height=image.height,
        bands=image.bands,
        depth=image.depth,
        precision=precision,
        alphabet_digest=alphabet.digest(),
    )
    return Sentence(header=header, words=[words[n] for n in order])


def encode(img: MultiImage, config: Optional[RunConfig] = None, alphabet: Optional[Alphabet] = None,
           dictionary: Optional[Dictionary] = None) -> EncodeResult:
    """
    Full pipeline: decomposition, grouping, alphabet and dictionary, sentence.

    Args:
        img: Input image
        config: Run parameters; defaults when omitted
        alphabet: Existing alphabet to enrich
        dictionary: Existing dictionary to enrich

    Returns:
        EncodeResult
    """
    config = config or RunConfig()
    tree = decompose(img, config.precision, config.min_card, config.lsq_aggregation)
    grouping = group(tree)
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
    sentence = make_sentence(grouping, alphabet, letters, dictionary, config.precision, config.include_compounds)
    logger.info(f"Encoded {img.width}x{img.height} image as {len(sentence.words)} words")
    return EncodeResult(tree, grouping, alphabet, dictionary, letters, sentence)


def check_alphabet(sentence: Sentence, record: AlphabetRecord) -> None:
    if sentence.header.format != SENTENCE_FORMAT:
        raise FormatVersionError(f"Unsupported sentence format '{sentence.header.format}'")
    digest = record_digest(record)
    if digest != sentence.header.alphabet_digest:
        raise FormatVersionError(
            f"Sentence was encoded with alphabet {sentence.header.alphabet_digest[:12]}, got {digest[:12]}")


def _rasterize(pose: Pose, grid: np.ndarray, width: int, height: int) -> Tuple[np.ndarray, np.ndarray]:
    """Image pixels whose own-frame cell is set in the mask grid."""
    side = grid.shape[0]
    length = max(math.sqrt(pose.scale / pose.area), MIN_MASK_LENGTH) if pose.area else MIN_MASK_LENGTH
    reach = MASK_SPAN * length * math.sqrt(2.0) + 1.0
    x0, x1 = max(int(math.floor(pose.x - reach)), 0), min(int(math.ceil(pose.x + reach)), width - 1)
    y0, y1 = max(int(math.floor(pose.y - reach)), 0), min(int(math.ceil(pose.y + reach)), height - 1)
    if x0 > x1 or y0 > y1:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    xs, ys = xs.ravel(), ys.ravel()
    u1, u2 = to_principal(pose.x, pose.y, pose.theta, xs, ys)
    n1 = (u1 / length + MASK_SPAN) / (2 * MASK_SPAN)
    n2 = (u2 / length + MASK_SPAN) / (2 * MASK_SPAN)
    inside = (n1 >= 0) & (n1 < 1) & (n2 >= 0) & (n2 < 1)
    i1 = np.floor(n1[inside] * side).astype(np.int64)
    i2 = np.floor(n2[inside] * side).astype(np.int64)
    keep = grid[i1, i2]
    return xs[inside][keep], ys[inside][keep]


def _neighbourhood(labels: np.ndarray, fill: Optional[int]) -> np.ndarray:
    """3x3 neighborhoods stacked on a last axis of 9, center at index 4."""
    if fill is None:
        padded = np.pad(labels, 1, mode="edge")
    else:
        padded = np.pad(labels, 1, mode="constant", constant_values=fill)
    h, w = labels.shape
    return np.stack([padded[dy:dy + h, dx:dx + w] for dy in range(3) for dx in range(3)], axis=-1)


def fill_holes(labels: np.ndarray) -> np.ndarray:
    """
    Give every unclaimed pixel (-1) the lower median of its claimed 3x3
    neighbors, repeating until nothing is left or nothing changes.
    """
    labels = labels.copy()
    if (labels < 0).all():
        return labels
    big = np.iinfo(np.int64).max
    for _ in range(labels.shape[0] + labels.shape[1]):
        holes = labels < 0
        if not holes.any():
            break
        hood = _neighbourhood(labels, -1)[holes]
        claimed = hood >= 0
        counts = claimed.sum(axis=1)
        ordered = np.sort(np.where(claimed, hood, big), axis=1)
        picks = ordered[np.arange(len(ordered)), np.maximum(counts - 1, 0) // 2]
        values = np.where(counts > 0, picks, -1)
        if (values < 0).all():
            break
        labels[holes] = values
    return labels


def median_labels(labels: np.ndarray) -> np.ndarray:
    """3x3 median filter of a label map, edges replicated."""
    return np.sort(_neighbourhood(labels, None), axis=-1)[..., 4]


def synthesize(sentence: Sentence, alphabet: Alphabet) -> Tuple[MultiImage, np.ndarray]:
    """
    Rebuild an image from its sentence.

    Words claim the pixels of their rasterized masks in sentence order; a
    pixel keeps its first claimant. Holes are filled from their neighbors and
    the label map is median filtered before each band is rendered.

    Returns:
        (image, label map of word indices; -1 only for an empty sentence)
    """
    header = sentence.header
    h, w = header.height, header.width
    words = [word for word in sentence.words if word.kind is WordKind.LEAF]
    if not words:
        logger.warning("Empty sentence, returning a blank image")
        return MultiImage.blank(w, h, header.bands, header.depth), np.full((h, w), -1, dtype=np.int64)

    entries = [alphabet[word.code] for word in words]
    claims = np.full((h, w), -1, dtype=np.int64)
    for n, (word, entry) in enumerate(zip(words, entries)):
        if entry.mask is None:
            raise UnknownCodeError(f"Letter '{word.code}' carries no domain mask")
        xs, ys = _rasterize(word.pose, mask_grid(entry.mask), w, h)
        free = claims[ys, xs] < 0
        claims[ys[free], xs[free]] = n
    holes = int((claims < 0).sum())
    labels = median_labels(fill_holes(claims))
    logger.debug(f"Filled {holes} unclaimed pixels")

    samples = np.zeros((header.bands, h, w), dtype=float)
    for n, (word, entry) in enumerate(zip(words, entries)):
        ys, xs = np.nonzero(labels == n)
        if xs.size == 0:
            continue
        center = (word.pose.x, word.pose.y)
        for b, bp in enumerate(word.pose.bands):
            band = BandRendering(
                invariants=tuple(float(v) for v in entry.rendering_vectors[b]),
                z_bar=bp.z_bar,
                theta_xz=bp.theta_xz,
                theta_yz=bp.theta_yz,
                theta_xu=bp.theta_xu,
                lambda_u=bp.lambda_u,
                flat=bp.flat,
            )
            samples[b, ys, xs] = evaluate_band(band, center, xs, ys)
    samples = np.clip(np.rint(samples), 0, header.depth - 1).astype(np.int64)
    return MultiImage(samples, depth=header.depth), labels


def synthesize_partition(tree: DecompTree) -> MultiImage:
    """Render every leaf model on its own pixels; no masks involved."""
    img = tree.image
    samples = np.zeros((img.bands, img.height, img.width), dtype=float)

    def render(leaf):
        V = leaf.samples
        return V.xs, V.ys, leaf.model.evaluate(V.xs, V.ys)

    for xs, ys, values in parallel_map(render, tree.leaves()):
        samples[:, ys, xs] = values.T
    samples = np.clip(np.rint(samples), 0, img.depth - 1).astype(np.int64)
    return MultiImage(samples, depth=img.depth)


def decode(sentence: Sentence, record: AlphabetRecord) -> Tuple[MultiImage, np.ndarray]:
    check_alphabet(sentence, record)
    return synthesize(sentence, Alphabet.from_record(record))


def interior_mask(labels: np.ndarray, margin: int = 2) -> np.ndarray:
    """Pixels whose whole (2 margin + 1)^2 window carries their own label."""
    h, w = labels.shape
    padded = np.pad(labels, margin, mode="edge")
    inside = np.ones((h, w), dtype=bool)
    for dy in range(2 * margin + 1):
        for dx in range(2 * margin + 1):
            inside &= padded[dy:dy + h, dx:dx + w] == labels
    return inside


def codec_report(original: MultiImage, decoded: MultiImage, result: EncodeResult) -> CodecReport:
    diff = np.abs(original.samples - decoded.samples)
    inside = interior_mask(result.tree.label_map())
    interior = diff[:, inside]
    mse = float((diff.astype(float) ** 2).mean())
    psnr = None if mse == 0 else 10.0 * math.log10((original.depth - 1) ** 2 / mse)
    return CodecReport(
        words=len(result.sentence.words),
        leaves=len(result.tree.leaves()),
        letters=len(result.alphabet),
        dictionary_words=len(result.dictionary),
        max_error=float(diff.max()),
        interior_max_error=float(interior.max()) if interior.size else 0.0,
        psnr=psnr,
    )


def sentence_to_bytes(sentence: Sentence) -> bytes:
    """
    Compact form: magic, header, then per word its code, kind, node and pose
    with 32-bit floats, all little-endian.
    """
    header = sentence.header
    out = bytearray(SENTENCE_MAGIC)
    out += struct.pack("<IIHId", header.width, header.height, header.bands, header.depth, header.precision)
    out += bytes.fromhex(header.alphabet_digest)
    out += struct.pack("<I", len(sentence.words))
    for word in sentence.words:
        code = word.code.encode("utf-8")
        pose = word.pose
        out += struct.pack("<H", len(code)) + code
        out += struct.pack("<BI", _KINDS.index(word.kind), word.node)
        out += struct.pack("<ffffIH", pose.x, pose.y, pose.theta, pose.scale, pose.area, len(pose.bands))
        for bp in pose.bands:
            out += struct.pack("<fffffB", bp.z_bar, bp.theta_xz, bp.theta_yz, bp.theta_xu, bp.lambda_u, bp.flat)
    return bytes(out)


def sentence_from_bytes(data: bytes) -> Sentence:
    if data[:4] != SENTENCE_MAGIC:
        raise FormatVersionError("Not a binary sentence")
    try:
        offset = 4
        width, height, bands, depth, precision = struct.unpack_from("<IIHId", data, offset)
        offset += struct.calcsize("<IIHId")
        digest = data[offset:offset + 32].hex()
        offset += 32
        (count,) = struct.unpack_from("<I", data, offset)
        offset += 4
        words = []
        for _ in range(count):
            (length,) = struct.unpack_from("<H", data, offset)
            offset += 2
            code = data[offset:offset + length].decode("utf-8")
            offset += length
            kind, node = struct.unpack_from("<BI", data, offset)
            offset += struct.calcsize("<BI")
            x, y, theta, scale, area, n_bands = struct.unpack_from("<ffffIH", data, offset)
            offset += struct.calcsize("<ffffIH")
            poses = []
            for _ in range(n_bands):
                z_bar, t_xz, t_yz, t_xu, lam, flat = struct.unpack_from("<fffffB", data, offset)
                offset += struct.calcsize("<fffffB")
                poses.append(BandPose(z_bar=z_bar, theta_xz=t_xz, theta_yz=t_yz, theta_xu=t_xu,
                                      lambda_u=lam, flat=bool(flat)))
            pose = Pose(x=x, y=y, theta=theta, scale=scale, area=area, bands=poses)
            words.append(SentenceWord(code=code, kind=_KINDS[kind], node=node, pose=pose))
    except (struct.error, IndexError, UnicodeDecodeError) as e:
        raise FormatVersionError(f"Corrupt binary sentence: {e}")
    header = SentenceHeader(width=width, height=height, bands=bands, depth=depth,
                            precision=precision, alphabet_digest=digest)
    return Sentence(header=header, words=words)


def write_sentence(sentence: Sentence, path: Union[str, Path], binary: bool = False) -> Path:
    path = Path(path)
    if not binary:
        return write_record(sentence, path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(sentence_to_bytes(sentence))
    logger.info(f"Wrote {path}")
    return path


def read_sentence(path: Union[str, Path]) -> Sentence:
    """Binary or JSON sentence, told apart by the magic bytes."""
    data = Path(path).read_bytes()
    if data[:4] == SENTENCE_MAGIC:
        return sentence_from_bytes(data)
    sentence = Sentence.model_validate_json(data)
    if sentence.header.format != SENTENCE_FORMAT:
        raise FormatVersionError(f"Unsupported sentence format '{sentence.header.format}'")
    return sentence
