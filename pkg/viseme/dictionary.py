"""
Visual Alphabet and Dictionary
------------------------------
Vector quantization of normalized descriptors into binary trees over the
regularly decomposed unit hypercube. Simple shapes quantize into the
alphabet (one domain tree plus one rendering tree per band); compound shapes
become words, ordered lists of their leaves' letters.
"""

import logging
import math
import struct
import threading
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core.errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyTreeError,
    FormatVersionError,
    InvalidDescriptorError,
    UnknownCodeError,
)
from .core.utils import parallel_map, sha256_hex
from .domain import DomainDescriptor, image_frame, own_frame
from .grouping import Grouping
from .hilbert import hilbert_kd_index, order_points
from .models.schemas import AlphabetEntryRecord, AlphabetRecord, DictionaryRecord, WordEntryRecord
from .rendering import BandRendering, RenderingDescriptor

logger = logging.getLogger(__name__)

TREE_MAGIC = b"VQT1"
NO_LABEL = 0xFFFFFFFF
MAX_CODE_BITS = 64

# Own-frame half extent of a domain mask, in major inertia lengths
MASK_SPAN = 4.0
MIN_MASK_LENGTH = 0.5

# Global order of leaf centers inside a word
WORD_ORDER_BITS = 16

BELOW_ONE = math.nextafter(1.0, 0.0)

PROFILES = ("full", "convex-hull")
DOMAIN_DIMENSIONS = {"full": 5, "convex-hull": 3}
RENDERING_DIMENSIONS = {"full": 5, "convex-hull": 1}


class NodeKind(int, Enum):
    INTERNAL = 0
    WHITE = 1
    BLACK = 2


class _Node:
    __slots__ = ("kind", "left", "right", "labels")

    def __init__(self, kind: NodeKind = NodeKind.WHITE):
        self.kind = kind
        self.left: Optional["_Node"] = None
        self.right: Optional["_Node"] = None
        self.labels: frozenset = frozenset()


def quantize(v: Sequence[float], r: int) -> Tuple[int, ...]:
    """Cell coordinates floor(v * 2**r) of a vector in [0, 1)^k."""
    side = 1 << r
    return tuple(min(int(math.floor(c * side)), side - 1) for c in v)


def interleave(cell: Sequence[int], k: int, r: int) -> int:
    """
    Cell address of k coordinates: level l of the descent halves coordinate
    l % k and reads its bit r - 1 - l // k. The first level is the MSB.
    """
    code = 0
    for level in range(k * r):
        code = (code << 1) | ((cell[level % k] >> (r - 1 - level // k)) & 1)
    return code


def deinterleave(code: int, k: int, r: int) -> Tuple[int, ...]:
    cell = [0] * k
    depth = k * r
    for level in range(depth):
        cell[level % k] = (cell[level % k] << 1) | ((code >> (depth - 1 - level)) & 1)
    return tuple(cell)


def _common_prefix(a: int, b: int, depth: int) -> int:
    diff = a ^ b
    return depth if diff == 0 else depth - diff.bit_length()


def hausdorff_distance(u: Sequence[float], v: Sequence[float], r: int) -> float:
    """
    Side 2**-q of the smallest dyadic cell holding both vectors, q being the
    number of halving rounds over all k coordinates they share.
    """
    if len(u) != len(v):
        raise DimensionMismatchError(f"Vectors of dimension {len(u)} and {len(v)}")
    k = len(u)
    shared = _common_prefix(interleave(quantize(u, r), k, r), interleave(quantize(v, r), k, r), k * r)
    return 2.0 ** -(shared // k)


class QuantTree:
    """
    Binary tree over the unit hypercube [0, 1)^k at r bits per coordinate.

    Leaves are WHITE (empty) or BLACK (full); a BLACK leaf above the full depth
    covers every cell below it. Occurrence counts and labels are kept in side
    maps keyed by the full cell address, so merging never loses them.
    """

    def __init__(self, k: int, r: int):
        if k < 1 or r < 1 or k * r > MAX_CODE_BITS:
            raise ValueError(f"Unsupported tree shape k={k}, r={r}")
        self.k = k
        self.r = r
        self.depth = k * r
        self.root = _Node()
        self.counts: Counter = Counter()
        self.labels: Dict[int, Counter] = {}
        self._lock = threading.Lock()

    # Addressing

    def code_of(self, v: Sequence[float]) -> int:
        values = [float(c) for c in v]
        if len(values) != self.k:
            raise DimensionMismatchError(f"Expected a vector of dimension {self.k}, got {len(values)}")
        for c in values:
            if not (0.0 <= c < 1.0):
                raise InvalidDescriptorError(f"Coordinate {c} outside [0, 1)")
        return interleave(quantize(values, self.r), self.k, self.r)

    def _bit(self, code: int, level: int) -> int:
        return (code >> (self.depth - 1 - level)) & 1

    def _check_code(self, code: int) -> None:
        if not 0 <= code < 1 << self.depth:
            raise UnknownCodeError(f"Cell address {code} outside a {self.depth}-bit tree")

    # Updates

    def insert(self, v: Sequence[float], label: Optional[str] = None, count: int = 1) -> int:
        code = self.code_of(v)
        self.insert_code(code, label, count)
        return code

    def insert_code(self, code: int, label: Optional[str] = None, count: int = 1) -> None:
        """
        Descend along the address, splitting WHITE leaves on the way, blacken
        the reached cell and merge equal BLACK siblings back up.
        """
        self._check_code(code)
        with self._lock:
            path: List[_Node] = []
            node = self.root
            for level in range(self.depth):
                if node.kind is NodeKind.BLACK:
                    break
                if node.kind is NodeKind.WHITE:
                    node.kind = NodeKind.INTERNAL
                    node.left, node.right = _Node(), _Node()
                path.append(node)
                node = node.right if self._bit(code, level) else node.left
            else:
                node.kind = NodeKind.BLACK

            self.counts[code] += count
            if label is not None:
                self.labels.setdefault(code, Counter())[label] += count
                node.labels = node.labels | {label}
            self._merge_up(path)

    @staticmethod
    def _merge_up(path: List[_Node]) -> None:
        for parent in reversed(path):
            left, right = parent.left, parent.right
            if not (left.kind is NodeKind.BLACK and right.kind is NodeKind.BLACK and left.labels == right.labels):
                break
            parent.kind = NodeKind.BLACK
            parent.labels = left.labels
            parent.left = parent.right = None

    # Queries

    def _region_of(self, code: int) -> Tuple[Optional[_Node], int]:
        self._check_code(code)
        node = self.root
        level = 0
        while node.kind is NodeKind.INTERNAL:
            node = node.right if self._bit(code, level) else node.left
            level += 1
        return (node if node.kind is NodeKind.BLACK else None), level

    def contains_code(self, code: int) -> bool:
        return self._region_of(code)[0] is not None

    def membership(self, v: Sequence[float]) -> bool:
        return self.contains_code(self.code_of(v))

    def regions(self) -> Iterator[Tuple[int, int, _Node]]:
        """BLACK leaves as (prefix, level, node), in increasing address order."""
        stack = [(self.root, 0, 0)]
        while stack:
            node, prefix, level = stack.pop()
            if node.kind is NodeKind.BLACK:
                yield prefix, level, node
            elif node.kind is NodeKind.INTERNAL:
                stack.append((node.right, (prefix << 1) | 1, level + 1))
                stack.append((node.left, prefix << 1, level + 1))

    def cells(self) -> List[int]:
        out: List[int] = []
        for prefix, level, _ in self.regions():
            shift = self.depth - level
            out.extend(range(prefix << shift, (prefix + 1) << shift))
        return out

    def cell_count(self) -> int:
        return sum(1 << (self.depth - level) for _, level, _ in self.regions())

    def node_count(self) -> int:
        return sum(1 for _ in self._preorder())

    def is_empty(self) -> bool:
        return self.root.kind is NodeKind.WHITE

    def __len__(self) -> int:
        return self.cell_count()

    def distance(self, u: Sequence[float], v: Sequence[float]) -> float:
        if len(u) != self.k:
            raise DimensionMismatchError(f"Expected a vector of dimension {self.k}, got {len(u)}")
        return hausdorff_distance(u, v, self.r)

    def _precision(self, r_prime: Optional[int]) -> int:
        r_prime = self.r if r_prime is None else r_prime
        if not 1 <= r_prime <= self.r:
            raise ValueError(f"Search precision {r_prime} outside [1, {self.r}]")
        return r_prime

    def nearest(self, v: Sequence[float], r_prime: Optional[int] = None) -> Tuple[int, float]:
        """
        BLACK cell closest to v in the Hausdorff sense at precision r_prime.

        Returns:
            (cell address, distance); ties go to the smaller address
        """
        if self.is_empty():
            raise EmptyTreeError("Nearest-cell query on an empty tree")
        r_prime = self._precision(r_prime)
        query = self.code_of(v)
        full = self.k * r_prime
        best: Optional[Tuple[int, int]] = None
        for prefix, level, _ in self.regions():
            shift = self.depth - level
            shared = _common_prefix(prefix, query >> shift, level)
            if shared < level:
                candidate = prefix << shift
                q = min(shared, full) // self.k
            else:
                keep = max(level, full)
                candidate = (query >> (self.depth - keep)) << (self.depth - keep)
                q = r_prime
            if best is None or q > best[0] or (q == best[0] and candidate < best[1]):
                best = (q, candidate)
        return best[1], 2.0 ** -best[0]

    def rank_by_similarity(self, v: Sequence[float], r_prime: Optional[int] = None) -> List[Tuple[int, float]]:
        """Every occupied cell with its distance to v, closest first."""
        if self.is_empty():
            raise EmptyTreeError("Similarity query on an empty tree")
        r_prime = self._precision(r_prime)
        query = self.code_of(v)
        full = self.k * r_prime
        ranked = [
            (min(_common_prefix(query, code, self.depth), full) // self.k, code)
            for code in self.cells()
        ]
        ranked.sort(key=lambda item: (-item[0], item[1]))
        return [(code, 2.0 ** -q) for q, code in ranked]

    def recognize(self, v: Sequence[float]) -> List[str]:
        """Labels of the closest labelled cell, most frequent first."""
        query = self.code_of(v)
        best: Optional[Tuple[int, int]] = None
        for code, labels in self.labels.items():
            if not labels:
                continue
            q = _common_prefix(query, code, self.depth) // self.k
            if best is None or q > best[0] or (q == best[0] and code < best[1]):
                best = (q, code)
        if best is None:
            return []
        counts = self.labels[best[1]]
        return sorted(counts, key=lambda label: (-counts[label], label))

    def self_sort(self) -> List[int]:
        """Occupied cells in k-dimensional Hilbert order of their coordinates."""
        if self.is_empty():
            raise EmptyTreeError("Cannot sort an empty tree")
        return sorted(self.cells(), key=lambda code: hilbert_kd_index(self.k, self.r, deinterleave(code, self.k, self.r)))

    # Serialization

    def _preorder(self) -> Iterator[_Node]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if node.kind is NodeKind.INTERNAL:
                stack.append(node.right)
                stack.append(node.left)

    def to_bytes(self) -> bytes:
        """
        Little-endian file image: magic, k, r and node count, the 2-bit
        preorder node stream packed MSB first, then (cell, label id, count)
        triples and the label names.
        """
        nodes = list(self._preorder())
        stream = bytearray((len(nodes) + 3) // 4)
        for n, node in enumerate(nodes):
            stream[n // 4] |= int(node.kind) << (6 - 2 * (n % 4))

        names = sorted({label for counts in self.labels.values() for label in counts})
        ids = {name: i for i, name in enumerate(names)}
        triples = []
        for code in sorted(set(self.counts) | set(self.labels)):
            labelled = self.labels.get(code, Counter())
            for name in sorted(labelled):
                triples.append((code, ids[name], labelled[name]))
            rest = self.counts[code] - sum(labelled.values())
            if rest > 0:
                triples.append((code, NO_LABEL, rest))

        out = bytearray(TREE_MAGIC)
        out += struct.pack("<HHI", self.k, self.r, len(nodes))
        out += stream
        out += struct.pack("<I", len(triples))
        for code, label_id, count in triples:
            out += struct.pack("<QII", code, label_id, count)
        out += struct.pack("<I", len(names))
        for name in names:
            encoded = name.encode("utf-8")
            out += struct.pack("<H", len(encoded)) + encoded
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "QuantTree":
        if data[:4] != TREE_MAGIC:
            raise FormatVersionError("Not a quantization tree stream")
        try:
            k, r, node_count = struct.unpack_from("<HHI", data, 4)
            tree = cls(k, r)
            offset = 12
            stream = data[offset:offset + (node_count + 3) // 4]
            offset += (node_count + 3) // 4
            kinds = [NodeKind((stream[n // 4] >> (6 - 2 * (n % 4))) & 3) for n in range(node_count)]
            tree.root = cls._build_nodes(kinds)

            (n_triples,) = struct.unpack_from("<I", data, offset)
            offset += 4
            triples = []
            for _ in range(n_triples):
                triples.append(struct.unpack_from("<QII", data, offset))
                offset += 16
            (n_names,) = struct.unpack_from("<I", data, offset)
            offset += 4
            names = []
            for _ in range(n_names):
                (length,) = struct.unpack_from("<H", data, offset)
                offset += 2
                names.append(data[offset:offset + length].decode("utf-8"))
                offset += length
        except (struct.error, ValueError, IndexError, UnicodeDecodeError) as e:
            raise FormatVersionError(f"Corrupt quantization tree stream: {e}")

        for code, label_id, count in triples:
            tree.counts[code] += count
            if label_id != NO_LABEL:
                label = names[label_id]
                tree.labels.setdefault(code, Counter())[label] += count
                node, _ = tree._region_of(code)
                if node is not None:
                    node.labels = node.labels | {label}
        return tree

    @staticmethod
    def _build_nodes(kinds: List[NodeKind]) -> _Node:
        if not kinds:
            raise ValueError("empty node stream")
        position = 0

        def build() -> _Node:
            nonlocal position
            node = _Node(kinds[position])
            position += 1
            if node.kind is NodeKind.INTERNAL:
                node.left = build()
                node.right = build()
            return node

        root = build()
        if position != len(kinds):
            raise ValueError(f"{len(kinds) - position} trailing nodes")
        return root


def write_tree(tree: QuantTree, path) -> None:
    with open(path, "wb") as f:
        f.write(tree.to_bytes())
    logger.info(f"Wrote quantization tree ({tree.cell_count()} cells) to {path}")


def read_tree(path) -> QuantTree:
    with open(path, "rb") as f:
        return QuantTree.from_bytes(f.read())


def _unit(values: np.ndarray, clamp: float) -> List[float]:
    mapped = (np.clip(values, -clamp, clamp) + clamp) / (2.0 * clamp)
    return [min(float(c), BELOW_ONE) for c in mapped]


def normalize_descriptor(d: Union[DomainDescriptor, BandRendering, RenderingDescriptor],
                         profile: str = "full", clamp: float = 2.0) -> List[float]:
    """
    Map a descriptor into [0, 1)^k.

    Args:
        d: Domain descriptor, one band's rendering or a whole rendering descriptor
        profile: "full" or "convex-hull"
        clamp: Bound A; signed values are clipped to [-A, A] and mapped by (v + A) / 2A

    Returns:
        Normalized coordinates
    """
    if profile not in PROFILES:
        raise ConfigError(f"Unknown descriptor profile '{profile}'")
    if isinstance(d, RenderingDescriptor):
        out: List[float] = []
        for band in d.bands:
            out.extend(normalize_descriptor(band, profile, clamp))
        return out

    if isinstance(d, DomainDescriptor):
        values = d.invariant_vector()
        if not np.all(np.isfinite(values)):
            raise InvalidDescriptorError(f"Non-finite domain descriptor {values.tolist()}")
        eccentricity = min(max(float(values[0]), 0.0), BELOW_ONE)
        signed = values[1:] if profile == "full" else values[[1, 4]]
        return [eccentricity] + _unit(signed, clamp)

    values = d.invariant_vector()
    if not np.all(np.isfinite(values)):
        raise InvalidDescriptorError(f"Non-finite rendering descriptor {values.tolist()}")
    return _unit(values if profile == "full" else values[:1], clamp)


def mask_length(d: DomainDescriptor) -> float:
    return max(d.length, MIN_MASK_LENGTH)


def domain_mask(xs: np.ndarray, ys: np.ndarray, d: DomainDescriptor, bits: int = 6) -> QuantTree:
    """
    Quaternary mask of a domain in its own frame.

    The square [-4L, 4L]^2 of principal coordinates, L the major inertia
    length, is cut into 2**bits cells per side. A cell is set when a domain
    pixel falls into it or when its center maps back onto a domain pixel.
    """
    side = 1 << bits
    length = mask_length(d)
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    grid = np.zeros((side, side), dtype=bool)

    u1, u2 = own_frame(d, xs, ys)
    n1 = (u1 / length + MASK_SPAN) / (2 * MASK_SPAN)
    n2 = (u2 / length + MASK_SPAN) / (2 * MASK_SPAN)
    inside = (n1 >= 0) & (n1 < 1) & (n2 >= 0) & (n2 < 1)
    grid[np.floor(n1[inside] * side).astype(int), np.floor(n2[inside] * side).astype(int)] = True

    x0, y0 = xs.min(), ys.min()
    raster = np.zeros((ys.max() - y0 + 1, xs.max() - x0 + 1), dtype=bool)
    raster[ys - y0, xs - x0] = True
    centers = ((np.arange(side) + 0.5) / side * 2 * MASK_SPAN - MASK_SPAN) * length
    c1, c2 = np.meshgrid(centers, centers, indexing="ij")
    px, py = image_frame(d, c1, c2)
    px = np.rint(px).astype(np.int64) - x0
    py = np.rint(py).astype(np.int64) - y0
    hit = (px >= 0) & (px < raster.shape[1]) & (py >= 0) & (py < raster.shape[0])
    back = np.zeros_like(grid)
    back[hit] = raster[py[hit], px[hit]]
    grid |= back

    tree = QuantTree(2, bits)
    for i1, i2 in zip(*np.nonzero(grid)):
        tree.insert_code(interleave((int(i1), int(i2)), 2, bits))
    return tree


def mask_grid(mask: QuantTree) -> np.ndarray:
    """Boolean occupancy indexed [i1, i2] by own-frame cell."""
    side = 1 << mask.r
    grid = np.zeros((side, side), dtype=bool)
    for code in mask.cells():
        i1, i2 = deinterleave(code, 2, mask.r)
        grid[i1, i2] = True
    return grid


@dataclass
class AlphabetEntry:
    """A letter: one occupied domain cell with one rendering cell per band."""
    code: str
    domain_cell: int
    rendering_cells: Tuple[int, ...]
    domain_vector: np.ndarray
    rendering_vectors: List[np.ndarray]
    count: int = 0
    labels: Counter = field(default_factory=Counter)
    mask: Optional[QuantTree] = None

    def absorb(self, domain_vector: np.ndarray, rendering_vectors: Sequence[np.ndarray]) -> None:
        """Count one more occurrence, keeping running-mean representatives."""
        n = self.count
        self.domain_vector = (self.domain_vector * n + domain_vector) / (n + 1)
        self.rendering_vectors = [(old * n + new) / (n + 1) for old, new in zip(self.rendering_vectors, rendering_vectors)]
        self.count = n + 1


class Alphabet:
    def __init__(self, bands: int, r: int = 4, profile: str = "full", clamp: float = 2.0, mask_bits: int = 6):
        if profile not in PROFILES:
            raise ConfigError(f"Unknown descriptor profile '{profile}'")
        self.bands = bands
        self.r = r
        self.profile = profile
        self.clamp = clamp
        self.mask_bits = mask_bits
        self.domain_tree = QuantTree(DOMAIN_DIMENSIONS[profile], r)
        self.rendering_trees = [QuantTree(RENDERING_DIMENSIONS[profile], r) for _ in range(bands)]
        self.entries: Dict[str, AlphabetEntry] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, code: str) -> AlphabetEntry:
        try:
            return self.entries[code]
        except KeyError:
            raise UnknownCodeError(f"Unknown letter '{code}'")

    def letter_key(self, domain_cell: int, rendering_cells: Sequence[int]) -> str:
        parts = [f"{domain_cell:0{-(-self.domain_tree.depth // 4)}x}"]
        parts += [f"{cell:0{-(-tree.depth // 4)}x}" for cell, tree in zip(rendering_cells, self.rendering_trees)]
        return ".".join(parts)

    def add(self, domain: DomainDescriptor, rendering: RenderingDescriptor, label: Optional[str] = None,
            mask: Optional[QuantTree] = None) -> str:
        """Quantize one simple shape and return its letter."""
        if len(rendering.bands) != self.bands:
            raise DimensionMismatchError(f"Alphabet has {self.bands} bands, shape has {len(rendering.bands)}")
        domain_cell = self.domain_tree.insert(normalize_descriptor(domain, self.profile, self.clamp), label)
        rendering_cells = tuple(
            tree.insert(normalize_descriptor(band, self.profile, self.clamp), label)
            for tree, band in zip(self.rendering_trees, rendering.bands)
        )
        code = self.letter_key(domain_cell, rendering_cells)
        domain_vector = domain.invariant_vector()
        rendering_vectors = [band.invariant_vector() for band in rendering.bands]
        entry = self.entries.get(code)
        if entry is None:
            entry = AlphabetEntry(code, domain_cell, rendering_cells, domain_vector,
                                  rendering_vectors, count=1, mask=mask)
            self.entries[code] = entry
        else:
            entry.absorb(domain_vector, rendering_vectors)
            if entry.mask is None:
                entry.mask = mask
        if label is not None:
            entry.labels[label] += 1
        return code

    def sorted_codes(self) -> List[str]:
        """Letters ordered by the Hilbert order of their domain cells, then by code."""
        rank = {cell: n for n, cell in enumerate(self.domain_tree.self_sort())} if self.entries else {}
        return sorted(self.entries, key=lambda code: (rank[self.entries[code].domain_cell], code))

    def to_record(self) -> AlphabetRecord:
        entries = []
        for code in sorted(self.entries):
            entry = self.entries[code]
            entries.append(AlphabetEntryRecord(
                code=code,
                domain_cell=entry.domain_cell,
                rendering_cells=list(entry.rendering_cells),
                domain_vector=[float(v) for v in entry.domain_vector],
                rendering_vectors=[[float(v) for v in vec] for vec in entry.rendering_vectors],
                count=entry.count,
                labels=dict(sorted(entry.labels.items())),
                mask=entry.mask.to_bytes().hex() if entry.mask is not None else None,
            ))
        return AlphabetRecord(profile=self.profile, vq_bits=self.r, clamp=self.clamp,
                              mask_bits=self.mask_bits, bands=self.bands, entries=entries)

    @classmethod
    def from_record(cls, record: AlphabetRecord) -> "Alphabet":
        alphabet = cls(record.bands, record.vq_bits, record.profile, record.clamp, record.mask_bits)
        for rec in record.entries:
            if len(rec.rendering_cells) != record.bands:
                raise FormatVersionError(f"Letter {rec.code} has {len(rec.rendering_cells)} rendering cells")
            trees = [(alphabet.domain_tree, rec.domain_cell)] + list(zip(alphabet.rendering_trees, rec.rendering_cells))
            labelled = sum(rec.labels.values())
            for tree, cell in trees:
                for label, count in rec.labels.items():
                    tree.insert_code(cell, label, count)
                if rec.count > labelled:
                    tree.insert_code(cell, None, rec.count - labelled)
            alphabet.entries[rec.code] = AlphabetEntry(
                code=rec.code,
                domain_cell=rec.domain_cell,
                rendering_cells=tuple(rec.rendering_cells),
                domain_vector=np.array(rec.domain_vector, dtype=float),
                rendering_vectors=[np.array(v, dtype=float) for v in rec.rendering_vectors],
                count=rec.count,
                labels=Counter(rec.labels),
                mask=QuantTree.from_bytes(bytes.fromhex(rec.mask)) if rec.mask else None,
            )
        return alphabet

    def digest(self) -> str:
        return record_digest(self.to_record())


def record_digest(record: AlphabetRecord) -> str:
    """Identity of an alphabet file, carried by sentences and dictionaries."""
    return sha256_hex(record.model_dump_json().encode("utf-8"))


def build_alphabet(grouping: Grouping, r: int = 4, profile: str = "full", clamp: float = 2.0,
                   mask_bits: int = 6, include_degenerate: bool = True,
                   alphabet: Optional[Alphabet] = None) -> Tuple[Alphabet, Dict[int, str]]:
    """
    Quantize every leaf of a grouped tree.

    Args:
        grouping: Grouped decomposition tree
        r: Bits per normalized coordinate
        profile: "full" or "convex-hull"
        clamp: Signed coordinate bound
        mask_bits: Own-frame mask resolution per side, in bits
        include_degenerate: Keep leaves whose domain is a segment or a point
        alphabet: Existing alphabet to enrich; its parameters win

    Returns:
        (alphabet, letter of each coded leaf by node id)
    """
    tree = grouping.tree
    if alphabet is None:
        alphabet = Alphabet(tree.image.bands, r, profile, clamp, mask_bits)
    elif alphabet.bands != tree.image.bands:
        raise ConfigError(f"Alphabet has {alphabet.bands} bands, image has {tree.image.bands}")

    leaves = [s for s in grouping.leaves() if include_degenerate or not s.domain.degenerate]
    skipped = len(grouping.leaves()) - len(leaves)
    if skipped:
        logger.info(f"Skipping {skipped} degenerate leaves")

    def mask_of(shape) -> QuantTree:
        samples = tree.node(shape.node_id).samples
        return domain_mask(samples.xs, samples.ys, shape.domain, alphabet.mask_bits)

    masks = parallel_map(mask_of, leaves)
    letters: Dict[int, str] = {}
    for shape, mask in zip(leaves, masks):
        letters[shape.node_id] = alphabet.add(shape.domain, shape.rendering, shape.label, mask)
    logger.info(f"Alphabet holds {len(alphabet)} letters after {len(leaves)} leaves")
    return alphabet, letters


@dataclass
class DictEntry:
    code: str
    letters: Tuple[str, ...]
    count: int = 0
    labels: Counter = field(default_factory=Counter)


@dataclass
class Dictionary:
    """Words over one alphabet, deduplicated with counts and labels."""
    alphabet_digest: str
    words: Dict[str, DictEntry] = field(default_factory=dict)
    node_words: Dict[int, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.words)

    def __getitem__(self, code: str) -> DictEntry:
        try:
            return self.words[code]
        except KeyError:
            raise UnknownCodeError(f"Unknown word '{code}'")

    @staticmethod
    def word_key(letters: Sequence[str]) -> str:
        return "+".join(letters)

    def add(self, letters: Sequence[str], label: Optional[str] = None) -> str:
        if not letters:
            raise ValueError("A word needs at least one letter")
        code = self.word_key(letters)
        entry = self.words.setdefault(code, DictEntry(code, tuple(letters)))
        entry.count += 1
        if label is not None:
            entry.labels[label] += 1
        return code

    def synonyms(self) -> Dict[str, List[str]]:
        """Labels shared by two or more distinct words."""
        by_label: Dict[str, List[str]] = {}
        for code in sorted(self.words):
            for label in self.words[code].labels:
                by_label.setdefault(label, []).append(code)
        return {label: codes for label, codes in sorted(by_label.items()) if len(codes) > 1}

    def to_record(self) -> DictionaryRecord:
        words = [
            WordEntryRecord(code=code, letters=list(entry.letters), count=entry.count,
                            labels=dict(sorted(entry.labels.items())))
            for code, entry in sorted(self.words.items())
        ]
        return DictionaryRecord(alphabet_digest=self.alphabet_digest, words=words, synonyms=self.synonyms())

    @classmethod
    def from_record(cls, record: DictionaryRecord) -> "Dictionary":
        dictionary = cls(record.alphabet_digest)
        for rec in record.words:
            dictionary.words[rec.code] = DictEntry(rec.code, tuple(rec.letters), rec.count, Counter(rec.labels))
        return dictionary


def leaf_ranks(grouping: Grouping) -> Dict[int, int]:
    """Global Hilbert rank of every leaf center within the image box."""
    image = grouping.tree.image
    leaves = grouping.tree.leaves()
    order = order_points([leaf.center for leaf in leaves], WORD_ORDER_BITS, (0.0, 0.0, image.width, image.height))
    return {leaves[n].node_id: rank for rank, n in enumerate(order)}


def build_dictionary(grouping: Grouping, alphabet: Alphabet, letters: Dict[int, str],
                     dictionary: Optional[Dictionary] = None, skip_uncoded: bool = False) -> Dictionary:
    """
    One word per node: the letters of its member leaves in Hilbert order of
    their centers. A single leaf makes a one-letter word.

    Raises:
        UnknownCodeError: a member leaf has no letter and skip_uncoded is off
    """
    digest = alphabet.digest()
    if dictionary is None:
        dictionary = Dictionary(digest)
    else:
        dictionary.alphabet_digest = digest
    ranks = leaf_ranks(grouping)
    for node_id in sorted(grouping.shapes):
        shape = grouping.shapes[node_id]
        members = sorted(shape.leaf_ids, key=lambda leaf: ranks[leaf])
        missing = [leaf for leaf in members if leaf not in letters]
        if missing and not skip_uncoded:
            raise UnknownCodeError(f"Leaf {missing[0]} of node {node_id} has no letter")
        word = [letters[leaf] for leaf in members if leaf in letters]
        if word:
            dictionary.node_words[node_id] = dictionary.add(word, shape.label)
    logger.info(f"Dictionary holds {len(dictionary)} words, {len(dictionary.synonyms())} shared labels")
    return dictionary
