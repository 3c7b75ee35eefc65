from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from ..core.config import ALPHABET_FORMAT, DESCRIPTORS_FORMAT, DICTIONARY_FORMAT, SENTENCE_FORMAT, TREE_FORMAT


class Modality(str, Enum):
    MONO = "mono"
    MULTI = "multi"


class AggregationOutcome(str, Enum):
    LEAF = "leaf"
    PROPAGATED = "propagated"
    COMBINED = "combined"
    FITTED = "fitted"
    SPLIT = "split"


class WordKind(str, Enum):
    LEAF = "leaf"
    COMPOUND = "compound"


class TreeNodeRecord(BaseModel):
    id: int
    parent: Optional[int] = None
    depth: int
    order: int = Field(ge=1, le=3)
    card: int = Field(ge=1)
    center: List[float]
    band_means: List[float]
    coefficients: List[List[float]]
    error: float
    children: List[int] = []
    unmergeable: bool = False
    outcome: AggregationOutcome = AggregationOutcome.LEAF
    degenerate: bool = False


class TreeRecord(BaseModel):
    """Decomposition tree; leaf pixels live in the referenced label map."""
    format: str = TREE_FORMAT
    width: int
    height: int
    bands: int
    depth: int
    precision: float
    min_card: int
    label_map: str
    nodes: List[TreeNodeRecord]


class SegmentStats(BaseModel):
    leaf_count: int
    node_count: int
    max_error: float
    order_histogram: Dict[str, int]


class DomainRecord(BaseModel):
    """Domain attributes in attribute-table column order."""
    x: float
    y: float
    angle: float
    scale: float
    surface: int
    eccentricity: float
    asymmetries: List[float]
    isotropic: bool = False
    degenerate: bool = False


class BandRenderingRecord(BaseModel):
    invariants: List[float]
    z_bar: float
    theta_xz: float
    theta_yz: float
    theta_xu: float
    lambda_u: float
    flat: bool = False


class NodeDescriptorRecord(BaseModel):
    id: int
    depth: int
    leaves: List[int]
    domain: DomainRecord
    rendering: List[BandRenderingRecord]
    label: Optional[str] = None
    series: Optional[List[List[float]]] = None
    series_label: Optional[str] = None


class DescriptorsRecord(BaseModel):
    format: str = DESCRIPTORS_FORMAT
    tree: str
    nodes: List[NodeDescriptorRecord]


class AlphabetEntryRecord(BaseModel):
    code: str
    domain_cell: int
    rendering_cells: List[int]
    domain_vector: List[float]
    rendering_vectors: List[List[float]]
    count: int = Field(ge=1)
    labels: Dict[str, int] = {}
    mask: Optional[str] = None


class WordEntryRecord(BaseModel):
    code: str
    letters: List[str]
    count: int = Field(ge=1)
    labels: Dict[str, int] = {}


class AlphabetRecord(BaseModel):
    format: str = ALPHABET_FORMAT
    profile: str
    vq_bits: int
    clamp: float
    mask_bits: int
    bands: int
    entries: List[AlphabetEntryRecord]


class DictionaryRecord(BaseModel):
    """Compound words over an alphabet, identified by its digest."""
    format: str = DICTIONARY_FORMAT
    alphabet_digest: str
    words: List[WordEntryRecord]
    synonyms: Dict[str, List[str]] = {}


class BandPose(BaseModel):
    z_bar: float
    theta_xz: float
    theta_yz: float
    theta_xu: float
    lambda_u: float
    flat: bool = False


class Pose(BaseModel):
    x: float
    y: float
    theta: float
    scale: float
    area: int
    bands: List[BandPose]


class SentenceWord(BaseModel):
    code: str
    kind: WordKind = WordKind.LEAF
    node: int
    pose: Pose


class SentenceHeader(BaseModel):
    format: str = SENTENCE_FORMAT
    width: int
    height: int
    bands: int
    depth: int
    precision: float
    alphabet_digest: str


class Sentence(BaseModel):
    header: SentenceHeader
    words: List[SentenceWord]


class CodecReport(BaseModel):
    words: int
    leaves: int
    letters: int
    dictionary_words: int
    max_error: float
    interior_max_error: float
    psnr: Optional[float] = None
