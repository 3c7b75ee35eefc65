# Models package initialization
from .schemas import (
    Modality,
    AggregationOutcome,
    WordKind,
    TreeRecord,
    TreeNodeRecord,
    SegmentStats,
    DescriptorsRecord,
    AlphabetRecord,
    DictionaryRecord,
    Sentence,
    CodecReport,
)

__all__ = [
    "Modality",
    "AggregationOutcome",
    "WordKind",
    "TreeRecord",
    "TreeNodeRecord",
    "SegmentStats",
    "DescriptorsRecord",
    "AlphabetRecord",
    "DictionaryRecord",
    "Sentence",
    "CodecReport",
]
