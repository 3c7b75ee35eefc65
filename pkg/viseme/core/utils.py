import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, List, Optional, TypeVar, Union

from pydantic import BaseModel

from .config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """
    Apply fn to every item, keeping input order.

    Args:
        fn: Pure function of one item
        items: Inputs
        threads: Worker count; defaults to VISEME_THREADS

    Returns:
        List of results in the order of items
    """
    items = list(items)
    workers = threads if threads is not None else settings.THREADS
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def ensure_dir(path: Union[str, Path]) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_record(record: BaseModel, path: Union[str, Path]) -> Path:
    """Write a pydantic record as indented JSON with a trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(record.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def read_record(model: type, path: Union[str, Path]):
    path = Path(path)
    return model.model_validate_json(path.read_text(encoding="utf-8"))
