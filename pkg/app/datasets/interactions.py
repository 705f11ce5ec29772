"""
Interaction Log Ingestion
JSON-lines {user_id, external_item_id, title, timestamp?} -> catalog + sequences
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator

from app.catalog.items import ItemCatalog
from app.core.artifacts import iter_jsonl, write_jsonl

logger = logging.getLogger(__name__)


class InteractionRecord(BaseModel):
    """One line of the interaction log"""
    user_id: str
    external_item_id: str
    title: str = ""
    timestamp: Optional[float] = Field(None, description="Event time; file order is used when absent")

    @field_validator("user_id", "external_item_id", mode="before")
    @classmethod
    def coerce_id(cls, value):
        if value is None or isinstance(value, (dict, list)):
            raise ValueError("identifier must be a string or number")
        return str(value)


class InteractionSequence(BaseModel):
    """A user's chronological item indices"""
    user_id: str
    items: List[int] = Field(..., description="Chronological item indices")

    @field_validator("items")
    @classmethod
    def at_least_two(cls, value):
        if len(value) < 2:
            raise ValueError("a sequence needs at least one history item and one target")
        return value


def load_interactions(
    path: Union[str, Path],
    catalog: Optional[ItemCatalog] = None
) -> Tuple[ItemCatalog, List[InteractionSequence]]:
    """
    Parse an interaction log

    Items are indexed by first appearance (duplicate external ids share one
    index, the first title wins). Each user's events are sorted by timestamp
    when present, file order otherwise. Sequences shorter than two items are
    dropped with a warning.

    When `catalog` is given, items keep its indexing and an external id it
    does not know is an error.

    Raises:
        FileNotFoundError: path does not exist
        ValueError: malformed record, with its line number
    """
    item_index: Dict[str, int] = {}
    item_records: List[Tuple[str, str]] = []
    rows = []

    for line_number, raw in iter_jsonl(path):
        try:
            record = InteractionRecord.model_validate(raw)
        except ValidationError as e:
            raise ValueError(f"{path}: line {line_number}: malformed record: {e.errors()[0]['msg']}") from e

        if catalog is not None:
            known = catalog.index_of(record.external_item_id)
            if known is None:
                raise ValueError(
                    f"{path}: line {line_number}: unknown external_item_id {record.external_item_id!r}"
                )
            item_index[record.external_item_id] = known
        elif record.external_item_id not in item_index:
            item_index[record.external_item_id] = len(item_records)
            item_records.append((record.external_item_id, record.title))

        rows.append({
            "user_id": record.user_id,
            "item_index": item_index[record.external_item_id],
            "timestamp": record.timestamp,
            "line": line_number,
        })

    if catalog is None:
        catalog = ItemCatalog.from_records(item_records)
    if not rows:
        logger.warning(f"No interactions found in {path}")
        return catalog, []

    frame = pd.DataFrame(rows)
    frame["timestamp"] = pd.to_numeric(frame["timestamp"], errors="coerce")
    first_line = frame.groupby("user_id", sort=False)["line"].transform("min")
    frame = frame.assign(user_order=first_line).sort_values(
        ["user_order", "timestamp", "line"],
        kind="mergesort",
        na_position="last"
    )

    sequences: List[InteractionSequence] = []
    dropped = 0
    for _, group in frame.groupby("user_order", sort=True):
        items = group["item_index"].astype(int).tolist()
        if len(items) < 2:
            dropped += 1
            continue
        sequences.append(InteractionSequence(user_id=str(group["user_id"].iloc[0]), items=items))

    if dropped:
        logger.warning(f"Dropped {dropped} sequences shorter than 2 items from {path}")
    logger.info(f"Loaded {catalog.count} items and {len(sequences)} sequences from {path}")
    return catalog, sequences


def write_interactions(
    path: Union[str, Path],
    catalog: ItemCatalog,
    sequences: List[InteractionSequence]
) -> Path:
    """Emit sequences in the input schema; timestamps are per-user positions"""
    def records():
        for sequence in sequences:
            for position, item in enumerate(sequence.items):
                yield {
                    "user_id": sequence.user_id,
                    "external_item_id": catalog[item].external_id,
                    "title": catalog[item].title,
                    "timestamp": position,
                }
    return write_jsonl(path, records())
