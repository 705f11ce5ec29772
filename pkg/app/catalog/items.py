"""
Item Catalog
The item space: contiguous item indices, unique external ids, titles
"""
import logging
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from app.core.artifacts import iter_jsonl, write_jsonl

logger = logging.getLogger(__name__)


class Item(BaseModel):
    """A single recommendable item"""
    model_config = ConfigDict(frozen=True)

    item_index: int = Field(..., ge=0, description="Ordinal in [0, |I|)")
    external_id: str = Field(..., description="Opaque identifier from the source data")
    title: str = Field("", description="Item title text")


class ItemCatalog:
    """
    Ordered item space

    Index i always stores the Item with item_index == i, and external ids
    are unique. Immutable after construction.
    """

    def __init__(self, items: Iterable[Item]):
        items = list(items)
        by_external: Dict[str, int] = {}
        for position, item in enumerate(items):
            if item.item_index != position:
                raise ValueError(
                    f"Item at position {position} has item_index {item.item_index}; "
                    f"indices must be contiguous from 0"
                )
            if item.external_id in by_external:
                raise ValueError(f"Duplicate external_id {item.external_id!r}")
            by_external[item.external_id] = position

        self._items: List[Item] = items
        self._by_external = by_external

    @classmethod
    def from_records(cls, records: Iterable[tuple]) -> "ItemCatalog":
        """Build from (external_id, title) pairs; item_index follows order"""
        return cls(
            Item(item_index=i, external_id=str(external_id), title=title)
            for i, (external_id, title) in enumerate(records)
        )

    @property
    def count(self) -> int:
        return len(self._items)

    @property
    def items(self) -> List[Item]:
        return list(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Item]:
        return iter(self._items)

    def __getitem__(self, item_index: int) -> Item:
        self.validate_index(item_index)
        return self._items[item_index]

    def validate_index(self, item_index: int) -> None:
        if not 0 <= item_index < len(self._items):
            raise ValueError(f"item_index {item_index} out of range [0, {len(self._items)})")

    def index_of(self, external_id: str) -> Optional[int]:
        return self._by_external.get(external_id)

    def title(self, item_index: int) -> str:
        return self[item_index].title

    def titles(self) -> List[str]:
        return [item.title for item in self._items]

    def save(self, path: Union[str, Path]) -> Path:
        """Write JSON-lines {external_id, title}; item_index is implied by line order"""
        path = write_jsonl(
            path,
            ({"external_id": item.external_id, "title": item.title} for item in self._items)
        )
        logger.info(f"Saved catalog of {self.count} items to {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ItemCatalog":
        records = []
        for line_number, record in iter_jsonl(path):
            if "external_id" not in record:
                raise ValueError(f"{path}: line {line_number}: missing external_id")
            records.append((str(record["external_id"]), str(record.get("title", ""))))
        return cls.from_records(records)
