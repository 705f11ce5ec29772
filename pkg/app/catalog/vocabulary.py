"""
Expanded Vocabulary
Every item gets one token appended after the base vocabulary
"""
from dataclasses import dataclass
from typing import Optional

from app.catalog.items import ItemCatalog
from app.catalog.tokenizer import BaseTokenizer


@dataclass(frozen=True)
class ExpandedVocabulary:
    """Item i <-> token id base_size + i"""
    base_size: int
    item_count: int

    def __post_init__(self):
        if self.base_size < 1 or self.item_count < 0:
            raise ValueError(
                f"Invalid vocabulary sizes: base_size={self.base_size}, item_count={self.item_count}"
            )

    @property
    def total_size(self) -> int:
        return self.base_size + self.item_count

    def item_token_id(self, item_index: int) -> int:
        if not 0 <= item_index < self.item_count:
            raise ValueError(f"item_index {item_index} out of range [0, {self.item_count})")
        return self.base_size + item_index

    def token_to_item(self, token_id: int) -> Optional[int]:
        """Inverse of item_token_id; None for base tokens and ids past the tail"""
        if self.base_size <= token_id < self.total_size:
            return token_id - self.base_size
        return None

    def is_item_token(self, token_id: int) -> bool:
        return self.token_to_item(token_id) is not None

    def render_token(self, token_id: int, tokenizer: BaseTokenizer) -> str:
        """Human-readable form: <|i|> for items, the word otherwise"""
        item_index = self.token_to_item(token_id)
        if item_index is not None:
            return f"<|{item_index}|>"
        return tokenizer.id_to_token.get(int(token_id), "<unk>")


def expand_vocabulary(tokenizer: BaseTokenizer, catalog: ItemCatalog) -> ExpandedVocabulary:
    """Append one token per catalog item after the base vocabulary"""
    return ExpandedVocabulary(base_size=tokenizer.size, item_count=catalog.count)


def item_token_id(vocab: ExpandedVocabulary, item_index: int) -> int:
    return vocab.item_token_id(item_index)


def token_to_item(vocab: ExpandedVocabulary, token_id: int) -> Optional[int]:
    return vocab.token_to_item(token_id)
