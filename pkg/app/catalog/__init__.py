"""
Catalog and Vocabulary
Item space, base tokenizer, vocabulary expansion and prompt encoding
"""
from app.catalog.items import Item, ItemCatalog
from app.catalog.tokenizer import BaseTokenizer, build_base_tokenizer, SPECIAL_TOKENS
from app.catalog.vocabulary import (
    ExpandedVocabulary,
    expand_vocabulary,
    item_token_id,
    token_to_item
)
from app.catalog.prompts import (
    LossScope,
    PromptTemplate,
    PromptSample,
    EncodedSample,
    encode_sample,
    encode_item_prompt
)

__all__ = [
    # Items
    "Item",
    "ItemCatalog",
    # Tokenizer
    "BaseTokenizer",
    "build_base_tokenizer",
    "SPECIAL_TOKENS",
    # Vocabulary
    "ExpandedVocabulary",
    "expand_vocabulary",
    "item_token_id",
    "token_to_item",
    # Prompts
    "LossScope",
    "PromptTemplate",
    "PromptSample",
    "EncodedSample",
    "encode_sample",
    "encode_item_prompt",
]
