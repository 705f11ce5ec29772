"""
Base Tokenizer
Whitespace word-level vocabulary built from the training corpus
"""
import logging
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Union

from app.core.artifacts import read_json, write_json

logger = logging.getLogger(__name__)

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
BOS_TOKEN = "<bos>"
EOS_TOKEN = "<eos>"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, BOS_TOKEN, EOS_TOKEN)


class BaseTokenizer:
    """
    Bijection between word strings and ids in [0, V_base)

    Specials occupy ids 0-3 (PAD, UNK, BOS, EOS). Words the vocabulary does
    not know encode to UNK.
    """

    def __init__(self, token_to_id: Dict[str, int]):
        for special in SPECIAL_TOKENS:
            if special not in token_to_id:
                raise ValueError(f"Tokenizer manifest is missing special token {special!r}")
        ids = sorted(token_to_id.values())
        if ids != list(range(len(ids))):
            raise ValueError("Token ids must be contiguous from 0")

        self.token_to_id: Dict[str, int] = dict(token_to_id)
        self.id_to_token: Dict[int, str] = {i: t for t, i in token_to_id.items()}
        self.pad_id = self.token_to_id[PAD_TOKEN]
        self.unk_id = self.token_to_id[UNK_TOKEN]
        self.bos_id = self.token_to_id[BOS_TOKEN]
        self.eos_id = self.token_to_id[EOS_TOKEN]

    @property
    def size(self) -> int:
        """V_base"""
        return len(self.token_to_id)

    def __len__(self) -> int:
        return self.size

    def encode(self, text: str) -> List[int]:
        return [self.token_to_id.get(word, self.unk_id) for word in text.split()]

    def decode(self, ids: Iterable[int], skip_specials: bool = True) -> str:
        words = []
        for token_id in ids:
            token = self.id_to_token.get(int(token_id), UNK_TOKEN)
            if skip_specials and token in SPECIAL_TOKENS:
                continue
            words.append(token)
        return " ".join(words)

    def save(self, path: Union[str, Path]) -> Path:
        """Persist the JSON manifest (token string -> id)"""
        return write_json(path, {"token_to_id": self.token_to_id})

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BaseTokenizer":
        manifest = read_json(path)
        return cls({str(t): int(i) for t, i in manifest["token_to_id"].items()})


def build_base_tokenizer(corpus: Iterable[str], min_frequency: int = 1) -> BaseTokenizer:
    """
    Build a word-level tokenizer from a text corpus

    Words with frequency >= min_frequency are kept, in order of first
    appearance, after the four specials.

    Args:
        corpus: Texts (titles, instruction templates)
        min_frequency: Frequency floor for a word to enter the vocabulary

    Returns:
        BaseTokenizer with V_base = 4 + number of kept words
    """
    if min_frequency < 1:
        raise ValueError(f"min_frequency must be >= 1, got {min_frequency}")

    counts: Counter = Counter()
    first_seen: Dict[str, int] = {}
    n_texts = 0
    for text in corpus:
        n_texts += 1
        for word in text.split():
            counts[word] += 1
            if word not in first_seen:
                first_seen[word] = len(first_seen)

    if n_texts == 0:
        raise ValueError("Cannot build a tokenizer from an empty corpus")

    token_to_id = {token: i for i, token in enumerate(SPECIAL_TOKENS)}
    for word in sorted(first_seen, key=first_seen.__getitem__):
        if counts[word] >= min_frequency and word not in token_to_id:
            token_to_id[word] = len(token_to_id)

    logger.info(
        f"Built base tokenizer: {len(token_to_id)} tokens from {n_texts} texts "
        f"({len(first_seen)} distinct words, floor {min_frequency})"
    )
    return BaseTokenizer(token_to_id)
