"""
Synthetic Markov Corpora
Category-structured items, category-word titles, first-order Markov sequences
"""
import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.catalog.items import ItemCatalog
from app.core.seeding import derive_seed
from app.datasets.interactions import InteractionSequence, write_interactions

logger = logging.getLogger(__name__)

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


class SyntheticSpec(BaseModel):
    """Generator settings for a synthetic interaction corpus"""
    n_items: int = Field(200, ge=2, description="Catalog size |I|")
    n_categories: int = Field(10, ge=1, description="Item categories")
    alpha: float = Field(0.1, gt=0, description="Dirichlet concentration of within-category transitions")
    cross_category_leak: float = Field(
        0.05, ge=0.0, le=1.0, description="Uniform probability mass spread over all items in every row"
    )
    words_per_category: int = Field(8, ge=1, description="Size of each category's title word pool")
    title_words: int = Field(2, ge=1, description="Words per title")
    word_pools: Optional[List[List[str]]] = Field(
        None, description="Explicit per-category word pools; generated pseudo-words when omitted"
    )
    n_sequences: int = Field(5000, ge=1)
    min_length: int = Field(8, ge=2)
    max_length: int = Field(20, ge=2)
    seed: int = Field(0, description="Root seed; the corpus uses its data substream")

    @model_validator(mode="after")
    def check_shape(self):
        if self.n_categories > self.n_items:
            raise ValueError(f"n_categories={self.n_categories} exceeds n_items={self.n_items}")
        if self.min_length > self.max_length:
            raise ValueError(f"min_length={self.min_length} exceeds max_length={self.max_length}")
        if self.word_pools is not None:
            if len(self.word_pools) != self.n_categories:
                raise ValueError(
                    f"word_pools has {len(self.word_pools)} pools for {self.n_categories} categories"
                )
            if any(not pool for pool in self.word_pools):
                raise ValueError("word_pools entries must be non-empty")
        return self


class SyntheticCorpus(BaseModel):
    """Generated catalog, sequences and ground truth"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    catalog: ItemCatalog
    sequences: List[InteractionSequence]
    transitions: np.ndarray = Field(..., description="|I| x |I| row-stochastic matrix")
    categories: np.ndarray = Field(..., description="Category of each item")


def category_assignment(n_items: int, n_categories: int) -> np.ndarray:
    """Contiguous, near-equal item blocks per category"""
    blocks = np.array_split(np.arange(n_items), n_categories)
    categories = np.empty(n_items, dtype=np.int64)
    for c, block in enumerate(blocks):
        categories[block] = c
    return categories


def pseudo_word_pools(n_categories: int, words_per_category: int, rng: np.random.Generator) -> List[List[str]]:
    """Distinct two- or three-syllable pseudo-words, disjoint across categories"""
    seen = set()
    pools: List[List[str]] = []
    for _ in range(n_categories):
        pool: List[str] = []
        while len(pool) < words_per_category:
            syllables = int(rng.integers(2, 4))
            word = "".join(
                _CONSONANTS[int(rng.integers(len(_CONSONANTS)))] + _VOWELS[int(rng.integers(len(_VOWELS)))]
                for _ in range(syllables)
            )
            if word not in seen:
                seen.add(word)
                pool.append(word)
        pools.append(pool)
    return pools


def compose_titles(
    categories: np.ndarray,
    pools: List[List[str]],
    title_words: int,
    rng: np.random.Generator,
    max_attempts: int = 100
) -> List[str]:
    """Titles drawn from each item's category pool, unique within a category when the pool allows"""
    titles: List[str] = []
    used = [set() for _ in pools]
    for category in categories:
        pool = pools[int(category)]
        replace = title_words > len(pool)
        title = ""
        for _ in range(max_attempts):
            words = rng.choice(pool, size=title_words, replace=replace)
            title = " ".join(str(w) for w in words)
            if title not in used[int(category)]:
                break
        used[int(category)].add(title)
        titles.append(title)
    return titles


def _dirichlet_row(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    draws = rng.standard_gamma(alpha, size=size)
    total = draws.sum()
    if not np.isfinite(total) or total <= 0:
        # every gamma draw underflowed; the limit is a point mass
        draws = np.zeros(size)
        draws[int(rng.integers(size))] = 1.0
        total = 1.0
    return draws / total


def transition_matrix(
    categories: np.ndarray,
    alpha: float,
    leak: float,
    rng: np.random.Generator
) -> np.ndarray:
    """Row i: (1 - leak) * Dirichlet(alpha) over i's category + leak * uniform over all items"""
    n_items = len(categories)
    matrix = np.full((n_items, n_items), leak / n_items)
    for i in range(n_items):
        members = np.flatnonzero(categories == categories[i])
        matrix[i, members] += (1.0 - leak) * _dirichlet_row(alpha, len(members), rng)
    matrix /= matrix.sum(axis=1, keepdims=True)
    return matrix


def sample_sequence(
    cumulative: np.ndarray,
    length: int,
    rng: np.random.Generator
) -> List[int]:
    """Walk the chain from a uniform start; `cumulative` holds row-wise CDFs"""
    n_items = cumulative.shape[0]
    state = int(rng.integers(n_items))
    items = [state]
    for _ in range(length - 1):
        state = int(np.searchsorted(cumulative[state], rng.random(), side="right"))
        state = min(state, n_items - 1)
        items.append(state)
    return items


def generate_synthetic(spec: SyntheticSpec) -> SyntheticCorpus:
    """
    Generate a corpus with a known transition matrix

    Items are split into contiguous categories, titled from their
    category's word pool, and visited by a first-order Markov chain whose
    rows concentrate on the current item's category. Every sequence draws
    from its own spawned seed, so the corpus is a pure function of the spec.
    """
    data_seed = derive_seed(spec.seed, "data")
    structure_rng = np.random.default_rng(np.random.SeedSequence(data_seed).spawn(1)[0])

    categories = category_assignment(spec.n_items, spec.n_categories)
    pools = spec.word_pools or pseudo_word_pools(spec.n_categories, spec.words_per_category, structure_rng)
    titles = compose_titles(categories, pools, spec.title_words, structure_rng)
    transitions = transition_matrix(categories, spec.alpha, spec.cross_category_leak, structure_rng)

    catalog = ItemCatalog.from_records((f"item-{i:05d}", titles[i]) for i in range(spec.n_items))

    sequence_seeds = np.random.SeedSequence([data_seed, 1]).spawn(spec.n_sequences)
    cumulative = np.cumsum(transitions, axis=1)
    sequences: List[InteractionSequence] = []
    for s, seed_seq in enumerate(sequence_seeds):
        rng = np.random.default_rng(seed_seq)
        length = int(rng.integers(spec.min_length, spec.max_length, endpoint=True))
        items = sample_sequence(cumulative, length, rng)
        sequences.append(InteractionSequence(user_id=f"user-{s:06d}", items=items))

    logger.info(
        f"Generated synthetic corpus: {spec.n_items} items, {spec.n_categories} categories, "
        f"{len(sequences)} sequences, alpha={spec.alpha}, leak={spec.cross_category_leak}"
    )
    return SyntheticCorpus(
        catalog=catalog,
        sequences=sequences,
        transitions=transitions,
        categories=categories
    )


def empirical_transitions(sequences: List[InteractionSequence], n_items: int) -> Tuple[np.ndarray, int]:
    """Observed (from, to) counts and the number of steps"""
    counts = np.zeros((n_items, n_items), dtype=np.int64)
    for sequence in sequences:
        items = np.asarray(sequence.items)
        np.add.at(counts, (items[:-1], items[1:]), 1)
    return counts, int(counts.sum())


def write_synthetic(corpus: SyntheticCorpus, out_dir: Union[str, Path]) -> Path:
    """Emit interactions.jsonl in the input schema plus catalog.jsonl and the transitions.npy sidecar"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_interactions(out_dir / "interactions.jsonl", corpus.catalog, corpus.sequences)
    corpus.catalog.save(out_dir / "catalog.jsonl")
    np.save(out_dir / "transitions.npy", corpus.transitions)
    logger.info(f"Wrote synthetic corpus to {out_dir}")
    return out_dir


def load_transitions(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Transition matrix not found: {path}")
    matrix = np.load(path)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{path}: expected a square matrix, got shape {matrix.shape}")
    return matrix
