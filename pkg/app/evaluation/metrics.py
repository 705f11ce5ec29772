"""
Ranking Metrics
NDCG@K and HR@K for a single ground-truth next item
"""
from typing import Optional, Sequence

import numpy as np


def rank_of(ranked: Sequence[int], truth: int) -> Optional[int]:
    """1-based position of truth in ranked, or None when absent"""
    for position, item in enumerate(ranked, start=1):
        if item == truth:
            return position
    return None


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")


def ndcg_at_k(ranked: Sequence[int], truth: int, k: int) -> float:
    """
    1 / log2(rank + 1) if truth sits at 1-based rank <= K, else 0

    Equals DCG/IDCG for one relevant item with binary relevance.
    """
    _check_k(k)
    rank = rank_of(ranked[:k], truth)
    if rank is None:
        return 0.0
    return float(1.0 / np.log2(rank + 1))


def hr_at_k(ranked: Sequence[int], truth: int, k: int) -> int:
    """1 if truth is in the top K, else 0"""
    _check_k(k)
    return int(truth in list(ranked[:k]))


def hit_rate(hits: Sequence[int]) -> float:
    """Mean of per-user hit indicators"""
    if len(hits) == 0:
        raise ValueError("Hit rate over zero users is undefined")
    return float(np.mean(hits))


def dcg_ndcg_at_k(relevances: Sequence[float], k: int) -> float:
    """
    General form: DCG@K / IDCG@K with DCG = sum_i (2^rel_i - 1) / log2(i + 1)

    `relevances[i]` is the graded relevance of the item at 1-based rank
    i + 1 in the ranking under test. Returns 0 when no item is relevant.
    """
    _check_k(k)
    rel = np.asarray(relevances, dtype=np.float64)
    discounts = 1.0 / np.log2(np.arange(2, rel.size + 2))
    gains = np.power(2.0, rel) - 1.0
    dcg = float(np.sum((gains * discounts)[:k]))
    ideal = np.sort(gains)[::-1]
    idcg = float(np.sum((ideal * discounts)[:k]))
    if idcg == 0.0:
        return 0.0
    return dcg / idcg
