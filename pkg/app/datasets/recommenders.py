"""
Reference Recommenders
Popularity, true-transition oracle and empirical Markov chain rankers used as
lower/upper references next to the trained model
"""
from abc import ABC, abstractmethod
from enum import Enum
from typing import List, Sequence
import logging

import numpy as np

from app.catalog.prompts import PromptSample

logger = logging.getLogger(__name__)


class RecommenderType(str, Enum):
    """Types of reference recommenders"""
    POPULARITY = "popularity"
    ORACLE = "oracle"
    MARKOV = "markov"


def ranked_by_score(scores: np.ndarray, k: int) -> List[int]:
    """Item indices by descending score, ties by ascending index"""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    return [int(i) for i in order[:min(k, len(order))]]


class Recommender(ABC):
    """
    Abstract base class for reference recommenders

    All recommenders rank the full item space from a chronological history.
    """

    recommender_type: RecommenderType

    @abstractmethod
    def recommend(self, history: Sequence[int], k: int) -> List[int]:
        """
        Rank items for one history

        Args:
            history: Chronological item indices, oldest first
            k: Length of the returned ranking (truncated to |I|)

        Returns:
            Distinct item indices, best first
        """
        pass

    def recommend_batch(self, histories: List[Sequence[int]], k: int) -> List[List[int]]:
        """
        Rank items for many histories

        Default implementation just loops. Subclasses can override
        for batch optimization.
        """
        return [self.recommend(h, k) for h in histories]


class PopularityRecommender(Recommender):
    """Ranks every history the same way: by training-target frequency"""

    recommender_type = RecommenderType.POPULARITY

    def __init__(self, item_count: int):
        self.item_count = item_count
        self.target_counts = np.zeros(item_count, dtype=np.int64)
        self.ranking: List[int] = list(range(item_count))

    def train(self, samples: List[PromptSample]) -> "PopularityRecommender":
        if not samples:
            raise ValueError("Popularity baseline needs a non-empty training split")
        self.target_counts = np.bincount(
            [s.target for s in samples], minlength=self.item_count
        ).astype(np.int64)
        self.ranking = ranked_by_score(self.target_counts, self.item_count)
        logger.info(f"Popularity baseline over {len(samples)} targets; top item {self.ranking[0]}")
        return self

    def recommend(self, history: Sequence[int], k: int) -> List[int]:
        return self.ranking[:k]


class OracleRecommender(Recommender):
    """Ranks by the true next-step probabilities of the generating chain"""

    recommender_type = RecommenderType.ORACLE

    def __init__(self, transitions: np.ndarray):
        transitions = np.asarray(transitions, dtype=np.float64)
        if transitions.ndim != 2 or transitions.shape[0] != transitions.shape[1]:
            raise ValueError(f"Transition matrix must be square, got shape {transitions.shape}")
        if np.any(transitions < 0) or not np.allclose(transitions.sum(axis=1), 1.0, atol=1e-8):
            raise ValueError("Transition matrix rows must be probability distributions")
        self.transitions = transitions

    def recommend(self, history: Sequence[int], k: int) -> List[int]:
        last = int(history[-1])
        return ranked_by_score(self.transitions[last], k)


class MarkovChainRecommender(Recommender):
    """
    First-order Markov chain learned from training samples

    Counts (last history item -> target) transitions. States seen fewer than
    `min_support` times fall back to the popularity ranking; within a
    state, equal counts are ordered by popularity, then index.
    """

    recommender_type = RecommenderType.MARKOV

    def __init__(self, item_count: int, min_support: int = 1):
        self.item_count = item_count
        self.min_support = min_support

        # counts[from_state, to_state]
        self.transition_counts = np.zeros((item_count, item_count), dtype=np.int64)
        self.state_counts = np.zeros(item_count, dtype=np.int64)
        self.popularity = PopularityRecommender(item_count)
        self.is_trained = False

    def train(self, samples: List[PromptSample]) -> "MarkovChainRecommender":
        logger.info(f"Training Markov recommender on {len(samples)} samples")
        from_states = np.array([s.history[-1][0] for s in samples], dtype=np.int64)
        to_states = np.array([s.target for s in samples], dtype=np.int64)
        self.transition_counts = np.zeros((self.item_count, self.item_count), dtype=np.int64)
        np.add.at(self.transition_counts, (from_states, to_states), 1)
        self.state_counts = self.transition_counts.sum(axis=1)

        self.popularity.train(samples)
        self.is_trained = True
        logger.info(
            f"Trained on {int(np.count_nonzero(self.transition_counts))} transitions, "
            f"{int(np.count_nonzero(self.state_counts))} states"
        )
        return self

    def recommend(self, history: Sequence[int], k: int) -> List[int]:
        if not self.is_trained:
            raise ValueError("MarkovChainRecommender must be trained before recommending")
        state = int(history[-1])
        if self.state_counts[state] < self.min_support:
            return self.popularity.recommend(history, k)
        row = self.transition_counts[state]
        # primary key: count, secondary: popularity, tertiary: index
        order = np.lexsort((np.arange(self.item_count), -self.popularity.target_counts, -row))
        return [int(i) for i in order[:min(k, self.item_count)]]


def oracle_recommender(transitions: np.ndarray, last_item: int, k: int) -> List[int]:
    """Items by true next-step probability from `last_item`, ties by index"""
    return OracleRecommender(transitions).recommend([last_item], k)


def popularity_baseline(train: List[PromptSample], item_count: int) -> List[int]:
    """Full ranking by training-target frequency, ties by index"""
    return PopularityRecommender(item_count).train(train).ranking
