"""
Datasets
Interaction ingest, leave-last-out splits, synthetic corpora and reference recommenders
"""
from app.datasets.interactions import (
    InteractionRecord,
    InteractionSequence,
    load_interactions,
    write_interactions
)
from app.datasets.splits import (
    DatasetSplit,
    leave_last_out_split,
    write_split,
    load_split
)
from app.datasets.synthetic import (
    SyntheticSpec,
    SyntheticCorpus,
    generate_synthetic,
    empirical_transitions,
    write_synthetic,
    load_transitions
)
from app.datasets.recommenders import (
    RecommenderType,
    Recommender,
    PopularityRecommender,
    OracleRecommender,
    MarkovChainRecommender,
    oracle_recommender,
    popularity_baseline
)

__all__ = [
    # Interactions
    "InteractionRecord",
    "InteractionSequence",
    "load_interactions",
    "write_interactions",
    # Splits
    "DatasetSplit",
    "leave_last_out_split",
    "write_split",
    "load_split",
    # Synthetic corpora
    "SyntheticSpec",
    "SyntheticCorpus",
    "generate_synthetic",
    "empirical_transitions",
    "write_synthetic",
    "load_transitions",
    # Reference recommenders
    "RecommenderType",
    "Recommender",
    "PopularityRecommender",
    "OracleRecommender",
    "MarkovChainRecommender",
    "oracle_recommender",
    "popularity_baseline",
]
