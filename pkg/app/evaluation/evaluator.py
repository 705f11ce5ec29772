"""
Held-Out Evaluation
Rank the full item space from the trailing |I| logits and score against truth
"""
import logging
import time
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import torch

from app.catalog.prompts import EncodedSample, PromptSample
from app.catalog.tokenizer import BaseTokenizer
from app.catalog.vocabulary import ExpandedVocabulary
from app.datasets.recommenders import Recommender
from app.evaluation.metrics import hit_rate, hr_at_k, ndcg_at_k
from app.evaluation.models import MetricReport, metric_key
from app.nanomodel.transformer import CoveTransformer, item_logits, last_position_logits
from app.training.batching import collate, encode_samples

logger = logging.getLogger(__name__)

DEFAULT_KS = (5, 10, 20)


@dataclass(frozen=True)
class EvalSample:
    """Prompt ending where the target item token would begin, plus the truth"""
    prompt_tokens: List[int]
    truth: int


def eval_samples(encoded: Sequence[EncodedSample]) -> List[EvalSample]:
    return [EvalSample(prompt_tokens=list(s.prompt_tokens), truth=s.target) for s in encoded]


def score_rankings(
    rankings: Sequence[Sequence[int]],
    truths: Sequence[int],
    ks: Sequence[int] = DEFAULT_KS,
    mode: str = "logits",
    metadata: Optional[Dict[str, Any]] = None
) -> MetricReport:
    """Mean NDCG@K and HR@K over users; each ranking must cover max(ks) or the full catalog"""
    if len(rankings) == 0:
        raise ValueError("Cannot evaluate an empty test set")
    if len(rankings) != len(truths):
        raise ValueError(f"{len(rankings)} rankings for {len(truths)} truths")
    ks = sorted(set(int(k) for k in ks))

    metrics: Dict[str, float] = {}
    for k in ks:
        metrics[metric_key("ndcg", k)] = float(np.mean([
            ndcg_at_k(ranked, truth, k) for ranked, truth in zip(rankings, truths)
        ]))
        metrics[metric_key("hr", k)] = hit_rate([
            hr_at_k(ranked, truth, k) for ranked, truth in zip(rankings, truths)
        ])
    return MetricReport(
        mode=mode,
        ks=ks,
        metrics=metrics,
        sample_count=len(rankings),
        metadata=metadata or {}
    )


@torch.no_grad()
def rank_prompts(
    model: CoveTransformer,
    samples: Sequence[EvalSample],
    depth: int,
    batch_size: int = 64,
    pad_id: int = 0
) -> List[List[int]]:
    """Top-`depth` items per prompt; descending item logit, ties by ascending index"""
    model.eval()
    rankings: List[List[int]] = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        batch = collate(
            [EncodedSample(s.prompt_tokens, [0] * len(s.prompt_tokens), len(s.prompt_tokens), s.truth)
             for s in chunk],
            pad_id
        )
        logits = model(batch.tokens)
        final = last_position_logits(logits, batch.prompt_lengths)
        scores = item_logits(final, model.item_count).double().cpu().numpy()
        for row in scores:
            order = np.argsort(-row, kind="stable")[:depth]
            rankings.append([int(i) for i in order])
    return rankings


def evaluate(
    model: CoveTransformer,
    samples: Sequence[EvalSample],
    ks: Sequence[int] = DEFAULT_KS,
    batch_size: int = 64,
    pad_id: int = 0,
    mode: str = "logits"
) -> MetricReport:
    """
    Score a model on held-out prompts

    Each prompt is read once; its final position's trailing |I| logits rank
    the whole catalog.

    Raises:
        ValueError: empty test set
    """
    if not samples:
        raise ValueError("Cannot evaluate an empty test set")
    start = time.perf_counter()
    rankings = rank_prompts(model, samples, max(ks), batch_size, pad_id)
    elapsed = time.perf_counter() - start

    report = score_rankings(rankings, [s.truth for s in samples], ks, mode=mode)
    report.elapsed_seconds = elapsed
    report.samples_per_second = len(samples) / elapsed if elapsed > 0 else None
    logger.info(
        f"Evaluated {report.sample_count} samples ({mode}): "
        + ", ".join(f"{key}={value:.4f}" for key, value in report.metrics.items())
    )
    return report


def evaluate_prompts(
    model: CoveTransformer,
    prompts: Sequence[PromptSample],
    vocab: ExpandedVocabulary,
    tokenizer: BaseTokenizer,
    include_titles: bool,
    ks: Sequence[int] = DEFAULT_KS,
    batch_size: int = 64,
    mode: str = "logits"
) -> MetricReport:
    """Encode prompt samples the way training did, then evaluate"""
    encoded = encode_samples(prompts, vocab, tokenizer, include_titles=include_titles)
    return evaluate(model, eval_samples(encoded), ks, batch_size, tokenizer.pad_id, mode)


def evaluate_recommender(
    recommender: Recommender,
    histories: Sequence[Sequence[int]],
    truths: Sequence[int],
    ks: Sequence[int] = DEFAULT_KS,
    mode: Optional[str] = None
) -> MetricReport:
    """Score a reference recommender through the same metric path as the model"""
    rankings = recommender.recommend_batch(list(histories), max(ks))
    report = score_rankings(rankings, truths, ks, mode=mode or recommender.recommender_type.value)
    logger.info(
        f"Evaluated {report.mode} on {report.sample_count} samples: "
        + ", ".join(f"{key}={value:.4f}" for key, value in report.metrics.items())
    )
    return report


def histories_and_truths(samples: Sequence[PromptSample]) -> tuple:
    return [s.history_items for s in samples], [s.target for s in samples]
