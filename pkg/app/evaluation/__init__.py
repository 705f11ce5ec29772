"""
Evaluation
Ranking metrics, held-out evaluation, throughput benchmark and ID-title probe
"""
from app.evaluation.metrics import ndcg_at_k, hr_at_k, hit_rate, dcg_ndcg_at_k, rank_of
from app.evaluation.models import (
    MetricReport,
    BenchmarkResult,
    BenchmarkComparison,
    ProbeLine,
    ProbeResult,
    metric_key
)
from app.evaluation.evaluator import (
    DEFAULT_KS,
    EvalSample,
    eval_samples,
    score_rankings,
    evaluate,
    evaluate_prompts,
    evaluate_recommender,
    histories_and_truths
)
from app.evaluation.benchmark import throughput_bench, compare_modes
from app.evaluation.probe import id_title_probe

__all__ = [
    # Metrics
    "ndcg_at_k",
    "hr_at_k",
    "hit_rate",
    "dcg_ndcg_at_k",
    "rank_of",
    # Results
    "MetricReport",
    "BenchmarkResult",
    "BenchmarkComparison",
    "ProbeLine",
    "ProbeResult",
    "metric_key",
    # Evaluation
    "DEFAULT_KS",
    "EvalSample",
    "eval_samples",
    "score_rankings",
    "evaluate",
    "evaluate_prompts",
    "evaluate_recommender",
    "histories_and_truths",
    # Benchmark and probe
    "throughput_bench",
    "compare_modes",
    "id_title_probe",
]
