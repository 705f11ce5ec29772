"""
Inference Throughput Benchmark
Single-pass logits ranking vs greedy generation of the target title
"""
import logging
import time
from contextlib import contextmanager
from typing import Iterator, List, Sequence

import torch

from app.catalog.prompts import PromptSample, encode_sample
from app.catalog.tokenizer import BaseTokenizer
from app.catalog.vocabulary import ExpandedVocabulary
from app.evaluation.models import BenchmarkComparison, BenchmarkResult
from app.nanomodel.transformer import CoveTransformer, greedy_decode, recommend_top_k

logger = logging.getLogger(__name__)

BENCH_MODES = ("logits", "generative")
MIN_BENCH_SAMPLES = 100


@contextmanager
def single_threaded() -> Iterator[None]:
    previous = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        yield
    finally:
        torch.set_num_threads(previous)


def _prepare(
    prompts: Sequence[PromptSample],
    vocab: ExpandedVocabulary,
    tokenizer: BaseTokenizer,
    include_titles: bool
) -> List[tuple]:
    """(prompt tokens, target title length) per sample"""
    prepared = []
    for sample in prompts:
        encoded = encode_sample(vocab, tokenizer, sample.with_titles(include_titles))
        prepared.append((encoded.prompt_tokens, len(tokenizer.encode(sample.target_title))))
    return prepared


def throughput_bench(
    model: CoveTransformer,
    prompts: Sequence[PromptSample],
    vocab: ExpandedVocabulary,
    tokenizer: BaseTokenizer,
    mode: str = "logits",
    include_titles: bool = True,
    warmup: int = 5,
    k: int = 10,
    min_samples: int = MIN_BENCH_SAMPLES
) -> BenchmarkResult:
    """
    Time one inference mode, sample by sample, on a single thread

    logits: one forward pass per sample, ranking by the trailing |I| logits.
    generative: greedy decoding of as many tokens as the target's title has,
    one full forward pass per generated token. Warmup samples are run first
    and excluded from every count.

    Raises:
        ValueError: unknown mode or fewer than min_samples prompts
    """
    if mode not in BENCH_MODES:
        raise ValueError(f"Unknown benchmark mode {mode!r}; expected one of {BENCH_MODES}")
    if len(prompts) < min_samples:
        raise ValueError(f"Benchmark needs >= {min_samples} samples, got {len(prompts)}")

    prepared = _prepare(prompts, vocab, tokenizer, include_titles)
    model.eval()

    def run(prompt_tokens: List[int], title_length: int) -> None:
        if mode == "logits":
            recommend_top_k(model, prompt_tokens, k)
        else:
            greedy_decode(model, prompt_tokens, title_length)

    latencies: List[float] = []
    passes: List[int] = []
    with single_threaded(), torch.no_grad():
        for prompt_tokens, title_length in prepared[:warmup]:
            run(prompt_tokens, title_length)

        for prompt_tokens, title_length in prepared:
            calls_before = model.forward_calls
            start = time.perf_counter()
            run(prompt_tokens, title_length)
            latencies.append(time.perf_counter() - start)
            passes.append(model.forward_calls - calls_before)

    elapsed = sum(latencies)
    result = BenchmarkResult(
        mode=mode,
        samples=len(prepared),
        forward_passes=sum(passes),
        passes_per_sample=sum(passes) / len(passes),
        samples_per_second=len(prepared) / elapsed if elapsed > 0 else float("inf"),
        elapsed_seconds=elapsed,
        latencies=latencies,
        passes=passes
    )
    logger.info(
        f"Benchmark {mode}: {result.samples} samples, {result.passes_per_sample:.2f} passes/sample, "
        f"{result.samples_per_second:.2f} samples/s"
    )
    return result


def compare_modes(
    model: CoveTransformer,
    prompts: Sequence[PromptSample],
    vocab: ExpandedVocabulary,
    tokenizer: BaseTokenizer,
    include_titles: bool = True,
    warmup: int = 5,
    min_samples: int = MIN_BENCH_SAMPLES
) -> BenchmarkComparison:
    """Run both modes on the same prompts and report the logits-mode speedup"""
    results = {
        mode: throughput_bench(
            model, prompts, vocab, tokenizer,
            mode=mode, include_titles=include_titles, warmup=warmup, min_samples=min_samples
        )
        for mode in BENCH_MODES
    }
    logits, generative = results["logits"], results["generative"]
    mean_title_length = sum(len(tokenizer.encode(p.target_title)) for p in prompts) / len(prompts)
    speedup = logits.samples_per_second / generative.samples_per_second
    logger.info(f"Logits-mode speedup: {speedup:.1f}x (mean title length {mean_title_length:.2f})")
    return BenchmarkComparison(
        logits=logits,
        generative=generative,
        speedup=speedup,
        mean_title_length=mean_title_length
    )
