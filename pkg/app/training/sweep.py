"""
Compression Sweep
One model per compression rate, everything else fixed
"""
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import torch

from app.catalog.items import ItemCatalog
from app.catalog.prompts import PromptTemplate
from app.core.artifacts import write_csv
from app.datasets.splits import DatasetSplit, load_split
from app.embedding.compressed_table import shared_rows_for_rate
from app.evaluation.evaluator import DEFAULT_KS, evaluate_prompts
from app.evaluation.models import MetricReport, metric_key
from app.nanomodel.config import ModelConfig
from app.training.config import TrainConfig
from app.training.trainer import build_vocabulary, train

logger = logging.getLogger(__name__)

DEFAULT_RATES = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)


def check_rates(rates: Sequence[float]) -> List[float]:
    if not rates:
        raise ValueError("Sweep needs at least one compression rate")
    for rate in rates:
        if rate < 1:
            raise ValueError(f"Compression rate must be >= 1, got {rate}")
    return [float(r) for r in rates]


def leg_directory(out_dir: Union[str, Path], rate: float) -> Path:
    return Path(out_dir) / f"rate_{rate:g}"


def run_compression_leg(
    split: DatasetSplit,
    catalog: ItemCatalog,
    model_config: ModelConfig,
    config: TrainConfig,
    rate: float,
    template: Optional[PromptTemplate] = None,
    ks: Sequence[int] = DEFAULT_KS,
    out_dir: Optional[Union[str, Path]] = None
) -> MetricReport:
    """Train at one rate and evaluate on the test split"""
    template = template or PromptTemplate()
    leg_config = model_config.model_copy(update={"rate": float(rate)})
    model, result = train(split, catalog, leg_config, config, template, out_dir=out_dir)

    tokenizer, vocab = build_vocabulary(catalog, template)
    report = evaluate_prompts(
        model, split.test, vocab, tokenizer,
        include_titles=config.include_titles, ks=ks, mode="logits"
    )
    report.fingerprint = result.fingerprint
    report.seed = result.seed
    report.metadata = {
        "rate": float(rate),
        "shared_rows": shared_rows_for_rate(catalog.count, rate),
        "steps": result.steps,
    }
    if out_dir is not None:
        report.to_json(Path(out_dir) / "metrics.json")
    return report


def _leg_worker(
    split_dir: str,
    model_payload: Dict[str, Any],
    train_payload: Dict[str, Any],
    prompt_payload: Dict[str, Any],
    rate: float,
    ks: List[int],
    out_dir: Optional[str]
) -> Dict[str, Any]:
    """Process-pool entry point; arguments and result are plain data"""
    torch.set_num_threads(1)
    split, catalog = load_split(split_dir)
    report = run_compression_leg(
        split, catalog,
        ModelConfig(**model_payload), TrainConfig(**train_payload),
        rate, PromptTemplate(**prompt_payload), ks, out_dir
    )
    return report.model_dump(mode="json")


def summary_rows(reports: Dict[float, MetricReport]) -> List[Dict[str, Any]]:
    """One row per rate, ordered by rate"""
    rows = []
    for rate in sorted(reports):
        report = reports[rate]
        row: Dict[str, Any] = {"rate": rate, "shared_rows": report.metadata.get("shared_rows")}
        for k in report.ks:
            row[metric_key("ndcg", k)] = report.ndcg(k)
            row[metric_key("hr", k)] = report.hr(k)
        row["fingerprint"] = report.fingerprint
        row["seed"] = report.seed
        rows.append(row)
    return rows


def compression_sweep(
    split_dir: Union[str, Path],
    model_config: ModelConfig,
    config: TrainConfig,
    rates: Sequence[float] = DEFAULT_RATES,
    template: Optional[PromptTemplate] = None,
    ks: Sequence[int] = DEFAULT_KS,
    out_dir: Optional[Union[str, Path]] = None,
    parallel: bool = False,
    max_workers: Optional[int] = None,
    on_leg: Optional[Callable[[Dict[float, MetricReport]], None]] = None
) -> Dict[float, MetricReport]:
    """
    Train and evaluate one model per rate

    With out_dir, each leg writes its checkpoints and metrics under
    rate_<r>/ and summary.csv is rewritten after every finished leg. A
    failed leg stops the sweep; the summary keeps every leg that finished.
    Parallel legs run in separate processes, each on one thread.

    Raises:
        ValueError: a rate below 1
    """
    rates = check_rates(rates)
    template = template or PromptTemplate()
    ks = sorted(set(int(k) for k in ks))
    out_dir = Path(out_dir) if out_dir is not None else None
    reports: Dict[float, MetricReport] = {}

    def finished(rate: float, report: MetricReport) -> None:
        reports[rate] = report
        logger.info(f"Sweep leg rate={rate:g}: hr@{ks[-1]}={report.hr(ks[-1]):.4f}")
        if out_dir is not None:
            write_csv(out_dir / "summary.csv", summary_rows(reports))
        if on_leg is not None:
            on_leg(reports)

    if not parallel:
        split, catalog = load_split(split_dir)
        for rate in rates:
            leg_dir = leg_directory(out_dir, rate) if out_dir is not None else None
            finished(rate, run_compression_leg(split, catalog, model_config, config, rate, template, ks, leg_dir))
        return reports

    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        futures = {
            pool.submit(
                _leg_worker,
                str(split_dir),
                model_config.model_dump(mode="json"),
                config.model_dump(mode="json"),
                template.model_dump(mode="json"),
                rate,
                ks,
                str(leg_directory(out_dir, rate)) if out_dir is not None else None
            ): rate
            for rate in rates
        }
        for future in as_completed(futures):
            rate = futures[future]
            try:
                payload = future.result()
            except Exception as e:
                logger.error(f"Sweep leg rate={rate:g} failed: {e}")
                for pending in futures:
                    pending.cancel()
                raise
            finished(rate, MetricReport(**payload))
    return reports
