"""
Command Line Interface
prepare, synth, train, eval, sweep, ablate, bench and probe over one run config
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError

from app.catalog.items import ItemCatalog
from app.catalog.vocabulary import expand_vocabulary
from app.config import RunConfig, load_run_config
from app.core.artifacts import fingerprint, write_csv, write_json
from app.datasets.interactions import load_interactions
from app.datasets.recommenders import MarkovChainRecommender, OracleRecommender, PopularityRecommender
from app.datasets.splits import SPLIT_NAMES, DatasetSplit, leave_last_out_split, load_split, write_split
from app.datasets.synthetic import generate_synthetic, load_transitions, write_synthetic
from app.evaluation.benchmark import compare_modes
from app.evaluation.evaluator import evaluate_prompts, evaluate_recommender, histories_and_truths
from app.evaluation.models import MetricReport
from app.evaluation.probe import id_title_probe
from app.training.ablation import run_ablation_grid
from app.training.checkpoint import LoadedCheckpoint, load_checkpoint
from app.training.sweep import compression_sweep
from app.training.trainer import train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_BAD_INPUT = 2


# ============================================================================
# Helpers
# ============================================================================

def _output_dir(config: RunConfig, args: argparse.Namespace, name: str) -> Path:
    out = getattr(args, "out", None)
    return Path(out) if out else Path(config.output_dir) / name


def _checkpoint_path(config: RunConfig, args: argparse.Namespace) -> Path:
    checkpoint = getattr(args, "checkpoint", None)
    return Path(checkpoint) if checkpoint else Path(config.output_dir) / "checkpoints" / "best"


def _load_matching_checkpoint(config: RunConfig, path: Path) -> LoadedCheckpoint:
    """Load a checkpoint and refuse it when it was trained under another configuration"""
    loaded = load_checkpoint(path)
    expected = config.fingerprint(loaded.tokenizer.size, loaded.catalog.count)
    if loaded.manifest.fingerprint != expected:
        logger.error(
            f"Checkpoint {path} fingerprint {loaded.manifest.fingerprint[:12]} "
            f"does not match the run config ({expected[:12]})"
        )
        raise ValueError(f"Checkpoint {path} was trained with a different configuration; refusing to use it")
    return loaded


def _check_catalog(loaded: LoadedCheckpoint, catalog: ItemCatalog) -> None:
    if catalog.count != loaded.catalog.count:
        raise ValueError(
            f"Split catalog has {catalog.count} items, checkpoint was trained on {loaded.catalog.count}"
        )


def _stamp(report: MetricReport, fingerprint_value: str, seed: int) -> MetricReport:
    report.fingerprint = fingerprint_value
    report.seed = seed
    return report


def baseline_reports(
    config: RunConfig,
    split: DatasetSplit,
    catalog: ItemCatalog,
    split_name: str,
    transitions_path: Optional[str],
    fingerprint_value: str
) -> List[MetricReport]:
    """Popularity, Markov and (with a transition matrix) oracle scores on a split"""
    fitted_on = split.train + split.validation
    samples = getattr(split, split_name)
    histories, truths = histories_and_truths(samples)

    recommenders = [
        PopularityRecommender(catalog.count).train(fitted_on),
        MarkovChainRecommender(catalog.count).train(fitted_on),
    ]
    if transitions_path:
        recommenders.append(OracleRecommender(load_transitions(transitions_path)))

    reports = []
    for recommender in recommenders:
        report = evaluate_recommender(recommender, histories, truths, config.eval.ks)
        report.metadata = {"split": split_name}
        reports.append(_stamp(report, fingerprint_value, config.seed))
    return reports


# ============================================================================
# Subcommands
# ============================================================================

def cmd_prepare(config: RunConfig, args: argparse.Namespace) -> Path:
    """Interaction log -> train/validation/test manifests and catalog"""
    source = args.input or config.data.interactions
    if not source:
        raise ValueError("prepare needs --input or data.interactions")
    catalog_path = args.catalog or config.data.catalog
    max_history = args.max_history or config.data.max_history
    out_dir = Path(args.out) if args.out else Path(config.data.split_dir)

    known_catalog = ItemCatalog.load(catalog_path) if catalog_path else None
    catalog, sequences = load_interactions(source, catalog=known_catalog)
    if not sequences:
        raise ValueError(f"{source}: no sequence has at least two interactions")
    split = leave_last_out_split(
        sequences, catalog,
        max_history=max_history,
        template=config.prompt,
        include_titles=config.train.include_titles,
        validation_fraction=config.train.validation_fraction,
        seed=config.seed
    )

    write_split(split, catalog, out_dir)
    data_settings = {
        "max_history": max_history,
        "validation_fraction": config.train.validation_fraction,
        "prompt": config.prompt.model_dump(mode="json"),
        "seed": config.seed,
    }
    write_json(out_dir / "split_info.json", {
        "fingerprint": fingerprint(data_settings),
        "seed": config.seed,
        "max_history": max_history,
        "items": catalog.count,
        "sequences": len(sequences),
        "counts": split.counts(),
    })
    logger.info(f"Prepared {split.counts()} samples in {out_dir}")
    return out_dir


def cmd_synth(config: RunConfig, args: argparse.Namespace) -> Path:
    """Write a synthetic Markov corpus with its ground-truth transitions"""
    spec = config.data.synthetic
    out_dir = _output_dir(config, args, "synthetic")
    corpus = generate_synthetic(spec)
    write_synthetic(corpus, out_dir)
    spec_payload = spec.model_dump(mode="json")
    write_json(out_dir / "synthetic.json", {
        "fingerprint": fingerprint(spec_payload),
        "seed": spec.seed,
        "spec": spec_payload,
        "sequences": len(corpus.sequences),
    })
    return out_dir


def cmd_train(config: RunConfig, args: argparse.Namespace) -> Path:
    """Train on the prepared split; checkpoints go to <output_dir>/checkpoints"""
    split, catalog = load_split(config.data.split_dir)
    out_dir = _output_dir(config, args, "checkpoints")
    _, result = train(
        split, catalog, config.model, config.train, config.prompt,
        out_dir=out_dir,
        resume_from=args.resume
    )
    write_json(out_dir / "training_result.json", result.model_dump(mode="json", exclude={"loss_curve"}))
    return out_dir


def cmd_eval(config: RunConfig, args: argparse.Namespace) -> Path:
    """Metrics JSON/CSV for a checkpoint on a split, plus reference baselines"""
    checkpoint = _checkpoint_path(config, args)
    loaded = _load_matching_checkpoint(config, checkpoint)
    split, catalog = load_split(config.data.split_dir)
    _check_catalog(loaded, catalog)
    out_dir = _output_dir(config, args, "eval")

    vocab = expand_vocabulary(loaded.tokenizer, loaded.catalog)
    report = evaluate_prompts(
        loaded.model, getattr(split, args.split), vocab, loaded.tokenizer,
        include_titles=loaded.train_config.include_titles,
        ks=config.eval.ks,
        batch_size=config.eval.batch_size
    )
    _stamp(report, loaded.manifest.fingerprint, loaded.manifest.seed)
    report.metadata = {"split": args.split, "epoch": loaded.manifest.epoch, "step": loaded.manifest.step}

    report.to_json(out_dir / "metrics.json")
    write_json(out_dir / "timing.json", {
        **report.timing(),
        "fingerprint": report.fingerprint,
        "seed": report.seed,
    })

    rows = report.csv_rows()
    if not args.no_baselines:
        transitions = args.transitions or config.data.transitions
        baselines = baseline_reports(config, split, catalog, args.split, transitions, loaded.manifest.fingerprint)
        write_json(out_dir / "baselines.json", {b.mode: b.deterministic_payload() for b in baselines})
        for baseline in baselines:
            rows.extend(baseline.csv_rows())
    write_csv(out_dir / "metrics.csv", rows, columns=list(rows[0]))
    return out_dir


def cmd_sweep(config: RunConfig, args: argparse.Namespace) -> Path:
    """One trained model per compression rate; summary.csv rewritten after each leg"""
    rates = [float(r) for r in args.rates.split(",")] if args.rates else config.sweep_rates
    out_dir = _output_dir(config, args, "sweep")
    compression_sweep(
        config.data.split_dir, config.model, config.train,
        rates=rates,
        template=config.prompt,
        ks=config.eval.ks,
        out_dir=out_dir,
        parallel=args.parallel,
        max_workers=args.workers
    )
    return out_dir


def cmd_ablate(config: RunConfig, args: argparse.Namespace) -> Path:
    """BOTH / E / I grid: one row per variant, one column per metric"""
    split, catalog = load_split(config.data.split_dir)
    out_dir = _output_dir(config, args, "ablation")
    reports = run_ablation_grid(
        split, catalog, config.model, config.train, config.prompt,
        ks=config.eval.ks, out_dir=out_dir
    )

    rows: List[Dict[str, Any]] = []
    for variant, report in reports.items():
        rows.append({"variant": variant.value, **report.metrics, "fingerprint": report.fingerprint, "seed": report.seed})
    write_csv(out_dir / "ablation.csv", rows, columns=list(rows[0]))
    write_json(out_dir / "ablation.json", {
        variant.value: report.deterministic_payload() for variant, report in reports.items()
    })
    return out_dir


def cmd_bench(config: RunConfig, args: argparse.Namespace) -> Path:
    """Logits-mode vs generative-mode throughput on test prompts"""
    loaded = _load_matching_checkpoint(config, _checkpoint_path(config, args))
    split, catalog = load_split(config.data.split_dir)
    _check_catalog(loaded, catalog)
    out_dir = _output_dir(config, args, "bench")

    n_samples = args.samples or config.eval.bench_samples
    vocab = expand_vocabulary(loaded.tokenizer, loaded.catalog)
    comparison = compare_modes(
        loaded.model, split.test[:n_samples], vocab, loaded.tokenizer,
        include_titles=loaded.train_config.include_titles,
        warmup=config.eval.bench_warmup
    )
    comparison.fingerprint = loaded.manifest.fingerprint
    comparison.seed = loaded.manifest.seed

    write_json(out_dir / "bench.json", comparison.summary())
    write_csv(
        out_dir / "bench_latency.csv",
        comparison.logits.latency_rows() + comparison.generative.latency_rows(),
        columns=["mode", "sample", "latency_seconds", "forward_passes"]
    )
    return out_dir


def cmd_probe(config: RunConfig, args: argparse.Namespace) -> Path:
    """ID-title probe: match fraction plus a per-item transcript"""
    loaded = _load_matching_checkpoint(config, _checkpoint_path(config, args))
    out_dir = _output_dir(config, args, "probe")

    vocab = expand_vocabulary(loaded.tokenizer, loaded.catalog)
    result = id_title_probe(
        loaded.model, loaded.catalog, vocab, loaded.tokenizer,
        n_items=args.n or config.eval.probe_items,
        trained_with_titles=loaded.train_config.include_titles,
        template=loaded.template,
        seed=loaded.manifest.seed
    )
    result.fingerprint = loaded.manifest.fingerprint
    result.seed = loaded.manifest.seed

    write_json(out_dir / "probe.json", {
        "fingerprint": result.fingerprint,
        "seed": result.seed,
        "fraction": result.fraction,
        "items": len(result.items),
    })
    result.to_text(out_dir / "probe_transcript.txt")
    return out_dir


COMMANDS: Dict[str, Callable[[RunConfig, argparse.Namespace], Path]] = {
    "prepare": cmd_prepare,
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "ablate": cmd_ablate,
    "bench": cmd_bench,
    "probe": cmd_probe,
}


# ============================================================================
# Entry point
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run config JSON (see configs/default.json)")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="Dotted override, e.g. train.learning_rate=3e-4 (repeatable)"
    )
    common.add_argument("--out", help="Output directory for this command")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(
        prog="cove",
        description="Compressed vocabulary expansion recommender: prepare, train, evaluate"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    prepare = sub.add_parser("prepare", parents=[common], help="Build leave-last-out split manifests")
    prepare.add_argument("--input", help="Interaction JSON-lines file")
    prepare.add_argument("--catalog", help="catalog.jsonl whose item indexing must be kept")
    prepare.add_argument("--max-history", type=int, help="History length H")

    sub.add_parser("synth", parents=[common], help="Generate a synthetic Markov corpus")

    train_parser = sub.add_parser("train", parents=[common], help="Train a model on the prepared split")
    train_parser.add_argument("--resume", help="Checkpoint directory to continue from")

    for name, help_text in (
        ("eval", "Evaluate a checkpoint"),
        ("bench", "Benchmark logits vs generative inference"),
        ("probe", "Run the ID-title probe"),
    ):
        command = sub.add_parser(name, parents=[common], help=help_text)
        command.add_argument("--checkpoint", help="Checkpoint directory (default <output_dir>/checkpoints/best)")
        if name == "eval":
            command.add_argument("--split", choices=SPLIT_NAMES, default="test")
            command.add_argument("--transitions", help="transitions.npy for the oracle baseline")
            command.add_argument("--no-baselines", action="store_true", help="Skip reference recommenders")
        elif name == "bench":
            command.add_argument("--samples", type=int, help="Test prompts per mode")
        else:
            command.add_argument("--n", type=int, help="Items to probe")

    sweep = sub.add_parser("sweep", parents=[common], help="Train one model per compression rate")
    sweep.add_argument("--rates", help="Comma-separated rates, e.g. 2,4,8,16")
    sweep.add_argument("--parallel", action="store_true", help="Run legs in a process pool")
    sweep.add_argument("--workers", type=int, help="Process pool size")

    sub.add_parser("ablate", parents=[common], help="Train and evaluate the BOTH / E / I variants")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; 0 on success, 2 on bad input, 1 on any other failure"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )

    try:
        config = load_run_config(args.config, args.overrides)
        out_dir = COMMANDS[args.command](config, args)
    except (ValueError, FileNotFoundError, ValidationError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_BAD_INPUT
    except Exception as e:
        logger.exception(f"{args.command} failed: {e}")
        return EXIT_FAILURE

    logger.info(f"{args.command} finished: {out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
