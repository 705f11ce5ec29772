"""
Ablations
BOTH: titles + trainable item table; E: no titles; I: frozen item table
"""
import logging
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

from app.catalog.items import ItemCatalog
from app.catalog.prompts import PromptTemplate
from app.datasets.splits import DatasetSplit
from app.evaluation.evaluator import DEFAULT_KS, evaluate_prompts
from app.evaluation.models import MetricReport
from app.nanomodel.config import ModelConfig
from app.training.config import TrainConfig
from app.training.trainer import build_vocabulary, train

logger = logging.getLogger(__name__)


class AblationVariant(str, Enum):
    BOTH = "BOTH"
    E = "E"  # prompts without titles
    I = "I"  # frozen item embedding table


def variant_config(config: TrainConfig, variant: AblationVariant) -> TrainConfig:
    """The base config with exactly the variant's switches changed"""
    if variant == AblationVariant.BOTH:
        update = {"include_titles": True, "freeze_item_table": False}
    elif variant == AblationVariant.E:
        update = {"include_titles": False, "freeze_item_table": False}
    else:
        update = {"include_titles": True, "freeze_item_table": True}
    return config.model_copy(update=update)


def run_ablation(
    split: DatasetSplit,
    catalog: ItemCatalog,
    model_config: ModelConfig,
    config: TrainConfig,
    variant: AblationVariant,
    template: Optional[PromptTemplate] = None,
    ks: Sequence[int] = DEFAULT_KS,
    out_dir: Optional[Union[str, Path]] = None
) -> MetricReport:
    """Train one variant and evaluate it on the held-out split"""
    template = template or PromptTemplate()
    variant_train = variant_config(config, variant)
    logger.info(
        f"Ablation {variant.value}: include_titles={variant_train.include_titles}, "
        f"freeze_item_table={variant_train.freeze_item_table}"
    )
    model, result = train(split, catalog, model_config, variant_train, template, out_dir=out_dir)

    tokenizer, vocab = build_vocabulary(catalog, template)
    report = evaluate_prompts(
        model, split.test, vocab, tokenizer,
        include_titles=variant_train.include_titles,
        ks=ks,
        mode=variant.value
    )
    report.fingerprint = result.fingerprint
    report.seed = result.seed
    report.metadata = {"variant": variant.value, "steps": result.steps}
    return report


def run_ablation_grid(
    split: DatasetSplit,
    catalog: ItemCatalog,
    model_config: ModelConfig,
    config: TrainConfig,
    template: Optional[PromptTemplate] = None,
    ks: Sequence[int] = DEFAULT_KS,
    out_dir: Optional[Union[str, Path]] = None
) -> Dict[AblationVariant, MetricReport]:
    """All three variants, everything else identical"""
    reports = {}
    for variant in AblationVariant:
        variant_dir = Path(out_dir) / variant.value if out_dir is not None else None
        reports[variant] = run_ablation(split, catalog, model_config, config, variant, template, ks, variant_dir)
    return reports
