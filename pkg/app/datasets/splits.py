"""
Leave-Last-Out Splits
Sequences -> train / validation / test PromptSample sets
"""
import logging
from pathlib import Path
from typing import List, Optional, Set, Union

from pydantic import BaseModel, Field
from sklearn.model_selection import train_test_split

from app.catalog.items import ItemCatalog
from app.catalog.prompts import PromptSample, PromptTemplate
from app.core.artifacts import iter_jsonl, write_jsonl
from app.core.seeding import derive_seed
from app.datasets.interactions import InteractionSequence

logger = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "validation", "test")


class DatasetSplit(BaseModel):
    """Prompt samples for each split; test targets are each sequence's final item"""
    train: List[PromptSample] = Field(default_factory=list)
    validation: List[PromptSample] = Field(default_factory=list)
    test: List[PromptSample] = Field(default_factory=list)

    def counts(self) -> dict:
        return {name: len(getattr(self, name)) for name in SPLIT_NAMES}

    def all_samples(self) -> List[PromptSample]:
        return self.train + self.validation + self.test


def make_sample(
    catalog: ItemCatalog,
    history: List[int],
    target: int,
    template: PromptTemplate,
    include_titles: bool = True
) -> PromptSample:
    return PromptSample(
        instruction=template.instruction,
        input_prefix=template.input_prefix,
        history=[(i, catalog.title(i)) for i in history],
        target=target,
        target_title=catalog.title(target),
        include_titles=include_titles
    )


def carve_validation(
    user_ids: List[str],
    fraction: float,
    seed: int
) -> Set[str]:
    """
    Pick a seeded fraction of users whose training prefixes become validation

    Holding out whole users keeps every validation prompt out of the
    training prefixes. When the fraction rounds to no users the set is empty.
    """
    users = list(dict.fromkeys(user_ids))
    if fraction <= 0 or int(len(users) * fraction) < 1:
        if fraction > 0:
            logger.warning(f"Validation fraction {fraction} of {len(users)} users is empty")
        return set()

    _, val_users = train_test_split(
        users,
        test_size=fraction,
        random_state=derive_seed(seed, "data", 1) % (2**32),
        shuffle=True
    )
    return set(val_users)


def leave_last_out_split(
    sequences: List[InteractionSequence],
    catalog: ItemCatalog,
    max_history: int = 20,
    template: Optional[PromptTemplate] = None,
    include_titles: bool = True,
    validation_fraction: float = 0.05,
    seed: int = 0
) -> DatasetSplit:
    """
    Build prompt samples with the final item of each sequence held out

    For a sequence [x_0 .. x_n] the test sample predicts x_n from the
    preceding <= max_history items; training samples predict every x_t
    (1 <= t < n) from its own truncated prefix.

    Args:
        sequences: Chronological item-index sequences, each of length >= 2
        catalog: Catalog every index must belong to
        max_history: Most recent items kept per history (H)
        template: Prompt text; defaults to PromptTemplate()
        include_titles: Render titles after item tokens
        validation_fraction: Share of users whose training prefixes are held out
        seed: Root seed

    Raises:
        ValueError: index outside the catalog or max_history < 1
    """
    if max_history < 1:
        raise ValueError(f"max_history must be >= 1, got {max_history}")
    template = template or PromptTemplate()

    for sequence in sequences:
        for item in sequence.items:
            catalog.validate_index(item)
    validation_users = carve_validation([s.user_id for s in sequences], validation_fraction, seed)

    train: List[PromptSample] = []
    validation: List[PromptSample] = []
    test: List[PromptSample] = []
    for sequence in sequences:
        items = sequence.items
        fit_part = validation if sequence.user_id in validation_users else train
        for t in range(1, len(items)):
            history = items[max(0, t - max_history):t]
            sample = make_sample(catalog, history, items[t], template, include_titles)
            if t == len(items) - 1:
                test.append(sample)
            else:
                fit_part.append(sample)

    split = DatasetSplit(train=train, validation=validation, test=test)
    logger.info(f"Leave-last-out split (H={max_history}): {split.counts()}")
    return split


def write_split(split: DatasetSplit, catalog: ItemCatalog, out_dir: Union[str, Path]) -> Path:
    """Emit train/validation/test JSON-lines manifests plus catalog.jsonl"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in SPLIT_NAMES:
        write_jsonl(out_dir / f"{name}.jsonl", (s.model_dump(mode="json") for s in getattr(split, name)))
    catalog.save(out_dir / "catalog.jsonl")
    logger.info(f"Wrote split manifests to {out_dir}: {split.counts()}")
    return out_dir


def load_split(split_dir: Union[str, Path]) -> tuple:
    """Read a directory written by write_split -> (DatasetSplit, ItemCatalog)"""
    split_dir = Path(split_dir)
    catalog = ItemCatalog.load(split_dir / "catalog.jsonl")
    parts = {}
    for name in SPLIT_NAMES:
        samples = []
        for line_number, record in iter_jsonl(split_dir / f"{name}.jsonl"):
            sample = PromptSample.model_validate(record)
            for item, _ in sample.history:
                catalog.validate_index(item)
            catalog.validate_index(sample.target)
            samples.append(sample)
        parts[name] = samples
    return DatasetSplit(**parts), catalog
