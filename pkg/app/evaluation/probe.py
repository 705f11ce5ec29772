"""
ID-Title Probe
Does the model continue an item's token with that item's title?
"""
import logging
from typing import List, Optional, Sequence

import numpy as np

from app.catalog.items import ItemCatalog
from app.catalog.prompts import PromptTemplate, encode_item_prompt
from app.catalog.tokenizer import BaseTokenizer
from app.catalog.vocabulary import ExpandedVocabulary
from app.core.seeding import numpy_rng
from app.evaluation.models import ProbeLine, ProbeResult
from app.nanomodel.transformer import CoveTransformer, greedy_decode

logger = logging.getLogger(__name__)


def sample_probe_items(catalog: ItemCatalog, n_items: int, seed: int = 0) -> List[int]:
    """Seeded sample without replacement, returned in ascending order"""
    n = min(n_items, catalog.count)
    chosen = numpy_rng(seed, "eval", 1).choice(catalog.count, size=n, replace=False)
    return sorted(int(i) for i in chosen)


def id_title_probe(
    model: CoveTransformer,
    catalog: ItemCatalog,
    vocab: ExpandedVocabulary,
    tokenizer: BaseTokenizer,
    n_items: int,
    trained_with_titles: bool,
    template: Optional[PromptTemplate] = None,
    seed: int = 0,
    items: Optional[Sequence[int]] = None
) -> ProbeResult:
    """
    Feed a prompt ending at an item token and greedily decode len(title) tokens

    An item matches when the decoded tokens equal its title's tokens exactly.
    Items with empty titles are skipped.

    Args:
        trained_with_titles: The model's training prompts carried titles
        items: Explicit item indices; a seeded sample of n_items otherwise

    Raises:
        ValueError: the model never saw titles, or nothing can be probed
    """
    if not trained_with_titles:
        raise ValueError("ID-title probe is undefined for a model trained without titles")
    template = template or PromptTemplate()
    probe_items = list(items) if items is not None else sample_probe_items(catalog, n_items, seed)

    lines: List[ProbeLine] = []
    for item_index in probe_items:
        expected_ids = tokenizer.encode(catalog.title(item_index))
        if not expected_ids:
            continue
        prompt = encode_item_prompt(vocab, tokenizer, item_index, template.instruction, template.input_prefix)
        decoded_ids, _ = greedy_decode(model, prompt, len(expected_ids))
        decoded = " ".join(
            vocab.render_token(t, tokenizer) for t in decoded_ids
        )
        lines.append(ProbeLine(
            item_index=item_index,
            item_token=vocab.render_token(vocab.item_token_id(item_index), tokenizer),
            expected=tokenizer.decode(expected_ids),
            decoded=decoded,
            match=decoded_ids == expected_ids
        ))

    if not lines:
        raise ValueError("No probed item has a non-empty title")
    fraction = float(np.mean([line.match for line in lines]))
    logger.info(f"ID-title probe: {sum(l.match for l in lines)}/{len(lines)} titles reproduced")
    return ProbeResult(fraction=fraction, items=lines)
