"""
Batching
Encode prompt samples and collate them into right-padded tensors
"""
import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import torch

from app.catalog.prompts import EncodedSample, LossScope, PromptSample, encode_sample
from app.catalog.tokenizer import BaseTokenizer
from app.catalog.vocabulary import ExpandedVocabulary

logger = logging.getLogger(__name__)


@dataclass
class Batch:
    """Right-padded batch; padded positions carry PAD and mask 0"""
    tokens: torch.Tensor          # (B, T) long
    loss_mask: torch.Tensor       # (B, T) float
    prompt_lengths: torch.Tensor  # (B,) long
    targets: torch.Tensor         # (B,) long item indices

    def __len__(self) -> int:
        return self.tokens.shape[0]


def encode_samples(
    samples: Sequence[PromptSample],
    vocab: ExpandedVocabulary,
    tokenizer: BaseTokenizer,
    loss_scope: LossScope = LossScope.ALL,
    include_titles: Optional[bool] = None,
    include_target_title: bool = False,
    max_seq_len: Optional[int] = None
) -> List[EncodedSample]:
    """
    Encode a split

    Args:
        include_titles: Overrides each sample's own flag when given
        max_seq_len: Encoded samples longer than this raise ValueError
    """
    encoded = []
    for position, sample in enumerate(samples):
        if include_titles is not None:
            sample = sample.with_titles(include_titles)
        enc = encode_sample(vocab, tokenizer, sample, loss_scope, include_target_title)
        if max_seq_len is not None and len(enc) > max_seq_len:
            raise ValueError(
                f"Sample {position} encodes to {len(enc)} tokens, above max_seq_len {max_seq_len}; "
                f"lower max_history or raise max_seq_len"
            )
        encoded.append(enc)
    return encoded


def collate(samples: Sequence[EncodedSample], pad_id: int = 0) -> Batch:
    if not samples:
        raise ValueError("Cannot collate an empty batch")
    width = max(len(s) for s in samples)
    tokens = torch.full((len(samples), width), pad_id, dtype=torch.long)
    mask = torch.zeros((len(samples), width), dtype=torch.float32)
    for row, sample in enumerate(samples):
        n = len(sample)
        tokens[row, :n] = torch.tensor(sample.tokens, dtype=torch.long)
        mask[row, :n] = torch.tensor(sample.loss_mask, dtype=torch.float32)
    return Batch(
        tokens=tokens,
        loss_mask=mask,
        prompt_lengths=torch.tensor([s.prompt_length for s in samples], dtype=torch.long),
        targets=torch.tensor([s.target for s in samples], dtype=torch.long)
    )


def collate_prompts(samples: Sequence[EncodedSample], pad_id: int = 0) -> Batch:
    """Collate only the prompt part (tokens before the target item token)"""
    prompts = [
        EncodedSample(
            tokens=s.prompt_tokens,
            loss_mask=[0] * s.prompt_length,
            prompt_length=s.prompt_length,
            target=s.target
        )
        for s in samples
    ]
    return collate(prompts, pad_id)


def iter_batches(
    samples: Sequence[EncodedSample],
    batch_size: int,
    generator: Optional[torch.Generator] = None,
    pad_id: int = 0
) -> Iterator[Batch]:
    """Yield batches in a generator-driven shuffled order, or in order without one"""
    if generator is not None:
        order = torch.randperm(len(samples), generator=generator).tolist()
    else:
        order = list(range(len(samples)))
    for start in range(0, len(order), batch_size):
        yield collate([samples[i] for i in order[start:start + batch_size]], pad_id)
