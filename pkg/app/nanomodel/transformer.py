"""
Desk-Scale Causal Decoder
Composite embedding (dense base table + compressed item table), pre-norm
blocks, and an output head over V_base + |I| logits
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from app.core.seeding import derive_seed, torch_generator
from app.embedding.compressed_table import CompressedItemTable, build_table
from app.nanomodel.config import ModelConfig
from app.nanomodel.lora import LoraAdapter, LoraLinear

logger = logging.getLogger(__name__)

ATTENTION_TARGETS = ("q_proj", "k_proj", "v_proj", "o_proj")


class CausalSelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = LoraLinear(nn.Linear(dim, dim), "q_proj")
        self.k_proj = LoraLinear(nn.Linear(dim, dim), "k_proj")
        self.v_proj = LoraLinear(nn.Linear(dim, dim), "v_proj")
        self.o_proj = LoraLinear(nn.Linear(dim, dim), "o_proj")

    def projections(self) -> List[LoraLinear]:
        return [self.q_proj, self.k_proj, self.v_proj, self.o_proj]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        B, T, C = x.shape
        q = self.q_proj(x).view(B, T, self.heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(x).view(B, T, self.heads, self.head_dim).transpose(1, 2)
        v = self.v_proj(x).view(B, T, self.heads, self.head_dim).transpose(1, 2)

        scores = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        future = torch.triu(torch.ones(T, T, dtype=torch.bool, device=x.device), diagonal=1)
        scores = scores.masked_fill(future, float("-inf"))
        attn = F.softmax(scores, dim=-1)

        y = (attn @ v).transpose(1, 2).reshape(B, T, C)
        return self.o_proj(y)


class DecoderBlock(nn.Module):
    """Pre-norm attention + GELU feed-forward"""

    def __init__(self, dim: int, heads: int, ff_dim: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = CausalSelfAttention(dim, heads)
        self.ln2 = nn.LayerNorm(dim)
        self.ffn = nn.Sequential(nn.Linear(dim, ff_dim), nn.GELU(), nn.Linear(ff_dim, dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x))
        x = x + self.ffn(self.ln2(x))
        return x


class CoveTransformer(nn.Module):
    """
    Decoder whose vocabulary is the base words followed by one token per item

    Base tokens read `base_embed`; item tokens read the compressed item
    table. Logits always have width V_base + |I|; with a tied item head the
    item logits are inner products with the compressed item embeddings and
    no separate item-head parameters exist.
    """

    def __init__(self, config: ModelConfig, item_table: CompressedItemTable):
        super().__init__()
        config.require_sizes()
        if item_table.item_count != config.item_count or item_table.dim != config.dim:
            raise ValueError(
                f"Item table ({item_table.item_count} items, d={item_table.dim}) does not match "
                f"config ({config.item_count} items, d={config.dim})"
            )
        self.config = config
        self.base_vocab = config.base_vocab
        self.item_count = config.item_count

        self.base_embed = nn.Embedding(config.base_vocab, config.dim)
        self.item_table = item_table
        self.pos_embed = nn.Parameter(torch.zeros(config.max_seq_len, config.dim))
        self.blocks = nn.ModuleList(
            [DecoderBlock(config.dim, config.heads, config.ff_dim) for _ in range(config.layers)]
        )
        self.ln_f = nn.LayerNorm(config.dim)
        self.head_base = nn.Linear(config.dim, config.base_vocab, bias=False)
        self.head_item = (
            None if config.tied_item_head
            else nn.Linear(config.dim, config.item_count, bias=False)
        )

        # Instrumented for the throughput benchmark
        self.forward_calls = 0

    @property
    def vocab_size(self) -> int:
        return self.base_vocab + self.item_count

    # ------------------------------------------------------------------ embedding

    def check_tokens(self, tokens: torch.Tensor) -> None:
        if tokens.numel() == 0:
            raise ValueError("Empty token sequence")
        low, high = int(tokens.min()), int(tokens.max())
        if low < 0 or high >= self.vocab_size:
            raise ValueError(f"Token ids must lie in [0, {self.vocab_size}); got [{low}, {high}]")

    def embed_tokens(self, tokens: torch.Tensor) -> torch.Tensor:
        """(..., T) token ids -> (..., T, d); items dispatch to the compressed table"""
        self.check_tokens(tokens)
        is_item = tokens >= self.base_vocab
        base_ids = torch.where(is_item, torch.zeros_like(tokens), tokens)
        item_ids = torch.where(is_item, tokens - self.base_vocab, torch.zeros_like(tokens))
        return torch.where(
            is_item.unsqueeze(-1),
            self.item_table(item_ids),
            self.base_embed(base_ids)
        )

    # ------------------------------------------------------------------ forward

    def hidden_states(self, tokens: torch.Tensor) -> torch.Tensor:
        if tokens.dim() == 1:
            tokens = tokens.unsqueeze(0)
        T = tokens.shape[1]
        if T > self.config.max_seq_len:
            raise ValueError(f"Sequence length {T} exceeds max_seq_len {self.config.max_seq_len}")
        x = self.embed_tokens(tokens) + self.pos_embed[:T]
        for block in self.blocks:
            x = block(x)
        return self.ln_f(x)

    def output_logits(self, hidden: torch.Tensor) -> torch.Tensor:
        base_logits = self.head_base(hidden)
        if self.head_item is None:
            item_logits = hidden @ self.item_table.all_embeddings().T
        else:
            item_logits = self.head_item(hidden)
        return torch.cat([base_logits, item_logits], dim=-1)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        """
        (B, T) or (T,) token ids -> (B, T, V_base + |I|) logits

        Position t depends only on tokens <= t.
        """
        self.forward_calls += 1
        return self.output_logits(self.hidden_states(tokens))

    # ------------------------------------------------------------------ adapters

    def attention_projections(self) -> List[Tuple[str, LoraLinear]]:
        return [
            (f"blocks.{i}.attn.{proj.target}", proj)
            for i, block in enumerate(self.blocks)
            for proj in block.attn.projections()
        ]

    def attach_lora(self, rank: int = 8, alpha: float = 16.0, seed: int = 0) -> List[LoraAdapter]:
        """Install a fresh adapter on every attention projection"""
        adapters = []
        for j, (name, proj) in enumerate(self.attention_projections()):
            adapters.append(proj.attach(rank, alpha, generator=torch_generator(seed, "lora", j)))
        logger.info(f"Attached {len(adapters)} LoRA adapters (rank={rank}, alpha={alpha})")
        return adapters

    def lora_adapters(self) -> List[LoraAdapter]:
        return [proj.adapter for _, proj in self.attention_projections() if proj.adapter is not None]

    def has_lora(self) -> bool:
        return bool(self.lora_adapters())


def build_model(config: ModelConfig, seed: int = 0) -> CoveTransformer:
    """
    Build and initialize a model

    The item table's hashes and rows come from the "hash" substream, all
    other weights from "init": normal(0, 0.02) for matrices and positions,
    zero biases, unit LayerNorm.
    """
    config.require_sizes()
    item_table = build_table(
        config.item_count,
        config.dim,
        rate=config.rate,
        k=config.k,
        seed=derive_seed(seed, "hash"),
        p=config.hash_prime
    )
    model = CoveTransformer(config, item_table)

    generator = torch_generator(seed, "init")
    with torch.no_grad():
        for name, param in model.named_parameters():
            if name.startswith("item_table."):
                continue
            if name.endswith(".bias"):
                param.zero_()
            elif ".ln" in name or name.startswith("ln_f"):
                param.fill_(1.0)
            else:
                param.copy_(torch.randn(param.shape, generator=generator) * 0.02)

    n_params = sum(p.numel() for p in model.parameters())
    logger.info(
        f"Built model: layers={config.layers}, d={config.dim}, heads={config.heads}, "
        f"V_base={config.base_vocab}, |I|={config.item_count}, tied_head={config.tied_item_head}, "
        f"{n_params} parameters"
    )
    return model


# ---------------------------------------------------------------------- inference helpers

def item_logits(logits: torch.Tensor, item_count: int) -> torch.Tensor:
    """Trailing |I| entries along the last axis; index j is item j"""
    if item_count == 0:
        return logits[..., logits.shape[-1]:]
    return logits[..., -item_count:]


def rank_items(scores: Sequence[float], k: int) -> List[Tuple[int, float]]:
    """Top-k (item_index, score) by descending score, ties by ascending index"""
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")
    values = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-values, kind="stable")[:min(k, len(values))]
    return [(int(i), float(values[i])) for i in order]


def last_position_logits(logits: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    """(B, T, W) logits, (B,) prompt lengths -> (B, W) logits at each final prompt position"""
    index = (lengths - 1).view(-1, 1, 1).expand(-1, 1, logits.shape[-1])
    return logits.gather(1, index).squeeze(1)


@torch.no_grad()
def recommend_top_k(
    model: CoveTransformer,
    prompt_tokens: Sequence[int],
    k: int
) -> List[Tuple[int, float]]:
    """
    One forward pass over the prompt; rank items by the final position's item logits

    K larger than |I| is truncated to |I|.
    """
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")
    tokens = torch.tensor(list(prompt_tokens), dtype=torch.long)
    logits = model(tokens)[0, -1]
    scores = item_logits(logits, model.item_count)
    return rank_items(scores.double().cpu().numpy(), k)


@torch.no_grad()
def greedy_decode(
    model: CoveTransformer,
    prompt_tokens: Sequence[int],
    steps: int
) -> Tuple[List[int], int]:
    """
    Append argmax tokens one at a time, re-running the full prefix each step

    Returns:
        (generated token ids, number of forward passes)
    """
    tokens = list(prompt_tokens)
    generated: List[int] = []
    passes = 0
    for _ in range(steps):
        if len(tokens) > model.config.max_seq_len:
            raise ValueError(
                f"Decoding would exceed max_seq_len {model.config.max_seq_len} "
                f"after {len(generated)} tokens"
            )
        logits = model(torch.tensor(tokens, dtype=torch.long))[0, -1]
        passes += 1
        next_token = int(torch.argmax(logits))
        generated.append(next_token)
        tokens.append(next_token)
    return generated, passes
