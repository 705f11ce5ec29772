"""
Nano Decoder Model
Causal transformer over an expanded vocabulary with optional LoRA adapters
"""
from app.nanomodel.config import ModelConfig
from app.nanomodel.lora import LoraAdapter, LoraLinear, apply_lora
from app.nanomodel.transformer import (
    ATTENTION_TARGETS,
    CoveTransformer,
    build_model,
    item_logits,
    rank_items,
    last_position_logits,
    recommend_top_k,
    greedy_decode
)

__all__ = [
    "ModelConfig",
    "LoraAdapter",
    "LoraLinear",
    "apply_lora",
    "ATTENTION_TARGETS",
    "CoveTransformer",
    "build_model",
    "item_logits",
    "rank_items",
    "last_position_logits",
    "recommend_top_k",
    "greedy_decode",
]
