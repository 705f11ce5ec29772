"""
Model Configuration
Desk-scale decoder shape plus the vocabulary/compression sizes it is built for
"""
from pydantic import BaseModel, Field, model_validator

from app.embedding.hashing import MERSENNE_31


class ModelConfig(BaseModel):
    """Architecture and embedding-compression settings"""
    layers: int = Field(2, ge=1, description="Decoder blocks")
    heads: int = Field(4, ge=1, description="Attention heads")
    dim: int = Field(64, ge=1, description="Hidden size d")
    ff_dim: int = Field(256, ge=1, description="Feed-forward width")
    max_seq_len: int = Field(256, ge=2, description="Longest sequence the positional table covers")

    base_vocab: int = Field(0, ge=0, description="V_base, filled from the tokenizer")
    item_count: int = Field(0, ge=0, description="|I|, filled from the catalog")

    rate: float = Field(2.0, ge=1.0, description="Compression rate |I| / |S|")
    k: int = Field(2, ge=1, description="Hash functions per item")
    hash_prime: int = Field(MERSENNE_31, description="Prime modulus p")
    tied_item_head: bool = Field(
        True, description="Item logits are inner products with compressed item embeddings"
    )

    @model_validator(mode="after")
    def check_heads(self):
        if self.dim % self.heads != 0:
            raise ValueError(f"dim={self.dim} must be divisible by heads={self.heads}")
        return self

    @property
    def total_vocab(self) -> int:
        return self.base_vocab + self.item_count

    def sized(self, base_vocab: int, item_count: int) -> "ModelConfig":
        """Copy with the vocabulary sizes filled in"""
        return self.model_copy(update={"base_vocab": base_vocab, "item_count": item_count})

    def require_sizes(self) -> None:
        if self.base_vocab < 1:
            raise ValueError("ModelConfig.base_vocab must be set before building a model")
        if self.item_count < 1:
            raise ValueError("ModelConfig.item_count must be >= 1 before building a model")
