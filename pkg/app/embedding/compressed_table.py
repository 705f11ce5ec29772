"""
Compressed Item Embedding Table
Items share |S| = ceil(|I| / rate) rows; an item's embedding is the mean
of the k rows its hash functions address
"""
import logging
import math
from typing import Any, Dict, List, Optional

import torch
import torch.nn as nn
from pydantic import BaseModel, ConfigDict, Field

from app.core.seeding import derive_seed, torch_generator
from app.embedding.hashing import (
    HashParams,
    MERSENNE_31,
    hash_codes,
    identity_hash,
    sample_hash
)

logger = logging.getLogger(__name__)


class CompressionStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    item_count: int
    shared_rows: int
    dim: int
    ratio: float = Field(..., description="Items per shared row")
    parameter_count: int = Field(..., description="|S| x d")


class CompressedItemTable(nn.Module):
    """
    Shared |S| x d table addressed through k universal hashes

    Codes are a non-persistent buffer: they are recomputed from the hash
    parameters, so a checkpoint stores only the shared matrix and the
    (a, b) pairs.
    """

    def __init__(
        self,
        item_count: int,
        dim: int,
        hashes: List[HashParams],
        shared: Optional[torch.Tensor] = None
    ):
        super().__init__()
        if item_count < 1:
            raise ValueError(f"item_count must be >= 1, got {item_count}")
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if not hashes:
            raise ValueError("At least one hash function is required")
        num_shared = hashes[0].m
        if any(h.m != num_shared for h in hashes):
            raise ValueError("All hash functions must share the same m = |S|")
        if num_shared > item_count:
            raise ValueError(f"|S|={num_shared} exceeds |I|={item_count}; compression never expands")

        self.item_count = item_count
        self.dim = dim
        self.hashes = list(hashes)

        if shared is None:
            shared = torch.zeros(num_shared, dim)
        if tuple(shared.shape) != (num_shared, dim):
            raise ValueError(f"Shared matrix shape {tuple(shared.shape)} != ({num_shared}, {dim})")
        self.shared = nn.Parameter(shared)

        codes = torch.tensor(
            [hash_codes(h, range(item_count)) for h in self.hashes],
            dtype=torch.long
        ).T.contiguous()
        self.register_buffer("codes", codes, persistent=False)

    @property
    def num_shared(self) -> int:
        return self.shared.shape[0]

    @property
    def k(self) -> int:
        return len(self.hashes)

    def validate_index(self, item_index: int) -> None:
        if not 0 <= int(item_index) < self.item_count:
            raise ValueError(f"item_index {item_index} out of range [0, {self.item_count})")

    def item_codes(self, item_index: int) -> List[int]:
        self.validate_index(item_index)
        return self.codes[item_index].tolist()

    def item_embedding(self, item_index: int) -> torch.Tensor:
        """(1/k) * sum of the addressed rows, repeats counted"""
        self.validate_index(item_index)
        return self.shared[self.codes[item_index]].mean(dim=0)

    def forward(self, item_indices: torch.Tensor) -> torch.Tensor:
        """Batched lookup: (...,) item indices -> (..., d)"""
        return self.shared[self.codes[item_indices]].mean(dim=-2)

    def all_embeddings(self) -> torch.Tensor:
        """|I| x d matrix of every item's embedding"""
        return self.shared[self.codes].mean(dim=-2)

    def accumulate_gradient(
        self,
        item_index: int,
        upstream: torch.Tensor,
        sink: torch.Tensor
    ) -> torch.Tensor:
        """
        Chain rule through the average: sink[h_j(i)] += upstream / k for each j

        Colliding codes receive the contribution once per hash. `sink` must
        have the shared matrix's shape and is updated in place.
        """
        self.validate_index(item_index)
        if upstream.shape != (self.dim,):
            raise ValueError(f"upstream shape {tuple(upstream.shape)} != ({self.dim},)")
        if tuple(sink.shape) != tuple(self.shared.shape):
            raise ValueError(
                f"sink shape {tuple(sink.shape)} != shared shape {tuple(self.shared.shape)}"
            )
        contribution = upstream / self.k
        for code in self.codes[item_index].tolist():
            sink[code] += contribution
        return sink

    def compression_stats(self) -> CompressionStats:
        return CompressionStats(
            item_count=self.item_count,
            shared_rows=self.num_shared,
            dim=self.dim,
            ratio=self.item_count / self.num_shared,
            parameter_count=self.num_shared * self.dim
        )

    def manifest(self) -> Dict[str, Any]:
        return {
            "item_count": self.item_count,
            "k": self.k,
            "num_shared": self.num_shared,
            "dim": self.dim,
            "p": self.hashes[0].p,
            "hashes": [[h.a, h.b] for h in self.hashes],
        }

    @classmethod
    def from_manifest(cls, manifest: Dict[str, Any]) -> "CompressedItemTable":
        hashes = [
            HashParams(a=a, b=b, p=manifest["p"], m=manifest["num_shared"])
            for a, b in manifest["hashes"]
        ]
        return cls(manifest["item_count"], manifest["dim"], hashes)

    @classmethod
    def uncompressed(cls, item_count: int, dim: int, seed: int = 0) -> "CompressedItemTable":
        """k=1 identity hash: each item owns one row"""
        table = cls(item_count, dim, [identity_hash(item_count)])
        _init_shared(table, seed)
        return table


def shared_rows_for_rate(item_count: int, rate: float) -> int:
    if rate < 1:
        raise ValueError(f"Compression rate must be >= 1, got {rate}")
    return max(1, math.ceil(item_count / rate))


def build_table(
    item_count: int,
    dim: int,
    rate: float = 2.0,
    k: int = 2,
    seed: int = 0,
    p: int = MERSENNE_31
) -> CompressedItemTable:
    """
    Build a table with |S| = ceil(|I| / rate) rows and k independent hashes

    Shared rows are drawn uniformly from [-1/sqrt(d), 1/sqrt(d)].
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    num_shared = shared_rows_for_rate(item_count, rate)

    hashes = [sample_hash(derive_seed(seed, "hash", j), p, num_shared) for j in range(k)]
    table = CompressedItemTable(item_count, dim, hashes)
    _init_shared(table, seed)

    stats = table.compression_stats()
    logger.info(
        f"Built compressed item table: |I|={item_count}, |S|={num_shared}, d={dim}, k={k}, "
        f"ratio={stats.ratio:.2f}, params={stats.parameter_count}"
    )
    return table


def _init_shared(table: CompressedItemTable, seed: int) -> None:
    bound = 1.0 / math.sqrt(table.dim)
    generator = torch_generator(seed, "shared-init")
    with torch.no_grad():
        values = torch.rand(table.shared.shape, generator=generator, dtype=torch.float32)
        table.shared.copy_(values * (2 * bound) - bound)


def item_embedding(table: CompressedItemTable, item_index: int) -> torch.Tensor:
    return table.item_embedding(item_index)


def accumulate_gradient(
    table: CompressedItemTable,
    item_index: int,
    upstream: torch.Tensor,
    sink: torch.Tensor
) -> torch.Tensor:
    return table.accumulate_gradient(item_index, upstream, sink)


def compression_stats(table: CompressedItemTable) -> CompressionStats:
    return table.compression_stats()
