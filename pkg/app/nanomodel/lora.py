"""
Low-Rank Adapters
y = W x + (alpha / r) * B (A x), with B zero-initialized
"""
import math
from typing import Optional

import torch
import torch.nn as nn


class LoraAdapter(nn.Module):
    """Rank-r delta for one weight matrix"""

    def __init__(
        self,
        target: str,
        in_features: int,
        out_features: int,
        rank: int = 8,
        alpha: float = 16.0,
        generator: Optional[torch.Generator] = None
    ):
        super().__init__()
        if rank < 1:
            raise ValueError(f"LoRA rank must be >= 1, got {rank}")
        self.target = target
        self.rank = rank
        self.alpha = float(alpha)

        bound = 1.0 / math.sqrt(in_features)
        a_init = torch.rand(rank, in_features, generator=generator) * (2 * bound) - bound
        self.A = nn.Parameter(a_init)
        self.B = nn.Parameter(torch.zeros(out_features, rank))

    @property
    def scale(self) -> float:
        return self.alpha / self.rank

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return (x @ self.A.T) @ self.B.T * self.scale


class LoraLinear(nn.Module):
    """A linear map that can carry an adapter; without one it is the plain map"""

    def __init__(self, base: nn.Linear, target: str):
        super().__init__()
        self.base = base
        self.target = target
        self.adapter: Optional[LoraAdapter] = None

    def attach(self, rank: int, alpha: float, generator: Optional[torch.Generator] = None) -> LoraAdapter:
        adapter = LoraAdapter(
            self.target,
            self.base.in_features,
            self.base.out_features,
            rank=rank,
            alpha=alpha,
            generator=generator
        )
        self.adapter = adapter.to(dtype=self.base.weight.dtype)
        return self.adapter

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.base(x)
        if self.adapter is not None:
            y = y + self.adapter(x)
        return y


def apply_lora(weight: torch.Tensor, adapter: LoraAdapter, x: torch.Tensor) -> torch.Tensor:
    """
    Functional form for a single vector: W x + (alpha / r) * B (A x)

    Raises ValueError when W, A, B and x do not line up.
    """
    out_features, in_features = weight.shape
    if x.shape != (in_features,):
        raise ValueError(f"x shape {tuple(x.shape)} incompatible with W {tuple(weight.shape)}")
    if adapter.A.shape != (adapter.rank, in_features):
        raise ValueError(f"A shape {tuple(adapter.A.shape)} != ({adapter.rank}, {in_features})")
    if adapter.B.shape != (out_features, adapter.rank):
        raise ValueError(f"B shape {tuple(adapter.B.shape)} != ({out_features}, {adapter.rank})")
    return weight @ x + adapter.scale * (adapter.B @ (adapter.A @ x))
