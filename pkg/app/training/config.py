"""
Training Configuration
Optimizer, loop length and parameter-group switches
"""
from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from app.catalog.prompts import LossScope


class TrainMode(str, Enum):
    """Which parameters train"""
    FULL = "full"
    LORA = "lora"


class TrainConfig(BaseModel):
    """Settings for one training run"""
    learning_rate: float = Field(1e-4, gt=0, description="Adam step size")
    batch_size: int = Field(32, ge=1)
    max_epochs: int = Field(10, ge=1)
    max_steps: Optional[int] = Field(None, ge=1, description="Stop after this many optimizer steps")

    mode: TrainMode = TrainMode.FULL
    lora_rank: Optional[int] = Field(8, ge=1)
    lora_alpha: Optional[float] = Field(16.0, gt=0)
    pretrain_epochs: int = Field(
        20, ge=0, description="Title-only pretraining epochs before adapters are attached (lora mode)"
    )

    freeze_item_table: bool = Field(False, description="Keep the shared item rows fixed")
    include_titles: bool = Field(True, description="Render item titles after item tokens")
    loss_scope: LossScope = LossScope.ALL

    betas: Tuple[float, float] = Field((0.9, 0.999), description="Adam moment decay rates")
    eps: float = Field(1e-8, gt=0)
    grad_clip: Optional[float] = Field(1.0, gt=0, description="Global gradient-norm clip; None disables")
    validation_fraction: float = Field(0.05, ge=0.0, lt=1.0)
    seed: int = 0

    @model_validator(mode="after")
    def check_lora_fields(self):
        if self.mode == TrainMode.LORA and (self.lora_rank is None or self.lora_alpha is None):
            raise ValueError("lora_rank and lora_alpha are required when mode='lora'")
        if self.mode == TrainMode.FULL:
            self.lora_rank = None
            self.lora_alpha = None
        return self
