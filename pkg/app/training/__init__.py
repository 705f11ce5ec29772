"""
Training
Next-token loss, Adam training loop, checkpoints, gradient checks and ablations
"""
from app.training.config import TrainConfig, TrainMode
from app.training.loss import next_token_loss
from app.training.batching import Batch, collate, encode_samples, iter_batches
from app.training.checkpoint import (
    CheckpointManifest,
    LoadedCheckpoint,
    config_fingerprint,
    save_checkpoint,
    load_checkpoint,
    restore_optimizer
)
from app.training.trainer import (
    Trainer,
    StepResult,
    TrainingResult,
    TrainingDivergedError,
    trainable_parameter_names,
    build_vocabulary,
    title_corpus,
    train
)
from app.training.gradcheck import GradientCheckResult, gradient_check, central_difference

__all__ = [
    # Configuration
    "TrainConfig",
    "TrainMode",
    # Loss and batching
    "next_token_loss",
    "Batch",
    "collate",
    "encode_samples",
    "iter_batches",
    # Checkpoints
    "CheckpointManifest",
    "LoadedCheckpoint",
    "config_fingerprint",
    "save_checkpoint",
    "load_checkpoint",
    "restore_optimizer",
    # Training loop
    "Trainer",
    "StepResult",
    "TrainingResult",
    "TrainingDivergedError",
    "trainable_parameter_names",
    "build_vocabulary",
    "title_corpus",
    "train",
    # Gradient check
    "GradientCheckResult",
    "gradient_check",
    "central_difference",
]
