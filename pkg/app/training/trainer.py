"""
Trainer
Next-token training with Adam, parameter-group freezing, full and LoRA modes,
per-epoch validation and best-checkpoint persistence
"""
import itertools
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import torch
import torch.nn as nn
from pydantic import BaseModel, Field

from app.catalog.items import ItemCatalog
from app.catalog.prompts import EncodedSample, PromptTemplate
from app.catalog.tokenizer import BaseTokenizer, build_base_tokenizer
from app.catalog.vocabulary import ExpandedVocabulary, expand_vocabulary
from app.core.artifacts import write_csv
from app.core.seeding import derive_seed, seed_everything, torch_generator
from app.datasets.splits import DatasetSplit
from app.nanomodel.config import ModelConfig
from app.nanomodel.transformer import CoveTransformer, build_model
from app.training.batching import Batch, encode_samples, iter_batches
from app.training.checkpoint import (
    LOSS_CURVE_COLUMNS,
    config_fingerprint,
    load_checkpoint,
    restore_optimizer,
    save_checkpoint
)
from app.training.config import TrainConfig, TrainMode
from app.training.loss import next_token_loss

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """Loss became NaN or infinite"""

    def __init__(self, step: int, epoch: int, last_finite_loss: Optional[float]):
        self.step = step
        self.epoch = epoch
        self.last_finite_loss = last_finite_loss
        super().__init__(
            f"Training diverged at step {step} (epoch {epoch}); "
            f"last finite loss: {last_finite_loss}"
        )


class StepResult(BaseModel):
    """Outcome of one optimizer update"""
    loss: float
    grad_norm: float = Field(..., description="Global gradient norm before clipping")


class TrainingResult(BaseModel):
    """Outcome of a training run"""
    fingerprint: str
    seed: int
    epochs_completed: int
    steps: int
    initial_loss: Optional[float] = None
    final_train_loss: Optional[float] = None
    best_loss: Optional[float] = Field(
        None, description="Best validation loss, or training loss without a validation split"
    )
    best_epoch: Optional[int] = None
    best_checkpoint: Optional[str] = None
    last_checkpoint: Optional[str] = None
    loss_curve: List[Dict[str, Any]] = Field(default_factory=list)


def trainable_parameter_names(model: CoveTransformer, config: TrainConfig) -> List[str]:
    """
    Names of the parameters a step may change

    full: everything. lora: adapters, the shared item rows and the untied
    item head. freeze_item_table removes the shared rows in both modes.
    """
    names = []
    for name, _ in model.named_parameters():
        if name == "item_table.shared":
            if not config.freeze_item_table:
                names.append(name)
        elif config.mode == TrainMode.FULL:
            names.append(name)
        elif ".adapter." in name or name.startswith("head_item."):
            names.append(name)
    return names


class Trainer:
    """Owns the model, its optimizer and the loss bookkeeping"""

    def __init__(self, model: CoveTransformer, config: TrainConfig, pad_id: int = 0):
        if config.mode == TrainMode.LORA and not model.has_lora():
            raise ValueError("mode='lora' needs adapters attached before building the trainer")
        self.model = model
        self.config = config
        self.pad_id = pad_id
        self.step = 0
        self.last_finite_loss: Optional[float] = None

        trainable = set(trainable_parameter_names(model, config))
        for name, param in model.named_parameters():
            param.requires_grad_(name in trainable)
        self.parameters = [p for n, p in model.named_parameters() if n in trainable]
        if not self.parameters:
            raise ValueError("No trainable parameters under this configuration")

        self.optimizer = torch.optim.Adam(
            self.parameters,
            lr=config.learning_rate,
            betas=tuple(config.betas),
            eps=config.eps,
            weight_decay=0.0
        )
        logger.info(
            f"Trainer: mode={config.mode.value}, freeze_item_table={config.freeze_item_table}, "
            f"{sum(p.numel() for p in self.parameters)} trainable parameters"
        )

    def batch_loss(self, batch: Batch) -> torch.Tensor:
        logits = self.model(batch.tokens)
        return next_token_loss(logits, batch.tokens, batch.loss_mask)

    def train_step(self, batch: Batch, epoch: int = 0) -> StepResult:
        """
        One Adam update on a batch

        Raises:
            TrainingDivergedError: loss is not finite
        """
        self.model.train()
        self.optimizer.zero_grad(set_to_none=True)
        loss = self.batch_loss(batch)
        if not torch.isfinite(loss):
            logger.error(f"Non-finite loss at step {self.step}, epoch {epoch}")
            raise TrainingDivergedError(self.step, epoch, self.last_finite_loss)

        loss.backward()
        if self.config.grad_clip is not None:
            grad_norm = nn.utils.clip_grad_norm_(self.parameters, self.config.grad_clip)
        else:
            grad_norm = torch.norm(torch.stack([
                p.grad.norm() for p in self.parameters if p.grad is not None
            ]))
        self.optimizer.step()

        self.step += 1
        self.last_finite_loss = float(loss.detach())
        return StepResult(loss=self.last_finite_loss, grad_norm=float(grad_norm))

    @torch.no_grad()
    def evaluate_loss(self, samples: List[EncodedSample], batch_size: Optional[int] = None) -> Optional[float]:
        """Masked-token-weighted mean loss over samples; None when empty"""
        if not samples:
            return None
        self.model.eval()
        total, weight = 0.0, 0.0
        for batch in iter_batches(samples, batch_size or self.config.batch_size, pad_id=self.pad_id):
            n = float(batch.loss_mask[:, 1:].sum())
            total += float(self.batch_loss(batch)) * n
            weight += n
        return total / weight

    def run_epoch(
        self,
        samples: List[EncodedSample],
        epoch: int,
        stream: str = "training",
        max_steps: Optional[int] = None,
        skip_batches: int = 0
    ) -> List[StepResult]:
        """
        Shuffle with the epoch's own generator and step through every batch

        skip_batches drops the first batches of that order, for re-entering an
        epoch that max_steps interrupted.
        """
        generator = torch_generator(self.config.seed, stream, epoch)
        batches = iter_batches(samples, self.config.batch_size, generator=generator, pad_id=self.pad_id)
        results = []
        for batch in itertools.islice(batches, skip_batches, None):
            if max_steps is not None and self.step >= max_steps:
                break
            results.append(self.train_step(batch, epoch))
        return results


def corpus_texts(catalog: ItemCatalog, template: PromptTemplate) -> Iterable[str]:
    """Texts the base tokenizer is built from: the prompt template, then every title"""
    yield template.instruction
    yield template.input_prefix
    for title in catalog.titles():
        yield title


def build_vocabulary(catalog: ItemCatalog, template: PromptTemplate) -> Tuple[BaseTokenizer, ExpandedVocabulary]:
    tokenizer = build_base_tokenizer(corpus_texts(catalog, template))
    return tokenizer, expand_vocabulary(tokenizer, catalog)


def title_corpus(catalog: ItemCatalog, tokenizer: BaseTokenizer) -> List[EncodedSample]:
    """BOS + title + EOS per item with a non-empty title, for backbone pretraining"""
    samples = []
    for item in catalog:
        ids = tokenizer.encode(item.title)
        if not ids:
            continue
        tokens = [tokenizer.bos_id] + ids + [tokenizer.eos_id]
        samples.append(EncodedSample(
            tokens=tokens,
            loss_mask=[0] + [1] * (len(tokens) - 1),
            prompt_length=1,
            target=item.item_index
        ))
    return samples


def pretrain_backbone(
    model: CoveTransformer,
    catalog: ItemCatalog,
    tokenizer: BaseTokenizer,
    config: TrainConfig
) -> int:
    """Full-parameter next-token training on title-only text; returns steps taken"""
    corpus = title_corpus(catalog, tokenizer)
    if not corpus or config.pretrain_epochs == 0:
        return 0
    pretrain_config = config.model_copy(update={"mode": TrainMode.FULL, "freeze_item_table": False})
    trainer = Trainer(model, pretrain_config, pad_id=tokenizer.pad_id)
    for epoch in range(config.pretrain_epochs):
        results = trainer.run_epoch(corpus, epoch, stream="pretrain")
        mean_loss = sum(r.loss for r in results) / max(len(results), 1)
        logger.info(f"Pretrain epoch {epoch}: loss={mean_loss:.4f} over {len(results)} steps")
    return trainer.step


def train(
    split: DatasetSplit,
    catalog: ItemCatalog,
    model_config: ModelConfig,
    config: TrainConfig,
    template: Optional[PromptTemplate] = None,
    out_dir: Optional[Union[str, Path]] = None,
    resume_from: Optional[Union[str, Path]] = None
) -> Tuple[CoveTransformer, TrainingResult]:
    """
    Train a model on a prepared split

    Runs up to max_epochs (or max_steps), computing validation loss after
    each epoch. With out_dir, `last/` is rewritten every epoch and `best/`
    whenever validation loss improves (training loss when there is no
    validation split). Resuming from a checkpoint replays the remaining
    batches exactly as the uninterrupted run would, re-entering an epoch
    that max_steps cut short at the batch where it stopped.

    Args:
        split: Train/validation prompt samples
        catalog: Item catalog the samples index into
        model_config: Architecture; vocabulary sizes are filled in here
        config: Training settings
        template: Prompt text (also part of the tokenizer corpus)
        out_dir: Where checkpoints and loss_curve.csv go
        resume_from: Checkpoint directory to continue from

    Returns:
        (trained model, TrainingResult)

    Raises:
        ValueError: empty training split, or a resume checkpoint whose
            vocabulary or fingerprint does not match this run
    """
    if not split.train:
        raise ValueError("Training split is empty")
    template = template or PromptTemplate()
    seed_everything(config.seed)

    tokenizer, vocab = build_vocabulary(catalog, template)
    model_config = model_config.sized(tokenizer.size, catalog.count)
    fingerprint = config_fingerprint(model_config, config, template, config.seed)

    encode_kwargs = dict(
        loss_scope=config.loss_scope,
        include_titles=config.include_titles,
        include_target_title=template.include_target_title,
        max_seq_len=model_config.max_seq_len
    )
    train_samples = encode_samples(split.train, vocab, tokenizer, **encode_kwargs)
    val_samples = encode_samples(split.validation, vocab, tokenizer, **encode_kwargs)

    loss_curve: List[Dict[str, Any]] = []
    start_epoch = 0
    skip_batches = 0
    pretrained = False
    best_metric: Optional[float] = None
    best_epoch: Optional[int] = None

    if resume_from is not None:
        loaded = load_checkpoint(resume_from)
        if loaded.tokenizer.token_to_id != tokenizer.token_to_id or loaded.catalog.count != catalog.count:
            raise ValueError(f"Checkpoint {resume_from} was trained with a different vocabulary")
        if loaded.manifest.fingerprint != fingerprint:
            raise ValueError(
                f"Checkpoint fingerprint {loaded.manifest.fingerprint[:12]} does not match "
                f"this configuration ({fingerprint[:12]})"
            )
        model = loaded.model
        pretrained = loaded.manifest.pretrained
        trainer = Trainer(model, config, pad_id=tokenizer.pad_id)
        restore_optimizer(trainer.optimizer, model, loaded.optimizer_state)
        trainer.step = loaded.manifest.step
        if loaded.manifest.batch_offset:
            start_epoch, skip_batches = loaded.manifest.epoch, loaded.manifest.batch_offset
        else:
            start_epoch = loaded.manifest.epoch + 1
        loss_curve = list(loaded.loss_curve)
        best_metric = loaded.manifest.metrics.get("best_metric")
        best_epoch = loaded.manifest.metrics.get("best_epoch")
        best_epoch = int(best_epoch) if best_epoch is not None else None
        logger.info(
            f"Resuming from {resume_from} at epoch {start_epoch} (batch {skip_batches}), step {trainer.step}"
        )
    else:
        model = build_model(model_config, seed=config.seed)
        if config.mode == TrainMode.LORA:
            pretrain_backbone(model, catalog, tokenizer, config)
            pretrained = True
            model.attach_lora(config.lora_rank, config.lora_alpha, seed=derive_seed(config.seed, "init", 1))
        trainer = Trainer(model, config, pad_id=tokenizer.pad_id)

    initial_loss = trainer.evaluate_loss(train_samples[:config.batch_size])
    logger.info(
        f"Training {len(train_samples)} samples ({len(val_samples)} validation), "
        f"V_base={tokenizer.size}, |I|={catalog.count}, initial loss={initial_loss:.4f} "
        f"(ln W = {math.log(model_config.total_vocab):.4f})"
    )

    out_dir = Path(out_dir) if out_dir is not None else None
    epochs_completed = start_epoch
    batches_per_epoch = math.ceil(len(train_samples) / config.batch_size)
    final_train_loss = None
    for epoch in range(start_epoch, config.max_epochs):
        if config.max_steps is not None and trainer.step >= config.max_steps:
            break
        results = trainer.run_epoch(train_samples, epoch, max_steps=config.max_steps, skip_batches=skip_batches)
        batch_offset = skip_batches + len(results)
        if batch_offset >= batches_per_epoch:
            batch_offset = 0
        skip_batches = 0
        first_step = trainer.step - len(results) + 1
        for offset, r in enumerate(results):
            loss_curve.append({
                "step": first_step + offset,
                "epoch": epoch,
                "train_loss": r.loss,
                "val_loss": None,
            })
        final_train_loss = sum(r.loss for r in results) / max(len(results), 1)
        val_loss = trainer.evaluate_loss(val_samples)
        if loss_curve:
            loss_curve[-1]["val_loss"] = val_loss
        if batch_offset == 0:
            epochs_completed = epoch + 1

        metric = val_loss if val_loss is not None else final_train_loss
        improved = best_metric is None or metric < best_metric
        if improved:
            best_metric, best_epoch = metric, epoch
        logger.info(
            f"Epoch {epoch}: train_loss={final_train_loss:.4f}, "
            f"val_loss={'n/a' if val_loss is None else f'{val_loss:.4f}'}, steps={trainer.step}"
        )

        if out_dir is not None:
            snapshot = {
                "train_loss": final_train_loss,
                "val_loss": val_loss,
                "best_metric": best_metric,
                "best_epoch": best_epoch,
            }
            checkpoint_args = dict(
                model=model, train_config=config, template=template, tokenizer=tokenizer,
                catalog=catalog, epoch=epoch, step=trainer.step, optimizer=trainer.optimizer,
                metrics=snapshot, loss_curve=loss_curve, pretrained=pretrained, batch_offset=batch_offset
            )
            save_checkpoint(out_dir / "last", **checkpoint_args)
            if improved:
                save_checkpoint(out_dir / "best", **checkpoint_args)
            write_csv(out_dir / "loss_curve.csv", loss_curve, columns=LOSS_CURVE_COLUMNS)

    result = TrainingResult(
        fingerprint=fingerprint,
        seed=config.seed,
        epochs_completed=epochs_completed,
        steps=trainer.step,
        initial_loss=initial_loss,
        final_train_loss=final_train_loss,
        best_loss=best_metric,
        best_epoch=best_epoch,
        best_checkpoint=str(out_dir / "best") if out_dir is not None and best_epoch is not None else None,
        last_checkpoint=str(out_dir / "last") if out_dir is not None else None,
        loss_curve=loss_curve
    )
    logger.info(f"Training complete: {result.epochs_completed} epochs, {result.steps} steps")
    return model, result
