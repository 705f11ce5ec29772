"""
Checkpoints
Directory container: JSON manifest + raw little-endian float32 tensors named by
parameter path, Adam moments, tokenizer, catalog and loss curve
"""
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd
import torch
from pydantic import BaseModel, Field

from app.catalog.items import ItemCatalog
from app.catalog.prompts import PromptTemplate
from app.catalog.tokenizer import BaseTokenizer
from app.core.artifacts import fingerprint, load_tensor, read_json, save_tensor, write_csv, write_json
from app.embedding.compressed_table import CompressedItemTable
from app.nanomodel.config import ModelConfig
from app.nanomodel.transformer import CoveTransformer
from app.training.config import TrainConfig

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
LOSS_CURVE_COLUMNS = ["step", "epoch", "train_loss", "val_loss"]

# Loop length decides how long a run goes, not which run it is; resumed and
# extended runs keep their fingerprint.
_LOOP_LENGTH_FIELDS = {"max_epochs", "max_steps"}


def config_fingerprint(
    model_config: ModelConfig,
    train_config: TrainConfig,
    template: PromptTemplate,
    seed: int
) -> str:
    """SHA-256 over the settings that determine the trained model"""
    return fingerprint({
        "model": model_config.model_dump(mode="json"),
        "train": train_config.model_dump(mode="json", exclude=_LOOP_LENGTH_FIELDS),
        "prompt": template.model_dump(mode="json"),
        "seed": seed,
    })


class CheckpointManifest(BaseModel):
    """Contents of manifest.json"""
    fingerprint: str
    seed: int
    epoch: int = Field(..., description="Epoch the checkpoint was taken in")
    batch_offset: int = Field(
        0, ge=0, description="Batches of `epoch` taken when max_steps cut it short; 0 once it finished"
    )
    step: int = Field(..., description="Optimizer steps taken")
    metrics: Dict[str, Optional[float]] = Field(default_factory=dict)
    model: Dict[str, Any]
    train: Dict[str, Any]
    prompt: Dict[str, Any]
    pretrained: bool = Field(False, description="Title-only pretraining already ran (lora mode)")
    hash: Dict[str, Any] = Field(..., description="Item table hash manifest")
    lora: Optional[Dict[str, float]] = None
    tensors: Dict[str, List[int]] = Field(..., description="Parameter path -> shape")
    optimizer: Optional[Dict[str, Any]] = None


@dataclass
class LoadedCheckpoint:
    path: Path
    manifest: CheckpointManifest
    model: CoveTransformer
    tokenizer: BaseTokenizer
    catalog: ItemCatalog
    optimizer_state: Dict[str, Dict[str, Any]]
    loss_curve: List[Dict[str, Any]]

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig(**self.manifest.model)

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.manifest.train)

    @property
    def template(self) -> PromptTemplate:
        return PromptTemplate(**self.manifest.prompt)


def save_checkpoint(
    path: Union[str, Path],
    model: CoveTransformer,
    train_config: TrainConfig,
    template: PromptTemplate,
    tokenizer: BaseTokenizer,
    catalog: ItemCatalog,
    epoch: int,
    step: int,
    optimizer: Optional[torch.optim.Optimizer] = None,
    metrics: Optional[Dict[str, Optional[float]]] = None,
    loss_curve: Optional[List[Dict[str, Any]]] = None,
    pretrained: bool = False,
    batch_offset: int = 0
) -> Path:
    """
    Write a checkpoint directory, replacing any previous contents

    Args:
        path: Target directory
        model: Model (adapters included) to persist
        optimizer: Adam optimizer whose moments are stored per parameter
        metrics: Snapshot recorded in the manifest
        loss_curve: Rows (step, epoch, train_loss, val_loss)
        batch_offset: Batches of an epoch interrupted by max_steps
    """
    path = Path(path)
    if path.exists():
        shutil.rmtree(path)
    (path / "tensors").mkdir(parents=True)

    tensors: Dict[str, List[int]] = {}
    for name, param in model.named_parameters():
        save_tensor(path / "tensors" / f"{name}.bin", param)
        tensors[name] = list(param.shape)

    optimizer_manifest = None
    if optimizer is not None:
        optimizer_manifest = _save_optimizer(path / "optimizer", model, optimizer)

    adapters = model.lora_adapters()
    lora = None
    if adapters:
        lora = {"rank": adapters[0].rank, "alpha": adapters[0].alpha}

    manifest = CheckpointManifest(
        fingerprint=config_fingerprint(model.config, train_config, template, train_config.seed),
        seed=train_config.seed,
        epoch=epoch,
        batch_offset=batch_offset,
        step=step,
        metrics=metrics or {},
        model=model.config.model_dump(mode="json"),
        train=train_config.model_dump(mode="json"),
        prompt=template.model_dump(mode="json"),
        pretrained=pretrained,
        hash=model.item_table.manifest(),
        lora=lora,
        tensors=tensors,
        optimizer=optimizer_manifest
    )
    write_json(path / MANIFEST_FILE, manifest.model_dump(mode="json"))
    tokenizer.save(path / "tokenizer.json")
    catalog.save(path / "catalog.jsonl")
    write_csv(path / "loss_curve.csv", loss_curve or [], columns=LOSS_CURVE_COLUMNS)

    logger.info(f"Saved checkpoint (epoch={epoch}, step={step}) to {path}")
    return path


def _save_optimizer(
    directory: Path,
    model: CoveTransformer,
    optimizer: torch.optim.Optimizer
) -> Dict[str, Any]:
    directory.mkdir(parents=True, exist_ok=True)
    steps: Dict[str, int] = {}
    for name, param in model.named_parameters():
        state = optimizer.state.get(param)
        if not state:
            continue
        save_tensor(directory / f"{name}.exp_avg.bin", state["exp_avg"])
        save_tensor(directory / f"{name}.exp_avg_sq.bin", state["exp_avg_sq"])
        steps[name] = int(state["step"])
    group = optimizer.param_groups[0]
    return {
        "lr": group["lr"],
        "betas": list(group["betas"]),
        "eps": group["eps"],
        "steps": steps,
    }


def load_checkpoint(path: Union[str, Path]) -> LoadedCheckpoint:
    """
    Rebuild model, adapters, tokenizer and catalog from a checkpoint directory

    Optimizer moments come back keyed by parameter path; `restore_optimizer`
    installs them into an optimizer built over the same parameters.

    Raises:
        FileNotFoundError: no manifest at path
        ValueError: tensor files disagree with the manifest
    """
    path = Path(path)
    manifest = CheckpointManifest(**read_json(path / MANIFEST_FILE))

    model_config = ModelConfig(**manifest.model)
    item_table = CompressedItemTable.from_manifest(manifest.hash)
    model = CoveTransformer(model_config, item_table)
    if manifest.lora is not None:
        model.attach_lora(rank=int(manifest.lora["rank"]), alpha=manifest.lora["alpha"], seed=manifest.seed)

    params = dict(model.named_parameters())
    if set(params) != set(manifest.tensors):
        missing = sorted(set(manifest.tensors) ^ set(params))
        raise ValueError(f"{path}: checkpoint tensors do not match the model: {missing[:5]}")
    with torch.no_grad():
        for name, shape in manifest.tensors.items():
            params[name].copy_(load_tensor(path / "tensors" / f"{name}.bin", shape))

    optimizer_state: Dict[str, Dict[str, Any]] = {}
    if manifest.optimizer is not None:
        for name, step in manifest.optimizer["steps"].items():
            shape = manifest.tensors[name]
            optimizer_state[name] = {
                "step": step,
                "exp_avg": load_tensor(path / "optimizer" / f"{name}.exp_avg.bin", shape),
                "exp_avg_sq": load_tensor(path / "optimizer" / f"{name}.exp_avg_sq.bin", shape),
            }

    curve_path = path / "loss_curve.csv"
    loss_curve: List[Dict[str, Any]] = []
    if curve_path.exists() and curve_path.stat().st_size > 0:
        frame = pd.read_csv(curve_path)
        loss_curve = [
            {k: (None if pd.isna(v) else v) for k, v in row.items()}
            for row in frame.to_dict(orient="records")
        ]

    logger.info(f"Loaded checkpoint from {path} (epoch={manifest.epoch}, step={manifest.step})")
    return LoadedCheckpoint(
        path=path,
        manifest=manifest,
        model=model,
        tokenizer=BaseTokenizer.load(path / "tokenizer.json"),
        catalog=ItemCatalog.load(path / "catalog.jsonl"),
        optimizer_state=optimizer_state,
        loss_curve=loss_curve
    )


def restore_optimizer(
    optimizer: torch.optim.Optimizer,
    model: CoveTransformer,
    optimizer_state: Dict[str, Dict[str, Any]]
) -> None:
    """Install saved Adam moments and step counts"""
    params = dict(model.named_parameters())
    for name, state in optimizer_state.items():
        param = params[name]
        optimizer.state[param] = {
            "step": torch.tensor(float(state["step"])),
            "exp_avg": state["exp_avg"].to(param.dtype).clone(),
            "exp_avg_sq": state["exp_avg_sq"].to(param.dtype).clone(),
        }
