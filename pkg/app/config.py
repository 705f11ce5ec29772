"""
Run Configuration
One JSON file plus dotted --set overrides; the root seed reaches every component
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from app.catalog.prompts import PromptTemplate
from app.core.artifacts import read_json
from app.datasets.synthetic import SyntheticSpec
from app.evaluation.evaluator import DEFAULT_KS
from app.nanomodel.config import ModelConfig
from app.training.checkpoint import config_fingerprint
from app.training.config import TrainConfig
from app.training.sweep import DEFAULT_RATES

logger = logging.getLogger(__name__)


class DataConfig(BaseModel):
    """Where interactions come from and where prepared splits go"""
    interactions: Optional[str] = Field(None, description="Interaction JSON-lines file for `prepare`")
    catalog: Optional[str] = Field(
        None, description="Existing catalog.jsonl whose indexing `prepare` must keep"
    )
    split_dir: str = Field("runs/split", description="Directory holding train/validation/test manifests")
    transitions: Optional[str] = Field(None, description="Ground-truth transitions.npy for the oracle baseline")
    max_history: int = Field(20, ge=1, description="Most recent history items per prompt (H)")
    synthetic: SyntheticSpec = Field(default_factory=SyntheticSpec)


class EvalConfig(BaseModel):
    """Metric cutoffs and sizes for evaluation, benchmark and probe"""
    ks: List[int] = Field(default_factory=lambda: list(DEFAULT_KS), description="Metric cutoffs K")
    batch_size: int = Field(64, ge=1)
    bench_samples: int = Field(100, ge=1, description="Test prompts timed per benchmark mode")
    bench_warmup: int = Field(5, ge=0)
    probe_items: int = Field(50, ge=1, description="Items sampled by the ID-title probe")

    @field_validator("ks")
    @classmethod
    def positive_ks(cls, value):
        if not value or any(k < 1 for k in value):
            raise ValueError(f"ks must be a non-empty list of integers >= 1, got {value}")
        return sorted(set(value))


class RunConfig(BaseModel):
    """
    Everything a CLI invocation needs

    `seed` is the root seed; it overrides train.seed and data.synthetic.seed
    so a single value drives every substream.
    """
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    prompt: PromptTemplate = Field(default_factory=PromptTemplate)
    data: DataConfig = Field(default_factory=DataConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    sweep_rates: List[float] = Field(default_factory=lambda: list(DEFAULT_RATES))
    output_dir: str = Field("runs", description="Root for checkpoints, metrics and reports")
    seed: int = 0

    @model_validator(mode="after")
    def propagate_seed(self):
        self.train = self.train.model_copy(update={"seed": self.seed})
        self.data.synthetic = self.data.synthetic.model_copy(update={"seed": self.seed})
        return self

    def fingerprint(self, base_vocab: int, item_count: int) -> str:
        """Fingerprint of the model this config trains on a given vocabulary"""
        return config_fingerprint(self.model.sized(base_vocab, item_count), self.train, self.prompt, self.seed)


def parse_override(text: str) -> tuple:
    """"train.learning_rate=3e-4" -> (["train", "learning_rate"], 3e-4); non-JSON values stay strings"""
    if "=" not in text:
        raise ValueError(f"Override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    path = [part for part in key.strip().split(".") if part]
    if not path:
        raise ValueError(f"Override {text!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_overrides(payload: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    for text in overrides:
        path, value = parse_override(text)
        node = payload
        for part in path[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            elif not isinstance(child, dict):
                raise ValueError(f"Override {text!r}: {part!r} is not a section")
            node = child
        node[path[-1]] = value
    return payload


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Sequence[str] = ()
) -> RunConfig:
    """
    Read a run config file (defaults when None) and apply --set overrides

    Raises:
        FileNotFoundError: config file missing
        ValueError: malformed override
        pydantic.ValidationError: values fail validation
    """
    payload: Dict[str, Any] = read_json(path) if path is not None else {}
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: run config must be a JSON object")
    config = RunConfig.model_validate(apply_overrides(payload, overrides))
    logger.debug(f"Loaded run config from {path or 'defaults'} with {len(overrides)} overrides")
    return config
