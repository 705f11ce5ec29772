"""
Shared fixtures: a ten-item catalog, its vocabulary, a tiny synthetic split
and a small model built over them
"""
import pytest
import torch

from app.catalog.items import ItemCatalog
from app.catalog.prompts import PromptTemplate
from app.datasets.interactions import InteractionSequence
from app.datasets.splits import leave_last_out_split
from app.datasets.synthetic import SyntheticSpec, generate_synthetic
from app.nanomodel.config import ModelConfig
from app.nanomodel.transformer import build_model
from app.training.batching import encode_samples
from app.training.config import TrainConfig
from app.training.trainer import build_vocabulary

TITLES = [
    "red star", "blue moon", "green tree", "gold coin", "silver key",
    "black cat", "white dove", "amber lamp", "jade ring", "iron gate",
]


@pytest.fixture
def short_template():
    """Two-word prompt text keeps encoded samples short"""
    return PromptTemplate(instruction="recommend next", input_prefix="history:")


@pytest.fixture
def tiny_catalog():
    return ItemCatalog.from_records((f"item-{i}", title) for i, title in enumerate(TITLES))


@pytest.fixture
def chain_sequences():
    """Ten sequences of the deterministic chain i -> i + 1 (mod 10)"""
    return [
        InteractionSequence(user_id=f"u{u}", items=[(u + step) % 10 for step in range(5)])
        for u in range(10)
    ]


@pytest.fixture
def chain_split(chain_sequences, tiny_catalog, short_template):
    return leave_last_out_split(
        chain_sequences, tiny_catalog, max_history=4,
        template=short_template, validation_fraction=0.0, seed=0
    )


@pytest.fixture
def vocabulary(tiny_catalog, short_template):
    """(tokenizer, expanded vocabulary) for the ten-item catalog"""
    return build_vocabulary(tiny_catalog, short_template)


@pytest.fixture
def small_model_config():
    return ModelConfig(layers=2, heads=2, dim=16, ff_dim=32, max_seq_len=64, rate=2.0, k=2)


@pytest.fixture
def tiny_model(small_model_config, vocabulary, tiny_catalog):
    tokenizer, _ = vocabulary
    torch.manual_seed(0)
    return build_model(small_model_config.sized(tokenizer.size, tiny_catalog.count), seed=0)


@pytest.fixture
def encoded_chain(chain_split, vocabulary):
    tokenizer, vocab = vocabulary
    return encode_samples(chain_split.train, vocab, tokenizer)


@pytest.fixture
def fast_train_config():
    return TrainConfig(learning_rate=3e-3, batch_size=8, max_epochs=2, seed=0, validation_fraction=0.0)


@pytest.fixture
def synthetic_small():
    """Twelve items in two categories, short sequences"""
    return generate_synthetic(SyntheticSpec(
        n_items=12, n_categories=2, words_per_category=6, n_sequences=60,
        min_length=4, max_length=6, seed=0
    ))
