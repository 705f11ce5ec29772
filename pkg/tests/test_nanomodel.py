"""
Tests for the composite-vocabulary decoder, LoRA adapters and the ranking helpers
"""
import pytest
import torch
from pydantic import ValidationError

from app.nanomodel import (
    LoraAdapter,
    ModelConfig,
    apply_lora,
    build_model,
    greedy_decode,
    item_logits,
    rank_items,
    recommend_top_k
)


@pytest.fixture
def model():
    config = ModelConfig(layers=2, heads=2, dim=16, ff_dim=32, max_seq_len=32,
                         base_vocab=12, item_count=9, rate=3.0, k=2)
    return build_model(config, seed=0)


# ============================================================================
# Configuration Tests
# ============================================================================

def test_heads_must_divide_dim():
    with pytest.raises(ValidationError):
        ModelConfig(dim=10, heads=4)


def test_build_needs_vocabulary_sizes():
    with pytest.raises(ValueError, match="base_vocab"):
        build_model(ModelConfig(), seed=0)


def test_build_is_deterministic(model):
    again = build_model(model.config, seed=0)
    for (name, p), (_, q) in zip(model.named_parameters(), again.named_parameters()):
        assert torch.equal(p, q), name


# ============================================================================
# Forward Pass Tests
# ============================================================================

def test_logits_span_base_and_items(model):
    logits = model(torch.tensor([2, 5, 12, 20]))
    assert logits.shape == (1, 4, 12 + 9)


def test_item_tokens_read_the_compressed_table(model):
    """Base ids read the dense table; id V_base + i reads item i's averaged rows"""
    tokens = torch.tensor([3, 12 + 5, 7])
    embedded = model.embed_tokens(tokens)
    assert torch.equal(embedded[0], model.base_embed.weight[3])
    assert torch.equal(embedded[1], model.item_table(torch.tensor(5)))
    assert torch.equal(embedded[2], model.base_embed.weight[7])


def test_out_of_range_tokens_rejected(model):
    with pytest.raises(ValueError, match="Token ids"):
        model(torch.tensor([2, 21]))
    with pytest.raises(ValueError, match="Token ids"):
        model(torch.tensor([-1, 2]))


def test_overlong_sequence_rejected(model):
    with pytest.raises(ValueError, match="max_seq_len"):
        model(torch.zeros(33, dtype=torch.long))


@torch.no_grad()
def test_attention_is_causal(model):
    """Changing token t+1 leaves logits at positions <= t bit-identical"""
    tokens = torch.tensor([2, 4, 13, 6, 15, 8])
    before = model(tokens)
    changed = tokens.clone()
    changed[4] = 19
    after = model(changed)
    assert torch.equal(before[0, :4], after[0, :4])
    assert not torch.equal(before[0, 4], after[0, 4])


@torch.no_grad()
def test_tied_item_logits_are_inner_products(model):
    tokens = torch.tensor([2, 4, 6])
    hidden = model.hidden_states(tokens)[0, -1]
    logits = model(tokens)[0, -1]
    for i in range(model.item_count):
        expected = hidden @ model.item_table.item_embedding(i)
        assert float(logits[12 + i]) == pytest.approx(float(expected), abs=1e-5)


@torch.no_grad()
def test_untied_item_logits_come_from_the_item_head():
    config = ModelConfig(layers=1, heads=2, dim=16, ff_dim=32, max_seq_len=32,
                         base_vocab=12, item_count=9, rate=3.0, k=2, tied_item_head=False)
    untied = build_model(config, seed=0)
    assert untied.head_item.weight.shape == (9, 16)

    tokens = torch.tensor([2, 12 + 4, 6])
    hidden = untied.hidden_states(tokens)
    logits = untied(tokens)
    assert logits.shape == (1, 3, 12 + 9)
    assert torch.allclose(item_logits(logits, 9), hidden @ untied.head_item.weight.T, atol=1e-6)

    # the table still embeds item tokens but no longer scores them
    text_only = torch.tensor([2, 4, 6])
    before = untied(text_only)
    untied.item_table.shared += torch.linspace(-1.0, 1.0, 16)
    assert torch.equal(untied(text_only), before)


@torch.no_grad()
def test_shared_row_perturbation_moves_only_hashed_items(model):
    """Editing one shared row changes the logits of exactly the items that address it"""
    tokens = torch.tensor([2, 4, 6])
    before = item_logits(model(tokens)[0, -1], model.item_count)
    row = 0
    model.item_table.shared[row] += torch.linspace(-1.0, 1.0, model.config.dim)
    after = item_logits(model(tokens)[0, -1], model.item_count)
    for i in range(model.item_count):
        if row in model.item_table.item_codes(i):
            assert abs(float(after[i] - before[i])) > 1e-4
        else:
            assert torch.allclose(after[i], before[i], atol=1e-6)


# ============================================================================
# LoRA Tests
# ============================================================================

def test_apply_lora_example():
    """r=1, alpha=1, A=[1 0], B=[1;0], x=[2,3] adds [2,0]"""
    adapter = LoraAdapter("q_proj", 2, 2, rank=1, alpha=1.0)
    with torch.no_grad():
        adapter.A.copy_(torch.tensor([[1.0, 0.0]]))
        adapter.B.copy_(torch.tensor([[1.0], [0.0]]))
    weight = torch.eye(2)
    x = torch.tensor([2.0, 3.0])
    assert torch.equal(apply_lora(weight, adapter, x), torch.tensor([4.0, 3.0]))

    adapter.alpha = 2.0
    assert torch.equal(apply_lora(weight, adapter, x) - weight @ x, torch.tensor([4.0, 0.0]))


def test_fresh_adapter_is_identity():
    adapter = LoraAdapter("v_proj", 3, 3, rank=2, alpha=16.0)
    weight = torch.randn(3, 3)
    x = torch.randn(3)
    assert torch.equal(apply_lora(weight, adapter, x), weight @ x)


def test_apply_lora_checks_shapes():
    adapter = LoraAdapter("q_proj", 2, 2, rank=1)
    with pytest.raises(ValueError):
        apply_lora(torch.eye(2), adapter, torch.ones(3))


@torch.no_grad()
def test_attached_adapters_leave_logits_unchanged(model):
    tokens = torch.tensor([2, 4, 13, 6])
    before = model(tokens)
    adapters = model.attach_lora(rank=4, alpha=8.0, seed=0)
    assert len(adapters) == 2 * 4
    assert model.has_lora()
    assert torch.equal(model(tokens), before)


# ============================================================================
# Ranking Tests
# ============================================================================

def test_item_logits_slice():
    logits = torch.arange(11.0)
    assert item_logits(logits, 3).tolist() == [8.0, 9.0, 10.0]
    assert item_logits(logits, 0).numel() == 0


def test_rank_items_example():
    assert rank_items([0.1, 2.0, 0.5], 2) == [(1, 2.0), (2, 0.5)]


def test_rank_items_ties_prefer_lower_index():
    scores = [0.0, 0.0, 1.0, 0.0, 1.0]
    assert [i for i, _ in rank_items(scores, 3)] == [2, 4, 0]


def test_rank_items_truncates_to_item_count():
    assert len(rank_items([0.3, 0.2], 10)) == 2
    with pytest.raises(ValueError):
        rank_items([0.3], 0)


def test_rank_items_shift_invariant():
    scores = [0.4, -1.0, 2.5, 0.4, 1.1]
    shifted = [s + 7.0 for s in scores]
    assert [i for i, _ in rank_items(scores, 5)] == [i for i, _ in rank_items(shifted, 5)]


def test_recommend_uses_one_forward_pass(model):
    model.forward_calls = 0
    ranked = recommend_top_k(model, [2, 4, 13, 6], k=5)
    assert model.forward_calls == 1
    assert len(ranked) == 5
    scores = [s for _, s in ranked]
    assert scores == sorted(scores, reverse=True)


def test_greedy_decode_runs_one_pass_per_token(model):
    generated, passes = greedy_decode(model, [2, 4, 13], steps=4)
    assert passes == 4
    assert len(generated) == 4
    assert all(0 <= t < 21 for t in generated)


def test_greedy_decode_respects_max_seq_len(model):
    with pytest.raises(ValueError, match="max_seq_len"):
        greedy_decode(model, [2] * 30, steps=5)
