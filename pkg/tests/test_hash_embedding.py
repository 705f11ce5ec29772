"""
Tests for universal hashing and the compressed item-embedding table
"""
import numpy as np
import pytest
import torch
from pydantic import ValidationError
from scipy.stats import chisquare

from app.embedding import (
    CompressedItemTable,
    HashParams,
    MERSENNE_31,
    accumulate_gradient,
    bucket_loads,
    build_table,
    compression_stats,
    hash_code,
    identity_hash,
    item_embedding,
    sample_hash,
    shared_rows_for_rate
)
from app.training.gradcheck import central_difference


# ============================================================================
# Hash Family Tests
# ============================================================================

def test_hash_code_examples():
    """Known values of ((a*i + b) mod p) mod m"""
    assert hash_code(HashParams(a=1, b=0, p=MERSENNE_31, m=10), 5) == 5
    assert hash_code(HashParams(a=7, b=3, p=31, m=8), 10) == 3


def test_hash_code_is_exact_for_large_operands():
    """a * i exceeds 64 bits and is still evaluated exactly"""
    params = HashParams(a=MERSENNE_31, b=MERSENNE_31 - 1, p=MERSENNE_31, m=1000)
    i = 2**40 + 17
    assert hash_code(params, i) == ((MERSENNE_31 * i + MERSENNE_31 - 1) % MERSENNE_31) % 1000


def test_sample_hash_ranges_and_determinism():
    """a in [1, p], b in [0, p]; same seed gives the same pair"""
    for seed in range(200):
        params = sample_hash(seed, p=31, m=8)
        assert 1 <= params.a <= 31
        assert 0 <= params.b <= 31
    assert sample_hash(7, p=31, m=8) == sample_hash(7, p=31, m=8)


def test_hash_parameters_reject_bad_modulus():
    with pytest.raises(ValueError, match="not prime"):
        sample_hash(0, p=32, m=8)
    with pytest.raises(ValueError, match="smaller than p"):
        sample_hash(0, p=31, m=31)
    with pytest.raises(ValueError):
        HashParams(a=0, b=0, p=31, m=8)


def test_multiplier_is_uniform():
    """Chi-square on a over 10^4 draws with p=31"""
    draws = [sample_hash(seed, p=31, m=8).a for seed in range(10_000)]
    counts = np.bincount(draws, minlength=32)[1:]
    assert len(counts) == 31
    assert chisquare(counts).pvalue > 0.01


def test_codes_lie_in_shared_space():
    params = sample_hash(3, m=97)
    loads = bucket_loads(params, 5000)
    assert loads.shape == (97,)
    assert loads.sum() == 5000


def test_load_balance_over_seeds():
    """|I|=10000 into |S|=1250: max load within 3x mean for at least 19 of 20 seeds"""
    balanced = 0
    for seed in range(20):
        loads = bucket_loads(sample_hash(seed, m=1250), 10_000)
        if loads.max() <= 3 * loads.mean():
            balanced += 1
    assert balanced >= 19


# ============================================================================
# Table Sizing Tests
# ============================================================================

def test_shared_rows_for_rate_examples():
    assert shared_rows_for_rate(12101, 2) == 6051
    assert shared_rows_for_rate(100, 16) == 7
    assert shared_rows_for_rate(100, 1) == 100
    assert shared_rows_for_rate(18357, 16) == 1148


def test_rate_below_one_is_rejected():
    with pytest.raises(ValueError, match=">= 1"):
        shared_rows_for_rate(100, 0.5)


def test_compression_stats_example():
    """|I|=12101, |S|=6051, d=16 -> 96816 parameters"""
    table = build_table(12101, 16, rate=2, k=2, seed=0)
    stats = compression_stats(table)
    assert stats.shared_rows == 6051
    assert stats.parameter_count == 96816
    assert stats.ratio == pytest.approx(12101 / 6051)
    assert stats.model_dump() == {
        "item_count": 12101, "shared_rows": 6051, "dim": 16,
        "ratio": stats.ratio, "parameter_count": 96816,
    }
    with pytest.raises(ValidationError):
        stats.shared_rows = 1


def test_table_never_expands():
    with pytest.raises(ValueError, match="never expands"):
        CompressedItemTable(3, 4, [HashParams(a=1, b=0, p=31, m=5)])


# ============================================================================
# Lookup Tests
# ============================================================================

def _two_row_table(shared):
    """Item 0 reads row 0 through the first hash and row 1 through the second"""
    hashes = [HashParams(a=1, b=0, p=31, m=2), HashParams(a=1, b=1, p=31, m=2)]
    return CompressedItemTable(2, 2, hashes, shared=shared)


def test_item_embedding_averages_rows():
    """e1=[1,3], e2=[3,5] -> [2,4]"""
    table = _two_row_table(torch.tensor([[1.0, 3.0], [3.0, 5.0]]))
    assert table.item_codes(0) == [0, 1]
    assert torch.equal(item_embedding(table, 0), torch.tensor([2.0, 4.0]))


def test_single_hash_reads_one_row():
    shared = torch.arange(12, dtype=torch.float32).view(4, 3)
    table = CompressedItemTable(8, 3, [HashParams(a=1, b=0, p=31, m=4)], shared=shared)
    for i in range(8):
        assert torch.equal(table.item_embedding(i), shared[i % 4])


def test_identity_hash_is_uncompressed():
    table = CompressedItemTable.uncompressed(50, 4, seed=1)
    assert table.hashes == [identity_hash(50)]
    for i in range(50):
        assert torch.equal(table.item_embedding(i), table.shared[i])


def test_lookup_matches_brute_force():
    """Every item's embedding equals the mean of the rows its hashes address"""
    table = build_table(50, 8, rate=4, k=3, seed=1)
    batched = table(torch.arange(50))
    for i in range(50):
        rows = [table.shared[hash_code(h, i)] for h in table.hashes]
        expected = torch.stack(rows).mean(dim=0)
        assert torch.equal(table.item_embedding(i), expected)
        assert torch.allclose(batched[i], expected)


def test_lookup_rejects_out_of_range_index():
    table = build_table(10, 4, rate=2, k=2, seed=0)
    with pytest.raises(ValueError, match="out of range"):
        table.item_embedding(10)


def test_build_table_is_deterministic():
    first = build_table(40, 4, rate=4, k=2, seed=9)
    second = build_table(40, 4, rate=4, k=2, seed=9)
    assert first.hashes == second.hashes
    assert torch.equal(first.shared, second.shared)
    assert first.hashes != build_table(40, 4, rate=4, k=2, seed=10).hashes


def test_manifest_rebuilds_codes():
    table = build_table(40, 4, rate=4, k=2, seed=3)
    rebuilt = CompressedItemTable.from_manifest(table.manifest())
    assert torch.equal(rebuilt.codes, table.codes)


# ============================================================================
# Gradient Tests
# ============================================================================

def test_accumulate_gradient_distinct_rows():
    """Upstream [2,2] over two distinct rows adds [1,1] to each"""
    table = _two_row_table(torch.zeros(2, 2))
    sink = torch.zeros(2, 2)
    accumulate_gradient(table, 0, torch.tensor([2.0, 2.0]), sink)
    assert torch.equal(sink, torch.ones(2, 2))


def test_accumulate_gradient_colliding_rows():
    """Both hashes on one row: that row receives the full [2,2]"""
    same = HashParams(a=1, b=0, p=31, m=2)
    table = CompressedItemTable(2, 2, [same, same])
    sink = torch.zeros(2, 2)
    table.accumulate_gradient(0, torch.tensor([2.0, 2.0]), sink)
    assert torch.equal(sink[0], torch.tensor([2.0, 2.0]))
    assert torch.equal(sink[1], torch.zeros(2))


def test_accumulate_gradient_checks_shapes():
    table = _two_row_table(torch.zeros(2, 2))
    with pytest.raises(ValueError, match="upstream"):
        table.accumulate_gradient(0, torch.ones(3), torch.zeros(2, 2))


def test_gradient_matches_autograd_and_finite_differences():
    """Manual chain rule agrees with autograd and with central differences"""
    table = build_table(30, 6, rate=3, k=3, seed=2).double()
    weights = torch.linspace(-1.0, 1.0, 6, dtype=torch.float64)
    item = 11

    def loss_fn():
        return (table.item_embedding(item) ** 2 * weights).sum()

    loss = loss_fn()
    loss.backward()
    with torch.no_grad():
        upstream = 2 * weights * table.item_embedding(item)
    sink = torch.zeros_like(table.shared)
    table.accumulate_gradient(item, upstream, sink)
    assert torch.allclose(sink, table.shared.grad, atol=1e-12)

    for code in set(table.item_codes(item)):
        for col in range(6):
            numeric = central_difference(loss_fn, table.shared, (code, col), step=1e-3)
            assert numeric == pytest.approx(float(sink[code, col]), rel=1e-4, abs=1e-8)
