"""
Hash-Compressed Item Embeddings
Universal hashing into a shared latent item space, k-way averaged lookup
"""
from app.embedding.hashing import (
    HashParams,
    MERSENNE_31,
    sample_hash,
    hash_code,
    hash_codes,
    identity_hash,
    bucket_loads
)
from app.embedding.compressed_table import (
    CompressedItemTable,
    CompressionStats,
    build_table,
    shared_rows_for_rate,
    item_embedding,
    accumulate_gradient,
    compression_stats
)

__all__ = [
    # Hashing
    "HashParams",
    "MERSENNE_31",
    "sample_hash",
    "hash_code",
    "hash_codes",
    "identity_hash",
    "bucket_loads",
    # Table
    "CompressedItemTable",
    "CompressionStats",
    "build_table",
    "shared_rows_for_rate",
    "item_embedding",
    "accumulate_gradient",
    "compression_stats",
]
