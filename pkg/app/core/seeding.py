"""
Seed Management
One root seed, named substreams for data, init, hash, training and eval
"""
import hashlib
import logging
import random

import numpy as np
import torch

logger = logging.getLogger(__name__)

SUBSTREAMS = ("data", "init", "hash", "training", "eval")


def derive_seed(root_seed: int, name: str, *extra: int) -> int:
    """
    Derive a substream seed from the root seed and a stream name

    Args:
        root_seed: Root seed recorded in every artifact
        name: Substream name ("data", "init", "hash", "training", "eval", ...)
        extra: Further integers (epoch, leg index) folded into the key

    Returns:
        Non-negative 63-bit integer seed
    """
    key = "/".join([str(int(root_seed)), name, *(str(int(e)) for e in extra)])
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "little") & ((1 << 63) - 1)


def numpy_rng(root_seed: int, name: str, *extra: int) -> np.random.Generator:
    """numpy Generator for a named substream"""
    return np.random.default_rng(derive_seed(root_seed, name, *extra))


def torch_generator(root_seed: int, name: str, *extra: int) -> torch.Generator:
    """torch CPU Generator for a named substream"""
    generator = torch.Generator()
    generator.manual_seed(derive_seed(root_seed, name, *extra))
    return generator


def seed_everything(root_seed: int) -> None:
    """
    Seed global RNGs and switch torch to deterministic kernels

    Components draw from named substreams; the global seeds only guard
    library code that reaches for the default generators.
    """
    random.seed(root_seed)
    np.random.seed(derive_seed(root_seed, "global") % (2**32))
    torch.manual_seed(derive_seed(root_seed, "global"))
    torch.use_deterministic_algorithms(True)
    logger.debug(f"Seeded global RNGs from root seed {root_seed}")
