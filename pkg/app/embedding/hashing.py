"""
Universal Hashing
h(i) = ((a*i + b) mod p) mod m with random a in [1, p], b in [0, p]
"""
import logging
from typing import Iterable, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from sympy import isprime

logger = logging.getLogger(__name__)

MERSENNE_31 = 2**31 - 1


class HashParams(BaseModel):
    """One member of the multiply-mod-prime family"""
    model_config = ConfigDict(frozen=True)

    a: int = Field(..., description="Multiplier in [1, p]")
    b: int = Field(..., description="Offset in [0, p]")
    p: int = Field(MERSENNE_31, description="Prime modulus, p > m")
    m: int = Field(..., ge=1, description="Shared-space size |S|")

    @model_validator(mode="after")
    def check_ranges(self):
        validate_modulus(self.p, self.m)
        if not 1 <= self.a <= self.p:
            raise ValueError(f"a={self.a} outside [1, {self.p}]")
        if not 0 <= self.b <= self.p:
            raise ValueError(f"b={self.b} outside [0, {self.p}]")
        return self


def validate_modulus(p: int, m: int) -> None:
    if m < 1:
        raise ValueError(f"Shared-space size must be >= 1, got {m}")
    if not isprime(p):
        raise ValueError(f"Hash modulus p={p} is not prime")
    if m >= p:
        raise ValueError(f"Shared-space size m={m} must be smaller than p={p}")


def sample_hash(rng_seed: int, p: int = MERSENNE_31, m: int = 1) -> HashParams:
    """
    Draw (a, b) uniformly for a fixed (p, m)

    Deterministic given rng_seed.
    """
    validate_modulus(p, m)
    rng = np.random.default_rng(rng_seed)
    a = int(rng.integers(1, p, endpoint=True))
    b = int(rng.integers(0, p, endpoint=True))
    return HashParams(a=a, b=b, p=p, m=m)


def hash_code(params: HashParams, item_index: int) -> int:
    """Exact evaluation in Python integers, so no platform overflow"""
    return ((params.a * int(item_index) + params.b) % params.p) % params.m


def hash_codes(params: HashParams, item_indices: Iterable[int]) -> List[int]:
    a, b, p, m = params.a, params.b, params.p, params.m
    return [((a * int(i) + b) % p) % m for i in item_indices]


def identity_hash(item_count: int, p: int = MERSENNE_31) -> HashParams:
    """a=1, b=0, m=|I|: every item keeps its own row (uncompressed reference)"""
    return HashParams(a=1, b=0, p=p, m=item_count)


def bucket_loads(params: HashParams, item_count: int) -> np.ndarray:
    """Number of items landing in each of the m buckets"""
    codes = hash_codes(params, range(item_count))
    return np.bincount(np.asarray(codes, dtype=np.int64), minlength=params.m)
