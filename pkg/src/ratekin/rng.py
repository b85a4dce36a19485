"""Seeded random streams.

Every consumer of randomness receives an :class:`RngStream`. A stream is a
``(seed, stream_id)`` pair; sub-streams are derived by hashing labels into a
new ``stream_id`` so that independent purposes (initial population, skill
shocks, matching, outcomes, replicates) never share draws.

Splitting rule: a label is mapped to a 64-bit integer (integers as-is,
strings via the first 8 bytes of their SHA-256 digest), then
``SeedSequence([seed, stream_id, *labels]).generate_state(1, uint64)``
gives the child id. Generators are PCG64 seeded with
``SeedSequence(seed, spawn_key=(stream_id,))`` and normals come from
numpy's ziggurat ``standard_normal``.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

DEFAULT_SEED = 42
SEED_ENV = "RATEKIN_SEED"
_MASK64 = (1 << 64) - 1


def _label_to_int(label: int | str) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) <= _MASK64:
                raise DomainError(f"{name} must be an unsigned 64-bit integer, got {value}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(seq))

    def substream(self, *labels: int | str) -> RngStream:
        keys = [int(self.seed), int(self.stream_id)] + [_label_to_int(x) for x in labels]
        child = np.random.SeedSequence(keys).generate_state(1, np.uint64)[0]
        return RngStream(int(self.seed), int(child))


def resolve_seed(flag: int | None = None) -> int:
    """Seed precedence: explicit value, then ``RATEKIN_SEED``, then 42."""
    if flag is not None:
        return int(flag)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError as exc:
            raise DomainError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return DEFAULT_SEED
