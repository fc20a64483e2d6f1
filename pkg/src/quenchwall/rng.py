"""Counter-based random streams.

Every random quantity in the package is drawn from an :class:`RngStream`,
a Philox4x64 generator keyed by ``(seed, stream)``.  Two streams with
different ids are statistically independent, and the output of a stream
depends on nothing but its key, so results do not depend on task order or
worker count.

Stream ids for experiment tasks are derived with :func:`task_stream`::

    stream = (wall_id << 24) | (replicate << 8) | role

which leaves 256 roles (wall sampling, grid, smc, mc, ...) per
``(wall, replicate)`` pair and 2**16 replicates per wall.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1

# role tags used by the harness when splitting streams
ROLE_WALL = 0
ROLE_GRID = 1
ROLE_SMC = 2
ROLE_MC = 3
ROLE_BOOTSTRAP = 4
ROLE_ANNEALED = 5
ROLE_TILT = 6


@dataclass(frozen=True)
class RngStream:
    """Key of a Philox stream; call :meth:`generator` for a fresh generator."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64 and 0 <= self.stream <= _MASK64):
            raise ValueError("seed and stream must be unsigned 64-bit integers")

    def generator(self) -> np.random.Generator:
        # identical keys always restart at counter zero
        return np.random.Generator(np.random.Philox(key=[self.seed, self.stream]))

    def split(self, child: int) -> "RngStream":
        """Derive a child stream; distinct children give distinct keys."""
        mixed = np.random.SeedSequence([self.seed, self.stream, child]).generate_state(2, np.uint64)
        return RngStream(int(mixed[0]), int(mixed[1]))

    def to_dict(self) -> dict:
        return {"seed": self.seed, "stream": self.stream}

    @classmethod
    def from_dict(cls, d: dict) -> "RngStream":
        return cls(int(d["seed"]), int(d["stream"]))


def task_stream(seed: int, wall_id: int, replicate: int = 0, role: int = ROLE_WALL) -> RngStream:
    if not (0 <= role < 256 and 0 <= replicate < 1 << 16 and 0 <= wall_id < 1 << 40):
        raise ValueError("wall_id, replicate or role out of range")
    return RngStream(seed, (wall_id << 24) | (replicate << 8) | role)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream or an existing Generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")
