"""Deterministic, splittable random number streams.

A stream is a *value*: the pair ``(master_seed, stream_id)`` plus an
optional substream path. Every call to :meth:`RngStream.generator`
rebuilds the same counter-based generator from scratch, so any sampler
fed the same stream value produces the same draws, regardless of what
else has run before. Parallel work items (e.g. Monte Carlo
replications) get independent randomness by using distinct stream ids,
never by sharing mutable generator state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class RngStream:
    """Value-type handle for a reproducible random stream.

    ``master_seed`` selects the overall experiment; ``stream_id``
    selects a statistically independent stream under that seed
    (typically a replication index). ``substream(label)`` derives a
    further independent child, used to give data generation, resampling
    and inner simulation their own randomness within one replication.
    """

    master_seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for name in ("master_seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
            if not 0 <= int(value) <= _U64_MAX:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value}")
        if any(not isinstance(p, (int, np.integer)) or p < 0 for p in self.path):
            raise ValueError("substream labels must be nonnegative integers")

    def substream(self, label: int) -> "RngStream":
        """Derive an independent child stream identified by ``label``."""
        return RngStream(self.master_seed, self.stream_id, self.path + (int(label),))

    def generator(self) -> np.random.Generator:
        """Fresh counter-based generator positioned at the stream start."""
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed),
            spawn_key=(int(self.stream_id), *self.path),
        )
        return np.random.Generator(np.random.Philox(seq))
