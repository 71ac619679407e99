from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, List, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

# Stream ids. Every random draw in the package comes from
# rng_stream(seed, <stream id>, ...) so it can be replayed in isolation.
STREAM_WALKS = 1
STREAM_SPHERE = 2
STREAM_ROTATIONS = 3
STREAM_GRAM = 4
STREAM_VYSOTSKY = 5
STREAM_NORM = 6
STREAM_DILATION = 7

STREAM_NAMES = {
    STREAM_WALKS: "walks",
    STREAM_SPHERE: "sphere",
    STREAM_ROTATIONS: "rotations",
    STREAM_GRAM: "gram",
    STREAM_VYSOTSKY: "vysotsky",
    STREAM_NORM: "norm",
    STREAM_DILATION: "dilation",
}

SeedLike = Union[int, Sequence[int], np.random.Generator]


class BudgetExceededError(ValueError):
    """Raised when an exact combinatorial sum would be too large to evaluate."""


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    replications: int
    seed: Any

    @classmethod
    def from_samples(cls, samples: Any, seed: Any) -> "McEstimate":
        values = np.asarray(samples, dtype=float).ravel()
        count = int(values.size)
        if count == 0:
            raise ValueError("no samples")
        mean = float(values.mean())
        std_error = float(values.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
        return cls(mean=mean, std_error=std_error, replications=count, seed=seed)

    def scaled(self, factor: float) -> "McEstimate":
        return McEstimate(
            mean=self.mean * factor,
            std_error=self.std_error * abs(factor),
            replications=self.replications,
            seed=self.seed,
        )


@dataclass(frozen=True)
class VectorEstimate:
    mean: np.ndarray
    std_error: np.ndarray
    replications: int
    seed: Any

    @classmethod
    def from_samples(cls, samples: Any, seed: Any) -> "VectorEstimate":
        values = np.asarray(samples, dtype=float)
        if values.ndim != 2 or values.shape[0] == 0:
            raise ValueError("no samples")
        count = values.shape[0]
        if count > 1:
            std_error = values.std(axis=0, ddof=1) / math.sqrt(count)
        else:
            std_error = np.zeros(values.shape[1])
        return cls(mean=values.mean(axis=0), std_error=std_error, replications=count, seed=seed)


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for (seed, key...); independent of call order."""
    if seed is None:
        raise ValueError("seed is required")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(int(key) for key in keys))
    return np.random.Generator(np.random.Philox(sequence))


def as_generator(rng_seed: SeedLike, stream: int, *keys: int) -> np.random.Generator:
    """Generator for (seed, stream, key...); a tuple seed appends its tail to the keys."""
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    if isinstance(rng_seed, (tuple, list)):
        if not rng_seed:
            raise ValueError("seed is required")
        return rng_stream(rng_seed[0], stream, *rng_seed[1:], *keys)
    return rng_stream(rng_seed, stream, *keys)


def seed_key(rng_seed: SeedLike) -> Tuple[int, ...]:
    if isinstance(rng_seed, (tuple, list)):
        return tuple(int(value) for value in rng_seed)
    if isinstance(rng_seed, np.random.Generator):
        raise ValueError("a generator cannot be split into replicate streams; pass an integer seed")
    return (int(rng_seed),)


def chunk_bounds(total: int, chunk_size: int) -> List[Tuple[int, int]]:
    chunk_size = max(1, int(chunk_size))
    return [(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]


def run_chunks(task: Callable[[Tuple[int, int]], Any], bounds: List[Tuple[int, int]], workers: int = 1) -> List[Any]:
    """Evaluate task over replicate ranges; results come back in range order."""
    workers = max(1, int(workers or 1))
    if workers == 1 or len(bounds) <= 1:
        return [task(item) for item in bounds]
    logger.debug("Fanning %s chunks out to %s workers", len(bounds), workers)
    with ProcessPoolExecutor(max_workers=min(workers, len(bounds))) as pool:
        return list(pool.map(task, bounds))
