"""
Deterministic chunked Monte-Carlo.

Chunk `c` of a run always draws from `rng.child(c)`, so the concatenated per-sample values do
not depend on how many worker threads processed the chunks.
"""

import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from lie_entropy_lab.config import CHUNK_SIZE, DEFAULT_SIGMAS
from lie_entropy_lab.logger import logger

Sampler = Callable[[np.random.Generator, int], np.ndarray]


class RngStream(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(ge=0, lt=2**64)
    stream_id: int = Field(default=0, ge=0)
    path: tuple[int, ...] = ()

    def child(self, index: int) -> "RngStream":
        return RngStream(seed=self.seed, stream_id=self.stream_id, path=(*self.path, index))

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.path))
        return np.random.default_rng(sequence)


class EntropyEstimate(BaseModel):
    value: float
    std_error: float = Field(ge=0)
    n_samples: int = Field(gt=0)
    bias_budget: float = Field(default=0.0, ge=0)

    @classmethod
    def from_samples(cls, values: np.ndarray, bias_budget: float = 0.0) -> "EntropyEstimate":
        values = np.asarray(values, dtype=float)
        count = values.shape[0]
        std_error = float(np.std(values, ddof=1) / math.sqrt(count)) if count > 1 else 0.0
        return cls(
            value=float(np.mean(values)),
            std_error=std_error,
            n_samples=count,
            bias_budget=bias_budget,
        )

    def tolerance(self, sigmas: float = DEFAULT_SIGMAS) -> float:
        return sigmas * self.std_error + self.bias_budget

    def minus(self, other: "EntropyEstimate") -> "EntropyEstimate":
        return EntropyEstimate(
            value=self.value - other.value,
            std_error=math.hypot(self.std_error, other.std_error),
            n_samples=min(self.n_samples, other.n_samples),
            bias_budget=self.bias_budget + other.bias_budget,
        )

    def plus(self, other: "EntropyEstimate") -> "EntropyEstimate":
        return EntropyEstimate(
            value=self.value + other.value,
            std_error=math.hypot(self.std_error, other.std_error),
            n_samples=min(self.n_samples, other.n_samples),
            bias_budget=self.bias_budget + other.bias_budget,
        )

    def scaled(self, factor: float) -> "EntropyEstimate":
        return EntropyEstimate(
            value=self.value * factor,
            std_error=self.std_error * abs(factor),
            n_samples=self.n_samples,
            bias_budget=self.bias_budget * abs(factor),
        )

    def to_record(self) -> dict:
        return self.model_dump(mode="json")


def chunk_sizes(n_samples: int, chunk_size: int = CHUNK_SIZE) -> list[int]:
    full, rest = divmod(n_samples, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def run_chunked(
    sampler: Sampler,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> np.ndarray:
    """Evaluate `sampler(generator, size)` chunk by chunk and concatenate in chunk order."""
    if n_samples <= 0:
        raise ValueError("n_samples must be positive.")

    sizes = chunk_sizes(n_samples, chunk_size)

    def run_chunk(index: int) -> np.ndarray:
        return sampler(rng.child(index).generator(), sizes[index])

    logger.debug(f"Running {n_samples} samples in {len(sizes)} chunks on {threads} thread(s)")

    if threads <= 1:
        results = [run_chunk(index) for index in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(run_chunk, range(len(sizes))))

    return np.concatenate(results, axis=0)
