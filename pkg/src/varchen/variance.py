"""SVRG-style variance reduction: epoch anchors, batch sampling, corrected gradients.

Batches are drawn from numpy's Philox4x64 generator, a counter-based
bit generator, so a seed fully determines the batch sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

SAMPLING_MODES = ("without-replacement", "with-replacement")


@dataclass
class EpochAnchor:
    x_anchor: np.ndarray
    full_grad: np.ndarray
    samples_consumed: int = 0


def begin_epoch(problem, x) -> EpochAnchor:
    x = np.array(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite anchor point")
    return EpochAnchor(x, problem.grad(x), 0)


def corrected_gradient(problem, x, anchor: EpochAnchor, batch) -> np.ndarray:
    """``g(x, batch) - g(anchor, batch) + full_grad(anchor)`` on one shared batch."""
    batch = np.asarray(batch, dtype=np.intp)
    if batch.size == 0:
        raise ValueError("empty batch")
    if batch.min() < 0 or batch.max() >= problem.n_samples:
        raise ValueError("batch index out of range")
    return problem.grad(x, batch) - problem.grad(anchor.x_anchor, batch) + anchor.full_grad


class BatchSampler:
    """Emits the batches of one epoch; sizes never exceed the remaining budget ``N - M``."""

    def __init__(self, n_samples: int, batch_size: int, seed: int = 0,
                 sampling: str = "without-replacement"):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if sampling not in SAMPLING_MODES:
            raise ValueError(f"unknown sampling mode {sampling!r}")
        self.n_samples = int(n_samples)
        self.batch_size = int(batch_size)
        self.rng_seed = int(seed)
        self.sampling = sampling
        self.rng = np.random.Generator(np.random.Philox(self.rng_seed))

    def epoch(self) -> Iterator[np.ndarray]:
        N, m = self.n_samples, self.batch_size
        if self.sampling == "without-replacement":
            perm = self.rng.permutation(N)
            for start in range(0, N, m):
                yield perm[start:start + m]
        else:
            consumed = 0
            while consumed < N:
                size = min(m, N - consumed)
                yield self.rng.integers(0, N, size=size)
                consumed += size
