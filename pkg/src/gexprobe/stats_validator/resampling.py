"""Seeded bootstrap of a detection rate."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

CHUNK = 1000


@dataclass(frozen=True)
class BootstrapResult:
    mean: float
    stdev: float
    iterations: int
    seed: int


def _chunk_rates(data: np.ndarray, size: int, seq: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(seq)
    idx = rng.integers(0, data.size, size=(size, data.size))
    return data[idx].mean(axis=1)


def bootstrap_rate(detections: Sequence[bool], iterations: int = 10_000, seed: int = 0,
                   workers: int = 1) -> BootstrapResult:
    """Mean and sample stdev of resampled rates.

    Each chunk of 1000 resamples draws from its own spawned seed stream and
    chunks are concatenated in order, so the result does not depend on
    ``workers``.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    data = np.asarray(detections, dtype=float)
    if data.size == 0:
        raise ValueError("detections must be non-empty")
    sizes = [CHUNK] * (iterations // CHUNK) + ([iterations % CHUNK] if iterations % CHUNK else [])
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(_chunk_rates, [data] * len(sizes), sizes, seqs))
    rates = np.concatenate(parts)
    stdev = float(rates.std(ddof=1)) if rates.size > 1 else 0.0
    return BootstrapResult(float(rates.mean()), stdev, iterations, seed)
