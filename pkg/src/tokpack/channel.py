"""Monte Carlo packet-erasure simulator.

An independent validator for the exact expectation: packets are erased
independently with probability p, survivors are rendered and scored, and
the empirical mean comes with a standard error.

The RNG is numpy's PCG64 (``numpy.random.default_rng``), a named and
documented generator, so traces replicate across platforms for a fixed
seed.  Each trial consumes exactly N uniform draws, one per packet in
packet order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ats import ErasureModel
from .embedding import EmbeddingProvider, SubsetCache, subset_similarity
from .model import PacketGroup, render_positions

Seed = int | tuple[int, ...] | list[int]


@dataclass(frozen=True)
class ChannelTrace:
    """Per-trial survivor masks and similarities plus summary statistics."""

    seed: Seed
    trials: int
    survivor_masks: np.ndarray  # packet-subset bitmask per trial
    similarities: np.ndarray
    mean: float
    std_error: float


def _survival_matrix(model: ErasureModel, trials: int, n: int, seed: Seed) -> np.ndarray:
    # One uniform per packet per trial, row-major: trial i, packet j.
    draws = np.random.default_rng(seed).random((trials, n))
    return draws >= model.p


def simulate(
    group: PacketGroup,
    model: ErasureModel,
    trials: int,
    seed: Seed,
    cache: SubsetCache,
    provider: EmbeddingProvider,
) -> ChannelTrace:
    """Estimate the expected similarity over independent channel draws."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    n = len(group.packets)
    survive = _survival_matrix(model, trials, n, seed)
    packet_bits = np.array([1 << j for j in range(n)], dtype=np.uint64)
    masks = (survive.astype(np.uint64) * packet_bits).sum(axis=1, dtype=np.uint64)

    packet_positions = [packet.member_positions for packet in group.packets]
    unique_masks, inverse = np.unique(masks, return_inverse=True)
    scores = np.empty(len(unique_masks), dtype=np.float64)
    for i, mask in enumerate(unique_masks):
        survivors: set[int] = set()
        for j in range(n):
            if int(mask) >> j & 1:
                survivors |= packet_positions[j]
        scores[i] = subset_similarity(cache, provider, group.message, survivors)
    similarities = scores[inverse]

    mean = float(similarities.mean())
    std_error = (
        float(similarities.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    )
    similarities.setflags(write=False)
    masks.setflags(write=False)
    return ChannelTrace(
        seed=seed,
        trials=trials,
        survivor_masks=masks,
        similarities=similarities,
        mean=mean,
        std_error=std_error,
    )


def sample_received_text(group: PacketGroup, model: ErasureModel, seed: Seed) -> str:
    """Render the reconstruction from a single channel draw."""
    n = len(group.packets)
    survive = _survival_matrix(model, 1, n, seed)[0]
    positions: set[int] = set()
    for j in range(n):
        if survive[j]:
            positions |= group.packets[j].member_positions
    return render_positions(group.message, positions)
