"""Exact expected token similarity over packet-erasure outcomes.

The expectation enumerates every subset of a group's packets, weighting
each by (1-p)^h * p^(N-h) for h surviving packets and scoring it by the
cosine similarity of the survivors' rendering to the full message.
"""

from __future__ import annotations

from dataclasses import dataclass

from .embedding import EmbeddingProvider, EvalCounter, SubsetCache, subset_similarity
from .errors import EnumerationLimitError
from .model import PacketGroup, TokenizedMessage

# Full enumeration above this many packets is never needed at paper scale.
DEFAULT_MAX_PACKETS = 20


@dataclass(frozen=True)
class ErasureModel:
    """Packet-level erasure channel: each packet is lost with probability p."""

    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"loss probability must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class AtsReport:
    """Exact expectation plus the per-subset breakdown behind it."""

    ats: float
    per_subset: tuple[tuple[int, float, float], ...]  # (packet mask, weight, similarity)
    counter_snapshot: EvalCounter


def subset_weight(model: ErasureModel, h: int, n: int) -> float:
    """Probability that exactly this h-packet subset survives out of n."""
    if not 0 <= h <= n:
        raise ValueError(f"survivor count {h} out of range 0..{n}")
    return (1.0 - model.p) ** h * model.p ** (n - h)


def exact_ats(
    group: PacketGroup,
    model: ErasureModel,
    cache: SubsetCache,
    provider: EmbeddingProvider,
    max_packets: int = DEFAULT_MAX_PACKETS,
) -> AtsReport:
    """Enumerate all 2^N packet-survival subsets in ascending mask order."""
    n = len(group.packets)
    if n > max_packets:
        raise EnumerationLimitError(f"N={n} exceeds the enumeration guard of {max_packets}")
    msg = group.message
    packet_positions = [packet.member_positions for packet in group.packets]
    total = 0.0
    per_subset: list[tuple[int, float, float]] = []
    for mask in range(1 << n):
        survivors: set[int] = set()
        for j in range(n):
            if mask >> j & 1:
                survivors |= packet_positions[j]
        weight = subset_weight(model, mask.bit_count(), n)
        similarity = subset_similarity(cache, provider, msg, survivors)
        total += weight * similarity
        per_subset.append((mask, weight, similarity))
    return AtsReport(
        ats=total,
        per_subset=tuple(per_subset),
        counter_snapshot=provider.counter.snapshot(),
    )


def single_packet_ats(msg: TokenizedMessage, model: ErasureModel) -> float:
    """Expected similarity when all tokens travel in one packet: 1 - p."""
    del msg  # the value depends only on the channel
    return 1.0 - model.p
