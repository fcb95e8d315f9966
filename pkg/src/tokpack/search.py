"""Optimizers for the expected-similarity packet grouping problem.

Exhaustive search over all equal-size-block partitions, a uniformly
random baseline, and the genetic beam search: keep the top B groups each
generation, spawn L/B children per beam through single token swaps, and
select from children plus (under elitism) the kept parents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np

from .ats import DEFAULT_MAX_PACKETS, ErasureModel, exact_ats
from .embedding import EmbeddingProvider, EvalCounter, SubsetCache
from .errors import ConfigError, DegenerateGroupError, DivisibilityError, EnumerationLimitError
from .model import PacketGroup, TokenizedMessage, make_group

Seed = int | tuple[int, ...] | list[int] | np.random.SeedSequence

DEFAULT_MAX_GROUPS = 10**6


def partition_count(k: int, m: int) -> int:
    """Number of partitions of K positions into unordered size-M blocks."""
    if m < 1:
        raise DivisibilityError(f"packet length must be >= 1, got {m}")
    if k % m != 0:
        raise DivisibilityError(f"K={k} is not divisible by M={m}")
    n = k // m
    return math.factorial(k) // (math.factorial(m) ** n * math.factorial(n))


def enumerate_partitions(k: int, m: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    """Yield every unordered partition of 0..K-1 into size-M blocks once.

    Canonical stream order: each block is sorted, blocks are ordered by
    their smallest element, and the smallest remaining position anchors
    each new block, so the first partition is the identity grouping
    (0..M-1 | M..2M-1 | ...).
    """
    if m < 1:
        raise DivisibilityError(f"packet length must be >= 1, got {m}")
    if k % m != 0:
        raise DivisibilityError(f"K={k} is not divisible by M={m}")

    def rec(remaining: tuple[int, ...]) -> Iterator[tuple[tuple[int, ...], ...]]:
        if not remaining:
            yield ()
            return
        anchor, rest = remaining[0], remaining[1:]
        for companions in combinations(rest, m - 1):
            block = (anchor, *companions)
            taken = set(companions)
            next_remaining = tuple(p for p in rest if p not in taken)
            for tail in rec(next_remaining):
                yield (block, *tail)

    yield from rec(tuple(range(k)))


@dataclass(frozen=True)
class GBeamConfig:
    """Knobs of the genetic beam search."""

    population: int  # L: candidate groups per generation
    beam_width: int  # B: groups kept after ranking
    generations: int  # selection-mutation-evaluation cycles
    elitism: bool = True  # keep parents in the selection pool
    seed: int | tuple[int, ...] = 0
    swap_count: int = 1  # token swaps per child

    def __post_init__(self) -> None:
        if self.beam_width < 1 or self.beam_width > self.population:
            raise ConfigError(
                f"beam width must satisfy 1 <= B <= L, got B={self.beam_width} L={self.population}"
            )
        if self.population % self.beam_width != 0:
            raise ConfigError(
                f"population must be a multiple of beam width, got L={self.population} B={self.beam_width}"
            )
        if self.generations < 1:
            raise ConfigError(f"generation count must be >= 1, got {self.generations}")
        if self.swap_count < 1:
            raise ConfigError(f"swap count must be >= 1, got {self.swap_count}")


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_ats: float
    mean_ats: float


@dataclass(frozen=True)
class SearchResult:
    best_group: PacketGroup
    best_ats: float
    history: tuple[GenerationStats, ...]
    counters: EvalCounter
    evaluated_groups: int


def random_pa(msg: TokenizedMessage, m: int, seed: Seed) -> PacketGroup:
    """Uniformly random partition: seeded shuffle cut into size-M blocks."""
    k = len(msg)
    if k % m != 0:
        raise DivisibilityError(f"K={k} is not divisible by M={m}")
    perm = np.random.default_rng(seed).permutation(k)
    blocks = [
        {int(p) for p in perm[i * m : (i + 1) * m]} for i in range(k // m)
    ]
    return make_group(msg, blocks, m)


def apply_swap(
    group: PacketGroup, i: int, j: int, pos_i: int, pos_j: int
) -> PacketGroup:
    """Swap position pos_i of packet i with pos_j of packet j."""
    if i == j:
        raise ValueError("swap needs two distinct packets")
    if pos_i not in group.packets[i].member_positions:
        raise ValueError(f"position {pos_i} is not in packet {i}")
    if pos_j not in group.packets[j].member_positions:
        raise ValueError(f"position {pos_j} is not in packet {j}")
    assignment = group.assignment()
    assignment[i].discard(pos_i)
    assignment[i].add(pos_j)
    assignment[j].discard(pos_j)
    assignment[j].add(pos_i)
    return make_group(group.message, assignment, group.config.M)


def mutate(group: PacketGroup, rng: np.random.Generator) -> PacketGroup:
    """One token-swapping mutation between two uniformly chosen packets.

    The input group is left unmodified; the result differs from it in
    exactly two packets and passes full partition validation.
    """
    n = len(group.packets)
    if n < 2:
        raise DegenerateGroupError("mutation needs at least two packets")
    m = group.config.M
    i, j = (int(x) for x in rng.choice(n, size=2, replace=False))
    pos_i = sorted(group.packets[i].member_positions)[int(rng.integers(m))]
    pos_j = sorted(group.packets[j].member_positions)[int(rng.integers(m))]
    return apply_swap(group, i, j, pos_i, pos_j)


def full_search(
    msg: TokenizedMessage,
    m: int,
    model: ErasureModel,
    provider: EmbeddingProvider,
    *,
    cache: SubsetCache | None = None,
    max_groups: int = DEFAULT_MAX_GROUPS,
    max_packets: int = DEFAULT_MAX_PACKETS,
) -> SearchResult:
    """Evaluate every partition; ties keep the first in enumeration order."""
    k = len(msg)
    count = partition_count(k, m)
    if count > max_groups:
        raise EnumerationLimitError(
            f"{count} partitions exceed the full-search guard of {max_groups}"
        )
    if cache is None:
        cache = SubsetCache(msg)
    best_group: PacketGroup | None = None
    best_ats = -math.inf
    evaluated = 0
    for blocks in enumerate_partitions(k, m):
        group = make_group(msg, blocks, m)
        score = exact_ats(group, model, cache, provider, max_packets).ats
        evaluated += 1
        if score > best_ats:
            best_group, best_ats = group, score
    assert best_group is not None
    return SearchResult(
        best_group=best_group,
        best_ats=best_ats,
        history=(),
        counters=provider.counter.snapshot(),
        evaluated_groups=evaluated,
    )


@dataclass
class _Candidate:
    group: PacketGroup
    ats: float
    born: int  # creation order, the universal tie-breaker


def _pool_stats(generation: int, pool: Sequence[_Candidate]) -> GenerationStats:
    scores = [c.ats for c in pool]
    return GenerationStats(generation, max(scores), sum(scores) / len(scores))


def gbeam_search(
    msg: TokenizedMessage,
    m: int,
    model: ErasureModel,
    provider: EmbeddingProvider,
    cfg: GBeamConfig,
    *,
    cache: SubsetCache | None = None,
    max_packets: int = DEFAULT_MAX_PACKETS,
) -> SearchResult:
    """Genetic beam search over packet groupings.

    A population of L random groups is refined over the configured
    generations: rank, keep the top B beams, spawn L/B children per beam
    by token swapping, and carry the children (plus the kept parents
    under elitism) into the next ranking.  Already-scored parents are
    never re-evaluated, so a run costs exactly (generations+1)*L group
    evaluations of 2^N subsets each.
    """
    k = len(msg)
    if k % m != 0:
        raise DivisibilityError(f"K={k} is not divisible by M={m}")
    n = k // m
    if cache is None:
        cache = SubsetCache(msg)

    if n == 1:
        group = make_group(msg, [set(range(k))], m)
        score = exact_ats(group, model, cache, provider, max_packets).ats
        return SearchResult(
            best_group=group,
            best_ats=score,
            history=(GenerationStats(0, score, score),),
            counters=provider.counter.snapshot(),
            evaluated_groups=1,
        )

    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.population + 1)
    mutation_rng = np.random.default_rng(seeds[-1])

    def evaluate(group: PacketGroup, born: int) -> _Candidate:
        score = exact_ats(group, model, cache, provider, max_packets).ats
        return _Candidate(group, score, born)

    pool = [
        evaluate(random_pa(msg, m, seeds[i]), born=i) for i in range(cfg.population)
    ]
    born = cfg.population
    evaluated = cfg.population
    best = min(pool, key=lambda c: (-c.ats, c.born))
    history = [_pool_stats(0, pool)]

    children_per_beam = cfg.population // cfg.beam_width
    for gen in range(1, cfg.generations + 1):
        ranked = sorted(pool, key=lambda c: (-c.ats, c.born))
        beams = ranked[: cfg.beam_width]
        children: list[_Candidate] = []
        for beam in beams:
            for _ in range(children_per_beam):
                child_group = beam.group
                for _ in range(cfg.swap_count):
                    child_group = mutate(child_group, mutation_rng)
                child = evaluate(child_group, born)
                born += 1
                evaluated += 1
                children.append(child)
                if child.ats > best.ats:
                    best = child
        pool = children + (beams if cfg.elitism else [])
        history.append(_pool_stats(gen, pool))

    return SearchResult(
        best_group=best.group,
        best_ats=best.ats,
        history=tuple(history),
        counters=provider.counter.snapshot(),
        evaluated_groups=evaluated,
    )


def full_search_encoding_steps(k: int) -> int:
    """Text encodings to precompute every survivor subset: 2^K."""
    return 2**k


def gbeam_encoding_steps(generations: int, population: int, n: int) -> int:
    """Beam-search encoding count, initial population excluded: G*L*2^N."""
    return generations * population * 2**n


def gbeam_encoding_steps_total(generations: int, population: int, n: int) -> int:
    """Encoding count including the initial population: (G+1)*L*2^N."""
    return (generations + 1) * population * 2**n
