"""Corpus parsing and survivor-subset text rendering.

Implements the consumer-side file contracts: word-mode corpora are one
whitespace-tokenized sentence per line; pretokenized corpora are JSON
lines {"id", "tokens": [{"surface", "joins_previous"}]}.  Subset
rendering keeps original token order, joins word units with single
spaces, glues a continuation piece to its predecessor only when the
predecessor survived, and otherwise prefixes the visible "#" marker --
matching the aggregation library's reconstruction byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterator

CONTINUATION_MARKER = "#"


@dataclass(frozen=True)
class SentenceTokens:
    id: str
    surfaces: tuple[str, ...]
    joins_previous: tuple[bool, ...]


def parse_corpus(path: str | Path, mode: str = "word") -> list[SentenceTokens]:
    path = Path(path)
    sentences: list[SentenceTokens] = []
    with path.open("r", encoding="utf-8") as fh:
        if mode == "word":
            index = 0
            for line in fh:
                surfaces = tuple(line.split())
                if not surfaces:
                    continue
                sentences.append(
                    SentenceTokens(str(index), surfaces, (False,) * len(surfaces))
                )
                index += 1
        elif mode == "pretokenized_subword":
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                tokens = record["tokens"]
                sentences.append(
                    SentenceTokens(
                        str(record["id"]),
                        tuple(t["surface"] for t in tokens),
                        tuple(bool(t.get("joins_previous", False)) for t in tokens),
                    )
                )
        else:
            raise ValueError(f"unknown corpus mode {mode!r}")
    return sentences


def render_subset(sentence: SentenceTokens, positions: tuple[int, ...]) -> str:
    """Text of the surviving positions, empty set rendering as ""."""
    units: list[str] = []
    prev = None
    for pos in positions:
        if sentence.joins_previous[pos]:
            if prev == pos - 1 and units:
                units[-1] += sentence.surfaces[pos]
            else:
                units.append(CONTINUATION_MARKER + sentence.surfaces[pos])
        else:
            units.append(sentence.surfaces[pos])
        prev = pos
    return " ".join(units)


def subset_texts(sentence: SentenceTokens) -> Iterator[str]:
    """Every survivor-subset rendering, the empty one included."""
    k = len(sentence.surfaces)
    for size in range(k + 1):
        for positions in combinations(range(k), size):
            yield render_subset(sentence, positions)
