"""Tokens, messages, packets, and packet groups.

A message is an ordered sequence of tokens addressed by position 0..K-1.
A packet group partitions those positions into N = K/M packets of exactly
M positions each.  Rendering turns any set of surviving positions back
into text: word-mode tokens are joined by single spaces, subword pieces
are glued to their predecessor when it also survived and otherwise shown
verbatim with a visible continuation marker.

All types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CorpusError, DivisibilityError, PartitionError

# Prefix shown when a continuation piece survives without its predecessor.
CONTINUATION_MARKER = "#"


class TokenizationMode(str, Enum):
    WORD = "word"
    PRETOKENIZED_SUBWORD = "pretokenized_subword"


@dataclass(frozen=True)
class Token:
    """One text unit pinned to its original sentence position.

    ``joins_previous`` marks a subword continuation piece that attaches to
    the token at the preceding position without a separator.
    """

    position: int
    surface: str
    joins_previous: bool = False

    def __post_init__(self) -> None:
        if self.position < 0:
            raise ValueError(f"token position must be >= 0, got {self.position}")
        if not self.surface:
            raise ValueError("token surface must be non-empty")


@dataclass(frozen=True)
class TokenizedMessage:
    """An ordered token sequence with positions exactly 0..K-1."""

    tokens: tuple[Token, ...]
    mode: TokenizationMode = TokenizationMode.WORD

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValueError("a message needs at least one token")
        for i, tok in enumerate(self.tokens):
            if tok.position != i:
                raise ValueError(
                    f"token positions must be 0..K-1 in order; "
                    f"index {i} holds position {tok.position}"
                )

    def __len__(self) -> int:
        return len(self.tokens)

    def text(self) -> str:
        """Detokenization of the complete message."""
        return render_positions(self, range(len(self.tokens)))


@dataclass(frozen=True)
class PartitionConfig:
    """Shape of a partition: K tokens into N packets of length M."""

    K: int
    M: int
    N: int

    def __post_init__(self) -> None:
        if self.M < 1 or self.N < 1:
            raise ValueError(f"M and N must be >= 1, got M={self.M}, N={self.N}")
        if self.K != self.M * self.N:
            raise ValueError(f"K must equal M*N, got K={self.K}, M={self.M}, N={self.N}")


@dataclass(frozen=True)
class Packet:
    """A set of token positions transmitted atomically."""

    member_positions: frozenset[int]

    @property
    def mask(self) -> int:
        """Position bitmask of the packet's members."""
        m = 0
        for p in self.member_positions:
            m |= 1 << p
        return m


@dataclass(frozen=True)
class PacketGroup:
    """A validated partition of a message's token positions into packets."""

    message: TokenizedMessage
    packets: tuple[Packet, ...]
    config: PartitionConfig

    def __post_init__(self) -> None:
        k, m, n = self.config.K, self.config.M, self.config.N
        if k != len(self.message):
            raise PartitionError(
                f"config K={k} does not match message length {len(self.message)}"
            )
        if len(self.packets) != n:
            raise PartitionError(f"expected {n} packets, got {len(self.packets)}")
        seen: set[int] = set()
        for packet in self.packets:
            if len(packet.member_positions) != m:
                raise PartitionError(
                    f"packet size {len(packet.member_positions)} != M={m}"
                )
            overlap = seen & packet.member_positions
            if overlap:
                raise PartitionError(f"duplicate positions across packets: {sorted(overlap)}")
            seen |= packet.member_positions
        if seen != set(range(k)):
            missing = sorted(set(range(k)) - seen)
            extra = sorted(seen - set(range(k)))
            raise PartitionError(f"positions missing {missing}, out of range {extra}")

    def assignment(self) -> list[set[int]]:
        """The partition as plain position sets, in packet order."""
        return [set(p.member_positions) for p in self.packets]

    def canonical(self) -> tuple[tuple[int, ...], ...]:
        """Order-independent identity: sorted blocks, sorted by first element."""
        blocks = [tuple(sorted(p.member_positions)) for p in self.packets]
        return tuple(sorted(blocks))


def make_group(
    msg: TokenizedMessage, assignment: Sequence[Iterable[int]], m: int
) -> PacketGroup:
    """Build a validated PacketGroup from position sets.

    Raises DivisibilityError when K mod M != 0, PartitionError when the
    sets overlap, miss a position, or have the wrong size.
    """
    k = len(msg)
    if m < 1:
        raise PartitionError(f"packet length must be >= 1, got {m}")
    if k % m != 0:
        raise DivisibilityError(f"K={k} is not divisible by M={m}")
    config = PartitionConfig(K=k, M=m, N=k // m)
    packets = tuple(Packet(frozenset(block)) for block in assignment)
    return PacketGroup(message=msg, packets=packets, config=config)


def render_positions(msg: TokenizedMessage, positions: Iterable[int]) -> str:
    """Render the surviving positions back to text in original order.

    Word mode joins surfaces with single spaces.  Subword mode glues a
    ``joins_previous`` token onto the previous unit only when the token at
    the immediately preceding position also survived; an orphaned piece is
    rendered verbatim behind the continuation marker.  The empty survivor
    set renders as the empty string.
    """
    surviving = sorted(set(positions))
    if surviving and (surviving[0] < 0 or surviving[-1] >= len(msg)):
        raise ValueError(f"positions out of range 0..{len(msg) - 1}: {surviving}")
    units: list[str] = []
    subword = msg.mode is TokenizationMode.PRETOKENIZED_SUBWORD
    prev = None
    for pos in surviving:
        tok = msg.tokens[pos]
        if subword and tok.joins_previous:
            if prev == pos - 1 and units:
                units[-1] += tok.surface
            else:
                units.append(CONTINUATION_MARKER + tok.surface)
        else:
            units.append(tok.surface)
        prev = pos
    return " ".join(units)


def reconstruct_text(msg: TokenizedMessage, surviving_packets: Iterable[Packet]) -> str:
    """Text recovered from the union of the surviving packets' positions."""
    positions: set[int] = set()
    for packet in surviving_packets:
        positions |= packet.member_positions
    return render_positions(msg, positions)


def tokenize_words(line: str) -> TokenizedMessage:
    """Whitespace word tokenization; the only built-in tokenizer."""
    surfaces = line.split()
    if not surfaces:
        raise CorpusError("cannot tokenize an empty line")
    tokens = tuple(Token(position=i, surface=s) for i, s in enumerate(surfaces))
    return TokenizedMessage(tokens=tokens, mode=TokenizationMode.WORD)


@dataclass(frozen=True)
class CorpusSentence:
    id: str
    message: TokenizedMessage


def load_corpus(
    path: str | Path, mode: TokenizationMode = TokenizationMode.WORD
) -> list[CorpusSentence]:
    """Read a corpus file.

    Word mode: UTF-8 text, one sentence per line, blank lines skipped,
    ids are the 0-based sentence ordinals.  Pretokenized mode: JSON lines
    with fields {"id", "tokens": [{"surface", "joins_previous"}]}.
    """
    path = Path(path)
    sentences: list[CorpusSentence] = []
    with path.open("r", encoding="utf-8") as fh:
        if mode is TokenizationMode.WORD:
            index = 0
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                sentences.append(CorpusSentence(id=str(index), message=tokenize_words(line)))
                index += 1
        else:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    tokens = tuple(
                        Token(
                            position=i,
                            surface=entry["surface"],
                            joins_previous=bool(entry.get("joins_previous", False)),
                        )
                        for i, entry in enumerate(record["tokens"])
                    )
                    message = TokenizedMessage(
                        tokens=tokens, mode=TokenizationMode.PRETOKENIZED_SUBWORD
                    )
                    sentences.append(CorpusSentence(id=str(record["id"]), message=message))
                except (KeyError, TypeError, ValueError) as exc:
                    raise CorpusError(f"{path}:{lineno}: malformed sentence record: {exc}") from exc
    return sentences
