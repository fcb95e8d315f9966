"""Embedding providers, cosine similarity, and the survivor-subset cache.

A provider maps text deterministically to a unit vector.  Each provider
instance keeps a text-keyed memo plus an EvalCounter: ``raw_requests``
counts every request under the accounting where each similarity query
costs one text encoding, while ``cache_misses`` counts the distinct
query texts actually pushed through the encoder (the full-message
reference embedding is amortized, mirroring how the per-candidate cost
model charges only the subset encodings).

Subset similarities against the full message are additionally memoized by
survivor-position bitmask (collision-free for K <= 64), so re-evaluating
the same survivor set across candidate groups costs nothing beyond the
raw-request bookkeeping.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, ProviderError, ZeroNormError
from .model import TokenizedMessage, render_positions

DEFAULT_DIM = 64
MAX_POSITIONS = 64  # bitmask keys must fit a machine word


@dataclass
class EvalCounter:
    """Embedding-evaluation accounting: requested vs actually computed."""

    raw_requests: int = 0
    cache_misses: int = 0

    def snapshot(self) -> "EvalCounter":
        return EvalCounter(self.raw_requests, self.cache_misses)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized cosine similarity, clipped into [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"incompatible shapes {a.shape} and {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine is undefined for zero-norm vectors")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


class EmbeddingProvider:
    """Base class: deterministic text -> unit vector with accounting.

    Subclasses implement ``_compute(text)``; results are renormalized
    defensively, memoized per distinct text, and safe for concurrent
    queries.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.counter = EvalCounter()
        self._memo: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def embed(self, text: str) -> np.ndarray:
        """Embed one text, counting the request."""
        self.count_request()
        return self.embed_uncounted(text)

    def count_request(self) -> None:
        with self._lock:
            self.counter.raw_requests += 1

    def embed_uncounted(self, text: str, count_miss: bool = True) -> np.ndarray:
        """Memoized embedding without raw-request accounting.

        Used by subset similarity, which does its own per-query
        accounting.  ``count_miss=False`` marks the amortized
        full-message reference embedding, which is kept out of both
        counters so cache_misses can never outrun raw_requests.
        """
        with self._lock:
            hit = self._memo.get(text)
        if hit is not None:
            return hit
        vec = np.asarray(self._compute(text), dtype=np.float64)
        if vec.shape != (self.dim,):
            raise ProviderError(f"provider returned shape {vec.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(vec)):
            raise ProviderError(f"provider returned non-finite components for {text!r}")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ProviderError(f"provider returned a zero vector for {text!r}")
        vec = vec / norm
        vec.setflags(write=False)
        with self._lock:
            if text not in self._memo:
                self._memo[text] = vec
                if count_miss:
                    self.counter.cache_misses += 1
            return self._memo[text]

    def _compute(self, text: str) -> np.ndarray:
        raise NotImplementedError


class HashProvider(EmbeddingProvider):
    """Seeded hash of the text into a D-dim direction; arbitrary geometry.

    blake2b(seed, text) seeds a PCG64 stream that draws the components,
    so the text -> vector map is reproducible run-to-run and platform-
    independent for a fixed seed.
    """

    def __init__(self, seed: int = 0, dim: int = DEFAULT_DIM):
        super().__init__(dim)
        self.seed = int(seed)

    def _compute(self, text: str) -> np.ndarray:
        h = hashlib.blake2b(digest_size=16, person=b"tokpack-hash")
        h.update(str(self.seed).encode("ascii"))
        h.update(b"\x00")
        h.update(text.encode("utf-8"))
        rng = np.random.default_rng(int.from_bytes(h.digest(), "little"))
        return rng.standard_normal(self.dim)


class AdditiveProvider(EmbeddingProvider):
    """Additive embeddings with per-token importance weights.

    Each distinct vocabulary surface owns one orthonormal basis direction
    and a weight; embed(text) whitespace-splits the text and returns the
    normalized weighted sum over its units.  Built for word-mode
    messages, where every rendered survivor subset consists of vocabulary
    words; unknown units raise ProviderError.
    """

    def __init__(
        self,
        vocabulary: Sequence[str],
        weights: Sequence[float] | None = None,
        dim: int = DEFAULT_DIM,
    ):
        super().__init__(dim)
        if weights is None:
            weights = [1.0] * len(vocabulary)
        if len(weights) != len(vocabulary):
            raise ValueError(
                f"{len(weights)} weights for {len(vocabulary)} vocabulary entries"
            )
        self._index: dict[str, int] = {}
        self._weights: dict[str, float] = {}
        for surface, weight in zip(vocabulary, weights):
            if surface in self._weights:
                if self._weights[surface] != weight:
                    raise ValueError(f"conflicting weights for duplicate surface {surface!r}")
                continue
            self._index[surface] = len(self._index)
            self._weights[surface] = float(weight)
        if len(self._index) > dim:
            raise ValueError(
                f"{len(self._index)} distinct surfaces exceed dimension {dim}"
            )

    @classmethod
    def for_message(
        cls,
        msg: TokenizedMessage,
        weights: Sequence[float] | None = None,
        dim: int = DEFAULT_DIM,
    ) -> "AdditiveProvider":
        """Provider over the message's token surfaces, weights per token."""
        return cls([t.surface for t in msg.tokens], weights=weights, dim=dim)

    def _compute(self, text: str) -> np.ndarray:
        units = text.split()
        if not units:
            raise ProviderError("additive provider cannot embed empty text")
        vec = np.zeros(self.dim, dtype=np.float64)
        for unit in units:
            idx = self._index.get(unit)
            if idx is None:
                raise ProviderError(f"unit {unit!r} is not in the additive vocabulary")
            vec[idx] += self._weights[unit]
        return vec


CACHE_HEADER_KEYS = {"dim", "model", "normalized"}


def write_embedding_cache(
    path: str | Path,
    dim: int,
    model: str,
    entries: Iterable[tuple[str, Sequence[float]]],
) -> int:
    """Write the JSON-lines cache format; returns the entry count."""
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"dim": dim, "model": model, "normalized": True}) + "\n")
        for text, vector in entries:
            fh.write(json.dumps({"text": text, "vector": [float(x) for x in vector]}) + "\n")
            count += 1
    return count


def load_embedding_cache(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Load a cache file; returns (header, text -> vector map)."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise ProviderError(f"{path}: missing cache header")
        header = json.loads(header_line)
        if not CACHE_HEADER_KEYS.issubset(header):
            raise ProviderError(f"{path}: header must carry keys {sorted(CACHE_HEADER_KEYS)}")
        dim = int(header["dim"])
        entries: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            record = json.loads(line)
            vec = np.asarray(record["vector"], dtype=np.float64)
            if vec.shape != (dim,):
                raise ProviderError(f"{path}:{lineno}: vector length {vec.shape} != dim {dim}")
            entries[record["text"]] = vec
    return header, entries


class FileCacheProvider(EmbeddingProvider):
    """Serves embeddings from a precomputed text -> vector map.

    Strict mode raises ProviderError on any text absent from the cache;
    otherwise an optional fallback provider computes the missing vector.
    """

    def __init__(
        self,
        entries: Mapping[str, np.ndarray],
        dim: int,
        model: str = "",
        strict: bool = True,
        fallback: EmbeddingProvider | None = None,
    ):
        super().__init__(dim)
        self.model = model
        self.strict = strict
        self.fallback = fallback
        self._entries = dict(entries)

    @classmethod
    def from_path(
        cls,
        path: str | Path,
        strict: bool = True,
        fallback: EmbeddingProvider | None = None,
    ) -> "FileCacheProvider":
        header, entries = load_embedding_cache(path)
        return cls(
            entries,
            dim=int(header["dim"]),
            model=str(header.get("model", "")),
            strict=strict,
            fallback=fallback,
        )

    def _compute(self, text: str) -> np.ndarray:
        vec = self._entries.get(text)
        if vec is not None:
            return vec
        if self.strict or self.fallback is None:
            raise ProviderError(f"text not in embedding cache: {text!r}")
        return self.fallback._compute(text)


class RemoteProvider(EmbeddingProvider):
    """Client for the embedding-service wire protocol.

    GET /health learns the model id and dimension; POST /embed with
    {"texts": [...]} returns aligned unit vectors.  Transient failures
    (connection errors, 5xx) are retried once, then raised as
    ProviderError so experiment runs stay deterministic in length.
    """

    def __init__(self, url: str, timeout: float = 30.0):
        import requests  # local import keeps offline use dependency-light

        self._requests = requests
        self.url = url.rstrip("/")
        self.timeout = timeout
        health = self._call("GET", "/health")
        self.model = str(health["model"])
        super().__init__(int(health["dim"]))

    def _call(self, method: str, route: str, payload: dict | None = None) -> dict:
        last_error: Exception | None = None
        for _ in range(2):  # one retry on transient failure
            try:
                response = self._requests.request(
                    method, self.url + route, json=payload, timeout=self.timeout
                )
                if response.status_code >= 500:
                    last_error = ProviderError(
                        f"{route} returned {response.status_code}: {response.text[:200]}"
                    )
                    continue
                if response.status_code >= 400:
                    raise ProviderError(
                        f"{route} rejected the request ({response.status_code}): "
                        f"{response.text[:200]}"
                    )
                return response.json()
            except self._requests.RequestException as exc:
                last_error = exc
        raise ProviderError(f"embedding service unreachable at {self.url}{route}: {last_error}")

    def _compute(self, text: str) -> np.ndarray:
        body = self._call("POST", "/embed", {"texts": [text]})
        vectors = body.get("vectors", [])
        if len(vectors) != 1:
            raise ProviderError(f"service returned {len(vectors)} vectors for one text")
        return np.asarray(vectors[0], dtype=np.float64)


def positions_mask(positions: Iterable[int], k: int) -> int:
    """Bitmask of a survivor-position set over 0..K-1."""
    mask = 0
    for pos in positions:
        if not 0 <= pos < k:
            raise ValueError(f"position {pos} out of range 0..{k - 1}")
        mask |= 1 << pos
    return mask


class SubsetCache:
    """Bitmask-keyed memo of survivor-subset similarity to the full text.

    Insertion is serialized; lookups may run concurrently.  K is capped
    at 64 so masks stay collision-free machine words.
    """

    def __init__(self, msg: TokenizedMessage):
        if len(msg) > MAX_POSITIONS:
            raise ValueError(f"K={len(msg)} exceeds the bitmask limit of {MAX_POSITIONS}")
        self.message = msg
        self.full_mask = (1 << len(msg)) - 1
        self.full_text = msg.text()
        self.similarities: dict[int, float] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.similarities)


def subset_similarity(
    cache: SubsetCache,
    provider: EmbeddingProvider,
    msg: TokenizedMessage,
    survivor_positions: Iterable[int],
) -> float:
    """Cosine similarity of the survivors' rendering to the full message.

    The empty survivor set scores 0 by convention (an erased message
    carries no semantics).  Every call counts one raw request; only
    texts never embedded before count as cache misses.
    """
    if msg != cache.message:
        raise ValueError("subset cache was built for a different message")
    mask = positions_mask(survivor_positions, len(msg))
    provider.count_request()
    with cache._lock:
        hit = cache.similarities.get(mask)
    if hit is not None:
        return hit
    if mask == 0:
        score = 0.0
    else:
        positions = [i for i in range(len(msg)) if mask >> i & 1]
        text = render_positions(msg, positions)
        score = cosine(
            provider.embed_uncounted(text),
            provider.embed_uncounted(cache.full_text, count_miss=False),
        )
    with cache._lock:
        cache.similarities.setdefault(mask, score)
    return score
