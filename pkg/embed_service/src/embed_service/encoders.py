"""Text encoders behind the service.

Every encoder maps a batch of texts to L2-normalized float vectors and
is deterministic for a fixed model id.  ``hash`` ids give a dependency-
free stub for tests and offline runs; any other id is treated as a
Hugging Face CLIP checkpoint (the ``clip`` extra provides transformers
and torch).
"""

from __future__ import annotations

import hashlib
from typing import Protocol, Sequence

import numpy as np


class TextEncoder(Protocol):
    model_id: str
    dim: int

    def encode(self, texts: Sequence[str]) -> np.ndarray: ...


def _normalize_rows(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("encoder produced a zero vector")
    return vectors / norms


class HashEncoder:
    """Deterministic stub: blake2b(seed, text) seeds the vector draw."""

    def __init__(self, seed: int = 0, dim: int = 64):
        self.seed = seed
        self.dim = dim
        self.model_id = f"hash:seed={seed},dim={dim}"

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            h = hashlib.blake2b(digest_size=16, person=b"embed-service")
            h.update(str(self.seed).encode("ascii"))
            h.update(b"\x00")
            h.update(text.encode("utf-8"))
            rng = np.random.default_rng(int.from_bytes(h.digest(), "little"))
            out[i] = rng.standard_normal(self.dim)
        return _normalize_rows(out)


class ClipTextEncoder:
    """CLIP text tower via transformers; vectors are the projected pooled output.

    Inference is serialized with a lock so concurrent requests cannot
    interleave inside the model.
    """

    def __init__(self, model_id: str, batch_size: int = 64):
        try:
            import torch
            from transformers import CLIPTextModelWithProjection, CLIPTokenizerFast
        except ImportError as exc:  # pragma: no cover - depends on extras
            raise RuntimeError(
                "loading a CLIP checkpoint needs the 'clip' extra (transformers, torch)"
            ) from exc
        import threading

        self._torch = torch
        self._lock = threading.Lock()
        self.model_id = model_id
        self.batch_size = batch_size
        self._tokenizer = CLIPTokenizerFast.from_pretrained(model_id)
        self._model = CLIPTextModelWithProjection.from_pretrained(model_id)
        self._model.eval()
        self.dim = int(self._model.config.projection_dim)

    def encode(self, texts: Sequence[str]) -> np.ndarray:  # pragma: no cover - needs weights
        torch = self._torch
        chunks = []
        with self._lock, torch.no_grad():
            for start in range(0, len(texts), self.batch_size):
                batch = list(texts[start : start + self.batch_size])
                inputs = self._tokenizer(
                    batch, padding=True, truncation=True, return_tensors="pt"
                )
                embeds = self._model(**inputs).text_embeds
                chunks.append(embeds.cpu().numpy().astype(np.float64))
        return _normalize_rows(np.concatenate(chunks, axis=0))


def build_encoder(model_id: str) -> TextEncoder:
    """Resolve a model id: hash[:seed=S,dim=D] stub or a CLIP checkpoint."""
    if model_id.startswith("hash"):
        options = {"seed": 0, "dim": 64}
        _, _, rest = model_id.partition(":")
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, sep, value = item.partition("=")
            if not sep or key not in options:
                raise ValueError(f"unknown hash encoder option {item!r}")
            options[key] = int(value)
        return HashEncoder(**options)
    return ClipTextEncoder(model_id)
