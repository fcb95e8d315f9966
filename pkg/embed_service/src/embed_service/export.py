"""Batch export of embeddings into the JSON-lines cache format.

The cache starts with a header line {"dim", "model", "normalized": true}
followed by one {"text", "vector"} line per distinct text, which is the
format the aggregation library's file-cache provider loads.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from .encoders import TextEncoder
from .subsets import SentenceTokens, parse_corpus, render_subset, subset_texts

logger = logging.getLogger(__name__)

# all-subsets export scales as 2^K per sentence
MAX_SUBSET_TOKENS = 20
EXPORT_BATCH = 256


def export_cache(
    corpus_path: str | Path,
    out_path: str | Path,
    encoder: TextEncoder,
    subsets: str = "all",
    mode: str = "word",
    max_subset_tokens: int = MAX_SUBSET_TOKENS,
) -> int:
    """Embed corpus texts and write the cache file; returns the entry count.

    ``subsets="all"`` covers every survivor-subset rendering of every
    sentence (guarded at 2^K per sentence); ``subsets="none"`` covers
    only the full sentences.
    """
    if subsets not in ("all", "none"):
        raise ValueError(f"subsets must be 'all' or 'none', got {subsets!r}")
    sentences = parse_corpus(corpus_path, mode)
    texts: dict[str, None] = {}  # insertion-ordered dedup
    for sentence in sentences:
        k = len(sentence.surfaces)
        if subsets == "all":
            if k > max_subset_tokens:
                raise ValueError(
                    f"sentence {sentence.id}: K={k} exceeds the all-subsets "
                    f"guard of {max_subset_tokens}"
                )
            for text in subset_texts(sentence):
                texts.setdefault(text, None)
        else:
            texts.setdefault(_render_full(sentence), None)

    ordered = list(texts)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as fh:
        fh.write(
            json.dumps({"dim": encoder.dim, "model": encoder.model_id, "normalized": True})
            + "\n"
        )
        for start in range(0, len(ordered), EXPORT_BATCH):
            batch = ordered[start : start + EXPORT_BATCH]
            vectors = encoder.encode(batch)
            for text, vector in zip(batch, vectors):
                fh.write(json.dumps({"text": text, "vector": vector.tolist()}) + "\n")
    logger.info("exported %d embeddings to %s", len(ordered), out_path)
    return len(ordered)


def _render_full(sentence: SentenceTokens) -> str:
    return render_subset(sentence, tuple(range(len(sentence.surfaces))))
