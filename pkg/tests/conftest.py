from pathlib import Path

import numpy as np
import pytest

from tokpack.model import TokenizedMessage, tokenize_words

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def cat_basket() -> TokenizedMessage:
    return tokenize_words("The cat that hides inside a small basket")


@pytest.fixture
def demo_corpus_path() -> Path:
    return DATA_DIR / "demo_captions.txt"


@pytest.fixture
def subword_corpus_path() -> Path:
    return DATA_DIR / "demo_subword.jsonl"


def random_message(rng: np.random.Generator, k: int) -> TokenizedMessage:
    """A word-mode message of k distinct synthetic words."""
    words = [f"w{idx}x{int(rng.integers(1000))}" for idx in range(k)]
    return tokenize_words(" ".join(words))
