"""Whitespace tokenizer for object descriptors."""

from typing import Iterable, List, Sequence

import numpy as np

from src.config.constants import UNK_ID, UNK_TOKEN
from src.models.exceptions import UsageError


def split_tokens(text: str) -> List[str]:
    """Lowercase and split on whitespace."""
    return text.lower().split()


def build_vocab(texts: Iterable[str]) -> List[str]:
    """Distinct tokens of `texts` in first-occurrence order (no UNK entry)."""
    return extend_vocab([], texts)


def extend_vocab(vocab: Sequence[str], texts: Iterable[str]) -> List[str]:
    """Append tokens of `texts` missing from `vocab`, in first-occurrence order."""
    extended = list(vocab)
    seen = set(extended)
    for text in texts:
        for token in split_tokens(text):
            if token not in seen:
                seen.add(token)
                extended.append(token)
    return extended


def tokenize(text: str, vocab: Sequence[str]) -> List[int]:
    """Map a descriptor to token ids.

    Args:
        text: Nonblank descriptor text
        vocab: Ordered vocabulary; index 0 is reserved for UNK

    Returns:
        One id per whitespace token; unknown tokens map to 0
    """
    tokens = split_tokens(text)
    if not tokens:
        raise UsageError("cannot tokenize empty or blank text")
    if not vocab:
        raise UsageError(f"vocab must contain at least the {UNK_TOKEN} entry")
    index = {token: i for i, token in enumerate(vocab) if i != UNK_ID}
    return [index.get(token, UNK_ID) for token in tokens]


def bag_of_words(tokens: Sequence[int], vocab_size: int) -> np.ndarray:
    """Indicator vector of length `vocab_size`: 1 where a token id occurs."""
    vector = np.zeros(vocab_size, dtype=np.float64)
    for token in tokens:
        if not 0 <= token < vocab_size:
            raise UsageError(f"token id {token} out of range for vocab of size {vocab_size}")
        vector[token] = 1.0
    return vector
