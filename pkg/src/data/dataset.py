"""In-memory dataset types."""

from dataclasses import dataclass, field, replace
from typing import Iterator, List, Optional, Sequence

import numpy as np

from src.config.constants import UNK_TOKEN
from src.data.tokenizer import tokenize
from src.models.enums import Verdict
from src.models.exceptions import IntegrityError


@dataclass(frozen=True, eq=False)
class Sample:
    """One (image, description) pair.

    Attributes:
        id: Stable sample name, e.g. "test/anomalous/003"
        image: [C, H, W] float64 array in [0, 1]
        tokens: Descriptor token ids
        label: Ground truth
        mask: [H, W] array of {0, 1}; set for anomalous test/validation samples
    """

    id: str
    image: np.ndarray
    tokens: List[int]
    label: Verdict = Verdict.NORMAL
    mask: Optional[np.ndarray] = None

    @property
    def is_anomalous(self) -> bool:
        return self.label == Verdict.ANOMALOUS

    @property
    def basename(self) -> str:
        return self.id.rsplit("/", 1)[-1]


@dataclass(frozen=True, eq=False)
class Dataset:
    """One category's splits plus its descriptor vocabulary.

    `vocab` is the descriptor's distinct tokens in first-occurrence order.
    Sample token ids index into `token_vocab`, which starts with the UNK
    token (`[<unk>] + vocab` unless re-tokenized with `with_vocab`).
    """

    category: str
    descriptor: str
    image_size: int
    channels: int
    vocab: List[str]
    train_normal: List[Sample] = field(default_factory=list)
    test_normal: List[Sample] = field(default_factory=list)
    test_anomalous: List[Sample] = field(default_factory=list)
    val_normal: List[Sample] = field(default_factory=list)
    val_anomalous: List[Sample] = field(default_factory=list)
    token_vocab: Optional[List[str]] = None

    def __post_init__(self):
        if self.token_vocab is None:
            object.__setattr__(self, "token_vocab", [UNK_TOKEN] + list(self.vocab))
        for sample in self.train_normal:
            if sample.is_anomalous or sample.mask is not None:
                raise IntegrityError(f"training sample {sample.id} must be normal and unmasked")

    @property
    def test(self) -> List[Sample]:
        return self.test_normal + self.test_anomalous

    @property
    def has_validation(self) -> bool:
        return bool(self.val_normal) or bool(self.val_anomalous)

    def splits(self) -> Iterator[tuple]:
        """(split name, samples) for every split, including empty ones."""
        yield "train_normal", self.train_normal
        yield "test_normal", self.test_normal
        yield "test_anomalous", self.test_anomalous
        yield "val_normal", self.val_normal
        yield "val_anomalous", self.val_anomalous

    def with_vocab(self, token_vocab: Sequence[str]) -> "Dataset":
        """Copy whose sample tokens index into `token_vocab` (index 0 is UNK)."""
        ids = tokenize(self.descriptor, token_vocab)

        def retokenize(samples: List[Sample]) -> List[Sample]:
            return [replace(sample, tokens=list(ids)) for sample in samples]

        return replace(
            self,
            train_normal=retokenize(self.train_normal),
            test_normal=retokenize(self.test_normal),
            test_anomalous=retokenize(self.test_anomalous),
            val_normal=retokenize(self.val_normal),
            val_anomalous=retokenize(self.val_anomalous),
            token_vocab=list(token_vocab),
        )
