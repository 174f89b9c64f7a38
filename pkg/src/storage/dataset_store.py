"""MVTec-style dataset directories.

Layout:
    meta.json                      {"category", "descriptor", "image_size", "channels"}
    train/normal/NNN.pgm
    test/normal/NNN.pgm
    test/anomalous/NNN.pgm
    test/masks/NNN.pgm             one per anomalous test image, 0/255
    val/{normal,anomalous,masks}/  optional validation splits

Colour datasets use .ppm for images; masks are always .pgm.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import ValidationError

from src.config.constants import MASK_DIRS, META_FILENAME, SPLIT_DIRS
from src.data.dataset import Dataset, Sample
from src.data.tokenizer import build_vocab, tokenize
from src.gates.base import GatePipeline, SampleRecord
from src.gates.integrity import ImageDimensionGate, MaskPresenceGate, MaskValidityGate
from src.models.enums import Verdict
from src.models.exceptions import FormatError, IntegrityError
from src.models.schemas import DatasetMeta
from src.storage.pnm import read_mask, read_pnm, write_mask, write_pnm

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm", ".ppm")
REQUIRED_SPLITS = ("train_normal", "test_normal", "test_anomalous")


class DatasetStore:
    """Reads and writes one category's dataset directory."""

    def __init__(self, root: Union[str, Path]):
        """Initialize dataset store.

        Args:
            root: Dataset root directory
        """
        self.root = Path(root)
        self.gate_pipeline = GatePipeline([
            ImageDimensionGate(),
            MaskPresenceGate(),
            MaskValidityGate(),
        ])

    # ------------------------------------------------------------------
    # Writing
    # ------------------------------------------------------------------

    def write(self, dataset: Dataset) -> Path:
        """Write meta.json, every image and every mask.

        Args:
            dataset: Dataset to persist

        Returns:
            Dataset root
        """
        self.root.mkdir(parents=True, exist_ok=True)
        meta = DatasetMeta(
            category=dataset.category,
            descriptor=dataset.descriptor,
            image_size=dataset.image_size,
            channels=dataset.channels,
        )
        (self.root / META_FILENAME).write_text(
            json.dumps(meta.model_dump(), indent=2) + "\n", encoding="utf-8"
        )

        suffix = ".pgm" if dataset.channels == 1 else ".ppm"
        for split, samples in dataset.splits():
            if split not in REQUIRED_SPLITS and not samples:
                continue
            split_dir = self.root / SPLIT_DIRS[split]
            split_dir.mkdir(parents=True, exist_ok=True)
            if split in MASK_DIRS:
                (self.root / MASK_DIRS[split]).mkdir(parents=True, exist_ok=True)
            for sample in samples:
                write_pnm(sample.image, split_dir / f"{sample.basename}{suffix}")
                if sample.mask is not None:
                    write_mask(sample.mask, self.root / MASK_DIRS[split] / f"{sample.basename}.pgm")

        logger.info(f"Wrote {dataset.category} dataset to {self.root}")
        return self.root

    # ------------------------------------------------------------------
    # Loading
    # ------------------------------------------------------------------

    def read_meta(self) -> DatasetMeta:
        path = self.root / META_FILENAME
        if not path.is_file():
            raise IntegrityError(f"{path}: missing dataset metadata")
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise FormatError(f"{path}: invalid JSON ({e})") from e
        try:
            return DatasetMeta.model_validate(payload)
        except ValidationError as e:
            raise IntegrityError(f"{path}: invalid metadata ({e.errors()[0]['msg']})") from e

    def _image_files(self, split: str) -> List[Path]:
        split_dir = self.root / SPLIT_DIRS[split]
        if not split_dir.is_dir():
            if split in REQUIRED_SPLITS:
                raise IntegrityError(f"{split_dir}: missing split directory")
            return []
        return sorted(p for p in split_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)

    def _load_split(self, split: str, meta: DatasetMeta, tokens: List[int]) -> List[Sample]:
        anomalous = split in MASK_DIRS
        samples = []
        for image_path in self._image_files(split):
            mask_path: Optional[Path] = None
            mask = None
            if anomalous:
                mask_path = self.root / MASK_DIRS[split] / f"{image_path.stem}.pgm"
                if mask_path.is_file():
                    mask = read_mask(mask_path)

            record = SampleRecord(
                sample_id=f"{SPLIT_DIRS[split]}/{image_path.stem}",
                image_path=str(image_path),
                image=read_pnm(image_path),
                expected_size=meta.image_size,
                expected_channels=meta.channels,
                requires_mask=anomalous,
                mask_path=str(mask_path) if mask_path else None,
                mask=mask,
            )
            self.gate_pipeline.require(record)

            samples.append(Sample(
                id=record.sample_id,
                image=record.image,
                tokens=list(tokens),
                label=Verdict.ANOMALOUS if anomalous else Verdict.NORMAL,
                mask=mask,
            ))
        return samples

    def load(self) -> Dataset:
        """Load and validate the dataset directory.

        Returns:
            Dataset with tokens indexing into [<unk>] + descriptor vocabulary

        Raises:
            IntegrityError: Missing metadata, split directory or mask, or
                images disagreeing with meta.json
            FormatError: An unreadable image or metadata file
        """
        meta = self.read_meta()
        vocab = build_vocab([meta.descriptor])
        if not vocab:
            raise IntegrityError(f"{self.root / META_FILENAME}: descriptor is empty")
        template = Dataset(
            category=meta.category,
            descriptor=meta.descriptor,
            image_size=meta.image_size,
            channels=meta.channels,
            vocab=vocab,
        )
        tokens = tokenize(meta.descriptor, template.token_vocab)

        splits: Dict[str, List[Sample]] = {
            split: self._load_split(split, meta, tokens) for split in SPLIT_DIRS
        }
        logger.info(
            f"Loaded {meta.category} dataset from {self.root}: "
            + ", ".join(f"{split}={len(samples)}" for split, samples in splits.items())
        )
        return Dataset(
            category=meta.category,
            descriptor=meta.descriptor,
            image_size=meta.image_size,
            channels=meta.channels,
            vocab=vocab,
            **splits,
        )


def write_dataset(dataset: Dataset, root: Union[str, Path]) -> Path:
    return DatasetStore(root).write(dataset)


def load_dataset(root: Union[str, Path]) -> Dataset:
    return DatasetStore(root).load()
