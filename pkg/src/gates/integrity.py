"""Integrity gates applied to every sample a dataset directory provides."""

import numpy as np

from src.gates.base import BaseGate, SampleRecord
from src.models.schemas import GateCheckResult


class ImageDimensionGate(BaseGate):
    """Gate: image channels and size agree with meta.json."""

    @property
    def name(self) -> str:
        return "image_dimensions"

    def check(self, record: SampleRecord) -> GateCheckResult:
        expected = (record.expected_channels, record.expected_size, record.expected_size)
        if record.image.shape != expected:
            return self._create_result(
                record,
                passed=False,
                reason=f"{record.image_path}: shape {list(record.image.shape)} does not match "
                       f"meta.json (channels={expected[0]}, image_size={expected[1]})"
            )
        return self._create_result(record, passed=True, reason="Dimensions match meta.json")


class MaskPresenceGate(BaseGate):
    """Gate: every anomalous image has a same-named mask."""

    @property
    def name(self) -> str:
        return "mask_presence"

    def check(self, record: SampleRecord) -> GateCheckResult:
        if record.requires_mask and record.mask is None:
            return self._create_result(
                record,
                passed=False,
                reason=f"{record.image_path}: missing mask {record.mask_path}"
            )
        return self._create_result(record, passed=True, reason="Mask requirement satisfied")


class MaskValidityGate(BaseGate):
    """Gate: a mask is binary, matches the image size and marks at least one pixel."""

    @property
    def name(self) -> str:
        return "mask_validity"

    def check(self, record: SampleRecord) -> GateCheckResult:
        mask = record.mask
        if mask is None:
            return self._create_result(record, passed=True, reason="No mask to validate")

        expected = (record.expected_size, record.expected_size)
        if mask.shape != expected:
            return self._create_result(
                record,
                passed=False,
                reason=f"{record.mask_path}: mask shape {list(mask.shape)} != image {list(expected)}"
            )
        if not np.all((mask == 0) | (mask == 1)):
            return self._create_result(
                record,
                passed=False,
                reason=f"{record.mask_path}: mask is not binary (expected only 0 and 255)"
            )
        if record.requires_mask and not mask.any():
            return self._create_result(
                record,
                passed=False,
                reason=f"{record.mask_path}: mask of an anomalous image is empty"
            )
        return self._create_result(record, passed=True, reason="Mask is valid")
