"""Base gate interface and pipeline for dataset integrity checks."""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.models.enums import GateResult
from src.models.exceptions import IntegrityError
from src.models.schemas import GateCheckResult

logger = logging.getLogger(__name__)


@dataclass
class SampleRecord:
    """One image file (and its mask file, if any) as read from disk.

    Attributes:
        sample_id: Sample name, e.g. "test/anomalous/004"
        image_path: Source file of the image
        image: [C, H, W] pixel values in [0, 1]
        expected_size: image_size from meta.json
        expected_channels: channels from meta.json
        requires_mask: Whether the split demands a mask (anomalous splits)
        mask_path: Where the mask is expected
        mask: [H, W] mask values, None when the file is absent
    """

    sample_id: str
    image_path: str
    image: np.ndarray
    expected_size: int
    expected_channels: int
    requires_mask: bool = False
    mask_path: Optional[str] = None
    mask: Optional[np.ndarray] = None

class BaseGate(ABC):
    """One integrity check on a sample read from disk."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Gate name identifier."""

    @abstractmethod
    def check(self, record: SampleRecord) -> GateCheckResult:
        """Check a record.

        Returns:
            GateCheckResult whose reason names the offending file on failure
        """

    def _create_result(self, record: SampleRecord, passed: bool, reason: str) -> GateCheckResult:
        return GateCheckResult(
            sample_id=record.sample_id,
            gate_name=self.name,
            gate_result=GateResult.PASS if passed else GateResult.FAIL,
            gate_reason=reason
        )


class GatePipeline:
    """Runs gates in order and stops at the first failure."""

    def __init__(self, gates: List[BaseGate]):
        self.gates = gates

    def run(self, record: SampleRecord) -> Tuple[bool, List[GateCheckResult]]:
        """Run the gates on one record (fail-fast).

        Args:
            record: Record to check

        Returns:
            (all passed, results of the gates that ran)
        """
        results: List[GateCheckResult] = []
        for gate in self.gates:
            result = gate.check(record)
            results.append(result)
            if not result.passed:
                logger.warning(f"Sample {record.sample_id} failed gate '{gate.name}': {result.gate_reason}")
                return False, results

        logger.debug(f"Sample {record.sample_id} passed all {len(self.gates)} gates")
        return True, results

    def require(self, record: SampleRecord) -> None:
        """Run the gates and raise on the first failure.

        Raises:
            IntegrityError: With the failing gate's reason
        """
        passed, results = self.run(record)
        if not passed:
            raise IntegrityError(results[-1].gate_reason)
