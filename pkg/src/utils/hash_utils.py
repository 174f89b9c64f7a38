"""Hashing utilities for configs and parameter sets."""

import hashlib
import json
from typing import Any, Iterable, Tuple

import numpy as np


def hash_content(content: str) -> str:
    """Generate SHA256 hash of content.

    Args:
        content: Content to hash

    Returns:
        Hex digest of hash
    """
    return hashlib.sha256(content.encode('utf-8')).hexdigest()


def canonical_json(payload: Any) -> str:
    """Serialize a JSON-compatible payload with sorted keys and no whitespace."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def hash_payload(payload: Any) -> str:
    """SHA256 of the canonical JSON form of a payload.

    Args:
        payload: Dict/list of JSON-compatible values

    Returns:
        Hex digest of hash
    """
    return hash_content(canonical_json(payload))


def array_checksum(named_arrays: Iterable[Tuple[str, np.ndarray]]) -> str:
    """Checksum of named arrays as little-endian float32 bytes, in the given order.

    Args:
        named_arrays: (name, array) pairs

    Returns:
        Hex digest of hash
    """
    digest = hashlib.sha256()
    for name, array in named_arrays:
        digest.update(name.encode("utf-8"))
        digest.update(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return digest.hexdigest()
