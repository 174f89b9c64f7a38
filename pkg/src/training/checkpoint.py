"""Checkpoint files: a JSON manifest line followed by a raw tensor blob.

Layout:
    <compact JSON manifest>\\n<little-endian values of every tensor>

The blob is float32 or float64 following the config's precision, so a
loaded model reproduces the saved one bit for bit.

The manifest records the format tag, the config, one entry per tensor
(name, shape, dtype, byte offset, byte count), training metadata and the
total blob size.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
from pydantic import ValidationError

from src.config.constants import BLOB_DTYPES, CHECKPOINT_FORMAT
from src.models.exceptions import IntegrityError
from src.models.schemas import CheckpointMetadata, Config
from src.network.params import ModelParams, parameter_shapes
from src.numerics.rng import Xoshiro256
from src.training.optimizer import Adam
from src.training.trainer import TrainState
from src.utils.hash_utils import canonical_json

logger = logging.getLogger(__name__)


def blob_dtype(config: Config) -> np.dtype:
    return np.dtype(BLOB_DTYPES[config.dtype])


def encode_checkpoint(state: TrainState) -> bytes:
    """Serialize a training state (Adam moments are not stored)."""
    tensors: List[Dict[str, Any]] = []
    chunks: List[bytes] = []
    dtype = blob_dtype(state.config)
    offset = 0
    for name, tensor in state.params.items():
        raw = np.ascontiguousarray(tensor.data, dtype=dtype).tobytes()
        tensors.append({
            "name": name,
            "shape": list(tensor.shape),
            "dtype": state.config.dtype,
            "offset": offset,
            "nbytes": len(raw),
        })
        chunks.append(raw)
        offset += len(raw)

    metadata = CheckpointMetadata(
        epochs_completed=state.epoch,
        step=state.step,
        seed=state.config.seed,
        final_loss=state.history[-1].loss if state.history else None,
        loss_history=state.history,
        rng_state=list(state.rng.state),
        threshold=state.threshold,
    )
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "config": state.config.to_json_dict(),
        "tensors": tensors,
        "metadata": metadata.model_dump(mode="json"),
        "blob_bytes": offset,
    }
    return canonical_json(manifest).encode("utf-8") + b"\n" + b"".join(chunks)


def decode_checkpoint(raw: bytes, source: str = "<bytes>") -> TrainState:
    """Parse and validate checkpoint bytes.

    Raises:
        IntegrityError: On a corrupt manifest, a truncated or oversized blob,
            or tensors that disagree with the stored config
    """
    header, separator, blob = raw.partition(b"\n")
    if not separator:
        raise IntegrityError(f"{source}: missing manifest terminator")
    try:
        manifest = json.loads(header.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise IntegrityError(f"{source}: corrupt manifest ({e})") from e
    if not isinstance(manifest, dict) or manifest.get("format") != CHECKPOINT_FORMAT:
        raise IntegrityError(f"{source}: not a {CHECKPOINT_FORMAT} checkpoint")

    try:
        config = Config.model_validate(manifest["config"])
        metadata = CheckpointMetadata.model_validate(manifest["metadata"])
        entries = manifest["tensors"]
        blob_bytes = int(manifest["blob_bytes"])
    except (KeyError, TypeError, ValueError, ValidationError) as e:
        raise IntegrityError(f"{source}: invalid manifest ({e})") from e

    if len(blob) != blob_bytes:
        raise IntegrityError(
            f"{source}: blob has {len(blob)} bytes, manifest declares {blob_bytes}"
        )

    expected = parameter_shapes(config)
    if [entry.get("name") for entry in entries] != [name for name, _ in expected]:
        raise IntegrityError(f"{source}: tensor names do not match the stored config")

    dtype = blob_dtype(config)
    arrays: Dict[str, np.ndarray] = {}
    offset = 0
    for entry, (name, shape) in zip(entries, expected):
        if tuple(entry.get("shape", ())) != shape:
            raise IntegrityError(f"{source}: tensor {name} has shape {entry.get('shape')}, expected {list(shape)}")
        if entry.get("dtype") != config.dtype:
            raise IntegrityError(
                f"{source}: tensor {name} has dtype {entry.get('dtype')}, config precision is {config.dtype}"
            )
        nbytes = int(np.prod(shape)) * dtype.itemsize
        if entry.get("offset") != offset or entry.get("nbytes") != nbytes:
            raise IntegrityError(f"{source}: tensor {name} has inconsistent offset/size")
        values = np.frombuffer(blob, dtype=dtype, count=nbytes // dtype.itemsize, offset=offset)
        if not np.all(np.isfinite(values)):
            raise IntegrityError(f"{source}: tensor {name} holds non-finite values")
        arrays[name] = values.reshape(shape)
        offset += nbytes
    if offset != blob_bytes:
        raise IntegrityError(f"{source}: tensors cover {offset} bytes, blob has {blob_bytes}")

    try:
        rng = Xoshiro256.from_state(metadata.rng_state)
    except ValueError as e:
        raise IntegrityError(f"{source}: invalid rng state ({e})") from e

    return TrainState(
        config=config,
        params=ModelParams.from_arrays(arrays, config),
        optimizer=Adam(config.lr),
        rng=rng,
        step=metadata.step,
        epoch=metadata.epochs_completed,
        history=list(metadata.loss_history),
        threshold=metadata.threshold,
    )


def save_checkpoint(state: TrainState, path: Union[str, Path]) -> Path:
    """Write a checkpoint file.

    Args:
        state: Training state to persist
        path: Destination file

    Returns:
        Path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(state))
    logger.info(f"Saved checkpoint to {path} ({state.epoch} epochs, {state.step} steps)")
    return path


def load_checkpoint(path: Union[str, Path]) -> TrainState:
    """Read and validate a checkpoint file; Adam moments restart at zero."""
    path = Path(path)
    state = decode_checkpoint(path.read_bytes(), source=str(path))
    logger.info(f"Loaded checkpoint {path} ({state.epoch} epochs, {state.step} steps)")
    return state
