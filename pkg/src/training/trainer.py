"""Two-stage training: mixed-category pretraining, then target fine-tuning."""

import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from src.data.dataset import Dataset, Sample
from src.data.synthetic import inject_defects
from src.data.tokenizer import bag_of_words
from src.models.enums import NegativePairs, TrainingStage
from src.models.exceptions import UsageError
from src.models.schemas import Config, EpochLoss, LossBreakdown
from src.monitoring.logger import log_with_context
from src.network.decoders import decode_image, decode_text
from src.network.encoders import encode_image, encode_texts
from src.network.params import ModelParams, init_params
from src.numerics.rng import MASK64, Xoshiro256
from src.numerics.tensor import Tensor, backward
from src.training.losses import contrastive_loss, exposure_loss, reconstruction_loss, total_loss
from src.training.optimizer import Adam

logger = logging.getLogger(__name__)


@dataclass
class TrainState:
    """Everything that evolves during training.

    Attributes:
        config: Configuration the state was created with
        params: Model parameters
        optimizer: Adam with its moments
        rng: Shuffling stream
        step: Number of parameter updates so far
        epoch: Number of completed epochs (both stages)
        history: Mean loss breakdown per epoch
        threshold: Calibrated anomaly threshold, once known
    """

    config: Config
    params: ModelParams
    optimizer: Adam
    rng: Xoshiro256
    step: int = 0
    epoch: int = 0
    history: List[EpochLoss] = field(default_factory=list)
    threshold: Optional[float] = None

    @classmethod
    def initial(cls, config: Config) -> "TrainState":
        """Fresh parameters from config.seed; shuffling uses the stream of seed + 1."""
        return cls(
            config=config,
            params=init_params(config),
            optimizer=Adam(config.lr),
            rng=Xoshiro256((config.seed + 1) & MASK64),
        )

    def copy(self) -> "TrainState":
        optimizer = Adam(
            self.optimizer.lr,
            self.optimizer.beta1,
            self.optimizer.beta2,
            self.optimizer.epsilon,
            step=self.optimizer.t,
        )
        optimizer.m = {name: m.copy() for name, m in self.optimizer.m.items()}
        optimizer.v = {name: v.copy() for name, v in self.optimizer.v.items()}
        return TrainState(
            config=self.config,
            params=self.params.copy(),
            optimizer=optimizer,
            rng=Xoshiro256.from_state(self.rng.state),
            step=self.step,
            epoch=self.epoch,
            history=list(self.history),
            threshold=self.threshold,
        )


class BatchLoss(NamedTuple):
    """Scalar loss tensors of one batch; `total` is the one to backpropagate."""

    total: Tensor
    contrastive: Tensor
    exposure: Tensor
    reconstruction: Tensor


def distinct_descriptions(token_lists: Sequence[Sequence[int]]) -> np.ndarray:
    """[N, N] mask of pairs whose descriptions differ.

    Used as the negative mask under `NegativePairs.DISTINCT_TEXT`.
    """
    keys = [tuple(tokens) for tokens in token_lists]
    return np.array([[a != b for b in keys] for a in keys], dtype=bool)


def synthesize_defects(
    batch: Sequence[Sample],
    config: Config,
    rng: Xoshiro256
) -> Optional[np.ndarray]:
    """Defective copies of the first ceil(defect_exposure * N) images of a batch.

    Draws from `rng` only when copies are made. Returns None when the
    exposure term is off (no contrastive loss or zero exposure).
    """
    if not config.use_contrastive:
        return None
    count = math.ceil(config.defect_exposure * len(batch))
    if count == 0:
        return None
    copies = [inject_defects(sample.image, rng)[0] for sample in batch[:count]]
    return np.stack(copies).astype(config.dtype)


def batch_loss(
    params: ModelParams,
    batch: Sequence[Sample],
    config: Config,
    defective: Optional[np.ndarray] = None
) -> BatchLoss:
    """Forward both encoders and both decoders on one batch.

    Args:
        params: Model parameters
        batch: Normal samples tokenized against config.vocab
        config: Margins, lambda and negative-pair policy
        defective: Optional [M, C, H, W] defective images for the exposure term

    Returns:
        BatchLoss of scalar tensors
    """
    images = Tensor(np.stack([sample.image for sample in batch]).astype(config.dtype))
    tokens = [sample.tokens for sample in batch]
    bow_target = Tensor(
        np.stack([bag_of_words(t, len(config.vocab)) for t in tokens]).astype(config.dtype)
    )

    visual = encode_image(params, images)
    z_t = encode_texts(params, tokens)
    image_recon = decode_image(params, visual.z_v)
    bow_recon = decode_text(params, z_t)

    contrastive = Tensor(np.zeros((), dtype=config.dtype))
    exposure = Tensor(np.zeros((), dtype=config.dtype))
    if config.use_contrastive:
        mask = None
        if config.negative_pairs == NegativePairs.DISTINCT_TEXT:
            mask = distinct_descriptions(tokens)
        contrastive = contrastive_loss(visual.z_v, z_t, config.alpha, config.beta, negative_mask=mask)
        if defective is not None and len(defective) > 0:
            z_a = encode_image(params, Tensor(np.asarray(defective, dtype=config.dtype))).z_v
            exposure = exposure_loss(z_a, z_t, config.defect_margin)
    reconstruction = reconstruction_loss(images, image_recon, bow_target, bow_recon)
    total = total_loss(contrastive, reconstruction, config.lambda_, exposure)
    return BatchLoss(total, contrastive, exposure, reconstruction)


def train_epoch(
    state: TrainState,
    data: Sequence[Sample],
    config: Config,
    stage: TrainingStage = TrainingStage.FINETUNE
) -> TrainState:
    """One pass over `data` in shuffled full batches.

    The input state is left untouched; the trailing partial batch is dropped.
    The shuffle and then each batch's defective copies draw from state.rng.

    Args:
        state: Current training state
        data: Normal samples tokenized against config.vocab
        config: Hyperparameters (batch size, margins, lambda, lr)
        stage: Stage marker recorded in the loss history

    Returns:
        Successor state with one more loss-history entry
    """
    if not data:
        raise UsageError("train_epoch needs at least one sample")
    if config.batch_size > len(data):
        raise UsageError(f"batch_size {config.batch_size} exceeds the {len(data)} training samples")
    for sample in data:
        if sample.is_anomalous:
            raise UsageError(f"training data must be normal, got anomalous sample {sample.id}")

    state = state.copy()
    state.optimizer.lr = config.lr
    order = state.rng.permutation(len(data))
    n_batches = len(data) // config.batch_size
    sums = np.zeros(4)

    for b in range(n_batches):
        batch = [data[i] for i in order[b * config.batch_size:(b + 1) * config.batch_size]]
        defective = synthesize_defects(batch, config, state.rng)
        losses = batch_loss(state.params, batch, config, defective)
        sums += [losses.contrastive.item(), losses.exposure.item(),
                 losses.reconstruction.item(), losses.total.item()]
        state.params.zero_grad()
        backward(losses.total)
        state.optimizer.step(state.params)
        state.step += 1

    contrastive_mean, exposure_mean, reconstruction_mean, total_mean = sums / n_batches
    entry = EpochLoss(
        stage=stage,
        epoch=state.epoch,
        loss=LossBreakdown(
            contrastive=contrastive_mean,
            exposure=exposure_mean,
            reconstruction=reconstruction_mean,
            total=total_mean,
            batch_size=config.batch_size,
        ),
    )
    state.history.append(entry)
    state.epoch += 1

    log_with_context(
        logger, "info",
        f"{stage.value} epoch {entry.epoch}: total={total_mean:.5f}",
        stage=stage.value,
        epoch=entry.epoch,
        contrastive=contrastive_mean,
        exposure=exposure_mean,
        reconstruction=reconstruction_mean,
        total=total_mean,
        step=state.step,
    )
    return state


def fit(
    config: Config,
    pretrain_data: Sequence[Dataset],
    finetune_data: Dataset,
    state: Optional[TrainState] = None
) -> TrainState:
    """Pretrain on the union of `pretrain_data`, then fine-tune on `finetune_data`.

    Every dataset is re-tokenized against config.vocab first.

    Args:
        config: Hyperparameters and epoch counts
        pretrain_data: Broad-pretraining datasets (other categories)
        finetune_data: Target-category dataset
        state: Starting state (default: fresh from config.seed)

    Returns:
        Final training state
    """
    finetune_samples = finetune_data.with_vocab(config.vocab).train_normal
    if len(finetune_samples) < config.batch_size:
        raise UsageError(
            f"fine-tuning needs at least batch_size={config.batch_size} samples, "
            f"got {len(finetune_samples)}"
        )
    pretrain_samples = [
        sample
        for dataset in pretrain_data
        for sample in dataset.with_vocab(config.vocab).train_normal
    ]

    state = state or TrainState.initial(config)
    logger.info(
        f"Training {finetune_data.category}: {config.epochs_pretrain} pretrain epochs on "
        f"{len(pretrain_samples)} samples, {config.epochs_finetune} fine-tune epochs on "
        f"{len(finetune_samples)} samples"
    )

    if config.epochs_pretrain > 0 and not pretrain_samples:
        logger.warning("No pretraining data given; skipping the pretraining stage")
    elif config.epochs_pretrain > 0:
        for _ in range(config.epochs_pretrain):
            state = train_epoch(state, pretrain_samples, config, TrainingStage.PRETRAIN)

    for _ in range(config.epochs_finetune):
        state = train_epoch(state, finetune_samples, config, TrainingStage.FINETUNE)

    logger.info(f"Training finished after {state.epoch} epochs ({state.step} steps)")
    return state
