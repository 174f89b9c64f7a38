"""Multi-seed ablation of the model's components."""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.config.constants import ABLATION_VARIANTS
from src.data.dataset import Dataset
from src.data.synthetic import generate_pretraining_corpus
from src.evaluation.evaluator import evaluate
from src.models.enums import AblationVariant
from src.models.exceptions import UsageError
from src.models.schemas import AblationResult, Config, EvalReport, VariantSummary
from src.training.trainer import fit

logger = logging.getLogger(__name__)


def variant_config(config: Config, variant: AblationVariant) -> Config:
    """Config of one ablation variant."""
    if variant == AblationVariant.NO_CONTRASTIVE:
        return config.with_updates(use_contrastive=False)
    if variant == AblationVariant.NO_FINETUNE:
        return config.with_updates(epochs_finetune=0)
    if variant == AblationVariant.SHALLOW_ENCODER:
        return config.with_updates(encoder_depth=1)
    return config


def summarize(name: str, reports: List[EvalReport]) -> VariantSummary:
    """Mean and sample standard deviation (ddof=1) of each metric."""
    def stats(values: List[float]):
        array = np.asarray(values, dtype=np.float64)
        std = float(array.std(ddof=1)) if array.size > 1 else 0.0
        return float(array.mean()), std

    image_mean, image_std = stats([r.image_auc for r in reports])
    pixel_mean, pixel_std = stats([r.pixel_auc for r in reports])
    iou_mean, iou_std = stats([r.iou for r in reports])
    return VariantSummary(
        name=name,
        reports=reports,
        image_auc_mean=image_mean,
        image_auc_std=image_std,
        pixel_auc_mean=pixel_mean,
        pixel_auc_std=pixel_std,
        iou_mean=iou_mean,
        iou_std=iou_std,
    )


def ablate(
    config: Config,
    data: Dataset,
    seeds: Sequence[int],
    pretrain_data: Optional[Sequence[Dataset]] = None
) -> AblationResult:
    """Train and evaluate every variant once per seed.

    Args:
        config: Base configuration (its seed is replaced per run)
        data: Target-category dataset
        seeds: At least two seeds
        pretrain_data: Pretraining datasets (default: the other synthetic
            categories, generated per seed)

    Returns:
        AblationResult with one summary per variant
    """
    if len(seeds) < 2:
        raise UsageError(f"ablate needs at least two seeds, got {list(seeds)}")

    corpora: Dict[int, Sequence[Dataset]] = {}
    summaries: Dict[str, VariantSummary] = {}
    for variant in ABLATION_VARIANTS:
        reports = []
        for seed in seeds:
            run_config = variant_config(config, variant).with_updates(seed=seed)
            if pretrain_data is not None:
                pretrain = pretrain_data
            else:
                if seed not in corpora:
                    corpora[seed] = generate_pretraining_corpus(
                        seed,
                        data.category,
                        counts=(len(data.train_normal), 0, 0),
                        image_size=data.image_size,
                        channels=data.channels,
                    )
                pretrain = corpora[seed]
            logger.info(f"Ablation {variant.value}, seed {seed}")
            state = fit(run_config, pretrain, data)
            reports.append(evaluate(state.params, data, run_config, method=variant.value))
        summaries[variant.value] = summarize(variant.value, reports)
        logger.info(
            f"Ablation {variant.value}: image_auc "
            f"{summaries[variant.value].image_auc_mean:.4f}±{summaries[variant.value].image_auc_std:.4f}"
        )
    return AblationResult(seeds=list(seeds), variants=summaries)
