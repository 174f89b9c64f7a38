"""Evaluation of a trained model on one dataset's test split."""

import logging
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.config.constants import METHOD_NAME
from src.data.dataset import Dataset, Sample
from src.evaluation.metrics import best_iou_cutoff, mean_iou, pixel_auc, precision_recall, roc_auc
from src.models.enums import Verdict
from src.models.exceptions import UsageError
from src.models.schemas import Config, EvalReport, SampleScore, ScoreResult
from src.monitoring.logger import log_with_context
from src.network.params import ModelParams
from src.scoring.anomaly import calibrate_threshold, score_batch
from src.scoring.grad_cam import localize_many
from src.utils.hash_utils import hash_payload

logger = logging.getLogger(__name__)

EVAL_CHUNK = 32


def _chunks(samples: Sequence[Sample]):
    for start in range(0, len(samples), EVAL_CHUNK):
        yield samples[start:start + EVAL_CHUNK]


def score_samples(params: ModelParams, samples: Sequence[Sample], config: Config) -> List[float]:
    """Anomaly scores of samples, in order."""
    scores: List[float] = []
    for chunk in _chunks(samples):
        results = score_batch(params, [s.image for s in chunk], [s.tokens for s in chunk], config)
        scores.extend(r.score for r in results)
    return scores


def localize_samples(
    params: ModelParams,
    samples: Sequence[Sample],
    config: Config,
    threshold: float
) -> Tuple[List[ScoreResult], List[np.ndarray]]:
    """ScoreResults and normalized pixel maps of samples, in order."""
    results: List[ScoreResult] = []
    maps: List[np.ndarray] = []
    for chunk in _chunks(samples):
        for result, _, pixel_scores in localize_many(
            params, [s.image for s in chunk], [s.tokens for s in chunk], config, threshold
        ):
            results.append(result)
            maps.append(pixel_scores)
    return results, maps


def threshold_for(params: ModelParams, data: Dataset, config: Config) -> float:
    """tau at config.threshold_percentile of the validation normal scores.

    Falls back to the training normals when the dataset has no validation split.
    """
    reference = data.val_normal
    if not reference:
        logger.warning(f"{data.category}: no validation normal samples; calibrating on train/normal")
        reference = data.train_normal
    return calibrate_threshold(score_samples(params, reference, config), config.threshold_percentile)


def evaluate(
    params: ModelParams,
    data: Dataset,
    config: Config,
    threshold: Optional[float] = None,
    method: str = METHOD_NAME
) -> EvalReport:
    """Image-AUC, Pixel-AUC and IoU of a trained model on the test split.

    Pixel-AUC and pixel precision/recall use the maps of images classified
    anomalous and all-zero maps for the rest. IoU and its cutoff sweep use
    the raw maps of the anomalous samples.

    Args:
        params: Trained parameters
        data: Dataset with normal and anomalous test samples
        config: Configuration the parameters were trained with
        threshold: tau (default: calibrated on the validation normals)
        method: Report row name

    Returns:
        EvalReport covering every test sample
    """
    started = time.perf_counter()
    data = data.with_vocab(config.vocab)
    if not data.test_normal or not data.test_anomalous:
        raise UsageError(
            f"{data.category}: evaluation needs normal and anomalous test samples "
            f"(got {len(data.test_normal)} and {len(data.test_anomalous)})"
        )
    tau = threshold_for(params, data, config) if threshold is None else threshold

    test = data.test
    results, maps = localize_samples(params, test, config, tau)
    labels = [1 if s.is_anomalous else 0 for s in test]
    masks = [s.mask if s.mask is not None else np.zeros((data.image_size, data.image_size)) for s in test]

    image_auc = roc_auc([r.score for r in results], labels, positive_means_low_score=True)
    # Localization only runs on images flagged anomalous; the rest contribute empty maps
    gated = [m if r.verdict == Verdict.ANOMALOUS else np.zeros_like(m) for m, r in zip(maps, results)]
    pixel = pixel_auc(gated, masks)

    # IoU cutoff is chosen on validation anomalous samples, then applied to test anomalous
    anomalous_maps = [m for m, s in zip(maps, test) if s.is_anomalous]
    anomalous_masks = [s.mask for s in test if s.is_anomalous]
    if data.val_anomalous:
        _, val_maps = localize_samples(params, data.val_anomalous, config, tau)
        cutoff, _ = best_iou_cutoff(val_maps, [s.mask for s in data.val_anomalous])
    else:
        logger.warning(f"{data.category}: no validation anomalous samples; sweeping IoU cutoff on test")
        cutoff, _ = best_iou_cutoff(anomalous_maps, anomalous_masks)
    test_iou = mean_iou(anomalous_maps, anomalous_masks, cutoff)
    pixel_precision, pixel_recall = precision_recall(gated, masks, cutoff)

    samples = [
        SampleScore(
            id=s.id,
            score=r.score,
            squared_distance=r.squared_distance,
            label=s.label,
            verdict=r.verdict,
        )
        for s, r in zip(test, results)
    ]
    accuracy = float(np.mean([s.label == s.verdict for s in samples]))

    report = EvalReport(
        method=method,
        category=data.category,
        image_auc=image_auc,
        pixel_auc=pixel,
        iou=test_iou,
        iou_cutoff=cutoff,
        accuracy=accuracy,
        pixel_precision=pixel_precision,
        pixel_recall=pixel_recall,
        threshold=tau,
        samples=samples,
        config_hash=hash_payload(config.to_json_dict()),
        seed=config.seed,
        runtime_seconds=time.perf_counter() - started,
    )
    log_with_context(
        logger, "info",
        f"{method} on {data.category}: image_auc={image_auc:.4f} pixel_auc={pixel:.4f} iou={test_iou:.4f}",
        method=method,
        category=data.category,
        image_auc=image_auc,
        pixel_auc=pixel,
        iou=test_iou,
        iou_cutoff=cutoff,
        threshold=tau,
        anomalous_detected=sum(1 for s in samples if s.verdict == Verdict.ANOMALOUS),
    )
    return report
