"""Evaluation and ablation runs on toy data."""

import pytest

from src.evaluation.ablation import ablate, summarize, variant_config
from src.evaluation.evaluator import evaluate, localize_samples, threshold_for
from src.evaluation.metrics import pixel_auc
from src.models.enums import AblationVariant, Verdict
from src.models.exceptions import UsageError
from src.network.params import init_params
from src.training.trainer import fit
from tests.fixtures.factories import make_dataset, zero_params


def test_constant_model_is_chance(toy_config, toy_dataset):
    report = evaluate(zero_params(toy_config), toy_dataset, toy_config)
    assert report.image_auc == 0.5
    assert report.pixel_auc == 0.5
    assert len(report.samples) == len(toy_dataset.test)


def test_pixel_auc_ignores_maps_of_images_judged_normal(toy_config, toy_dataset):
    report = evaluate(init_params(toy_config), toy_dataset, toy_config, threshold=0.0)
    assert all(s.verdict == Verdict.NORMAL for s in report.samples)
    assert report.pixel_auc == 0.5
    assert (report.pixel_precision, report.pixel_recall) == (0.0, 0.0)


def test_pixel_auc_uses_raw_maps_when_everything_is_flagged(toy_config, toy_dataset):
    params = init_params(toy_config)
    data = toy_dataset.with_vocab(toy_config.vocab)
    report = evaluate(params, data, toy_config, threshold=2.0)
    assert all(s.verdict == Verdict.ANOMALOUS for s in report.samples)
    _, maps = localize_samples(params, data.test, toy_config, 2.0)
    masks = [s.mask if s.mask is not None else 0.0 * m for s, m in zip(data.test, maps)]
    assert report.pixel_auc == pytest.approx(pixel_auc(maps, masks), abs=1e-12)


def test_report_fields(toy_config, toy_dataset):
    state = fit(toy_config, [], toy_dataset)
    report = evaluate(state.params, toy_dataset, toy_config, threshold=0.5)
    assert report.method == "CLAD"
    assert report.category == "stripes"
    assert report.threshold == 0.5
    assert report.seed == toy_config.seed
    assert 0.0 <= report.iou <= 1.0
    for sample in report.samples:
        assert (sample.verdict == Verdict.ANOMALOUS) == (sample.score < 0.5)
    assert [s.id for s in report.samples][:1] == ["test/normal/000"]


def test_repeat_evaluation_identical(toy_config, toy_dataset):
    params = init_params(toy_config)
    a = evaluate(params, toy_dataset, toy_config)
    b = evaluate(params, toy_dataset, toy_config)
    assert a.model_dump(exclude={"runtime_seconds"}) == b.model_dump(exclude={"runtime_seconds"})


def test_threshold_from_validation_normals(toy_config, toy_dataset):
    params = init_params(toy_config)
    tau = threshold_for(params, toy_dataset.with_vocab(toy_config.vocab), toy_config)
    assert evaluate(params, toy_dataset, toy_config).threshold == tau


def test_threshold_falls_back_to_training_normals(toy_config):
    data = make_dataset(val_counts=(0, 0))
    tau = threshold_for(init_params(toy_config), data.with_vocab(toy_config.vocab), toy_config)
    assert 0.0 < tau <= 1.0


def test_needs_both_test_classes(toy_config):
    with pytest.raises(UsageError):
        evaluate(init_params(toy_config), make_dataset(counts=(4, 4, 0)), toy_config)


def test_variant_configs(toy_config):
    assert not variant_config(toy_config, AblationVariant.NO_CONTRASTIVE).use_contrastive
    assert variant_config(toy_config, AblationVariant.NO_FINETUNE).epochs_finetune == 0
    assert variant_config(toy_config, AblationVariant.SHALLOW_ENCODER).encoder_depth == 1
    assert variant_config(toy_config, AblationVariant.FULL) == toy_config


def test_summary_uses_sample_std(toy_config, toy_dataset):
    params = zero_params(toy_config)
    report = evaluate(params, toy_dataset, toy_config)
    high = report.model_copy(update={"image_auc": 0.7})
    summary = summarize("full", [report, high])
    assert summary.image_auc_mean == pytest.approx(0.6)
    assert summary.image_auc_std == pytest.approx(0.1414213562, abs=1e-9)


def test_small_ablation(toy_config, toy_dataset):
    config = toy_config.with_updates(epochs_pretrain=1)
    result = ablate(config, toy_dataset, seeds=[0, 1])
    assert set(result.variants) == {"full", "no_contrastive", "no_finetune", "shallow_encoder"}
    assert result.seeds == [0, 1]
    for name, summary in result.variants.items():
        assert [r.seed for r in summary.reports] == [0, 1]
        assert all(r.method == name for r in summary.reports)
        assert 0.0 <= summary.image_auc_mean <= 1.0


def test_ablation_needs_two_seeds(toy_config, toy_dataset):
    with pytest.raises(UsageError):
        ablate(toy_config, toy_dataset, seeds=[0])
