"""Tests for PNM files, dataset directories and integrity gates."""

import json

import numpy as np
import pytest

from src.data.dataset import Dataset, Sample
from src.gates.base import GatePipeline, SampleRecord
from src.gates.integrity import ImageDimensionGate, MaskPresenceGate, MaskValidityGate
from src.models.enums import GateResult, Verdict
from src.models.exceptions import FormatError, IntegrityError, UsageError
from src.storage.dataset_store import load_dataset, write_dataset
from src.storage.pnm import quantize, read_mask, read_pnm, write_mask, write_pnm
from tests.fixtures.factories import make_dataset


class TestPnm:
    def test_quantize_rounds_half_up(self):
        np.testing.assert_array_equal(quantize(np.array([0.0, 0.5 / 255, 1.0, 1.2])), [0, 1, 255, 255])

    def test_gray_round_trip(self, tmp_path):
        values = np.random.default_rng(0).uniform(size=(1, 8, 8))
        path = write_pnm(values, tmp_path / "a.pgm")
        assert path.read_bytes()[:2] == b"P5"
        loaded = read_pnm(path)
        assert loaded.shape == (1, 8, 8)
        np.testing.assert_allclose(loaded, values, atol=0.5 / 255 + 1e-12)

    def test_colour_round_trip(self, tmp_path):
        values = np.random.default_rng(1).uniform(size=(3, 8, 8))
        path = write_pnm(values, tmp_path / "a.ppm")
        assert path.read_bytes()[:2] == b"P6"
        np.testing.assert_array_equal(read_pnm(path), quantize(values) / 255.0)

    def test_mask_round_trip(self, tmp_path):
        mask = np.zeros((8, 8))
        mask[2:4, 1:6] = 1
        np.testing.assert_array_equal(read_mask(write_mask(mask, tmp_path / "m.pgm")), mask)

    def test_unreadable_file(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"not an image")
        with pytest.raises(FormatError, match="bad.pgm"):
            read_pnm(path)

    def test_bad_shape_rejected(self, tmp_path):
        with pytest.raises(UsageError):
            write_pnm(np.zeros((2, 4, 4)), tmp_path / "x.pgm")


class TestDatasetStore:
    def test_round_trip(self, tmp_path, toy_dataset):
        root = write_dataset(toy_dataset, tmp_path / "data")
        assert (root / "meta.json").is_file()
        assert len(list((root / "test" / "masks").glob("*.pgm"))) == 4
        loaded = load_dataset(root)
        assert loaded.descriptor == toy_dataset.descriptor
        for (split, original), (_, restored) in zip(toy_dataset.splits(), loaded.splits()):
            assert [s.id for s in restored] == [s.id for s in original], split
            for a, b in zip(original, restored):
                np.testing.assert_allclose(b.image, a.image, atol=0.5 / 255 + 1e-9)
                assert b.label == a.label
                if a.mask is not None:
                    np.testing.assert_array_equal(b.mask, a.mask)
                assert b.tokens == a.tokens

    def test_empty_anomalous_split(self, tmp_path):
        root = write_dataset(make_dataset(counts=(2, 2, 0), val_counts=(0, 0)), tmp_path / "data")
        loaded = load_dataset(root)
        assert loaded.test_anomalous == []
        assert not loaded.has_validation

    def test_missing_mask_names_file(self, tmp_path, toy_dataset):
        root = write_dataset(toy_dataset, tmp_path / "data")
        (root / "test" / "masks" / "002.pgm").unlink()
        with pytest.raises(IntegrityError, match="002.pgm"):
            load_dataset(root)

    def test_size_mismatch(self, tmp_path, toy_dataset):
        root = write_dataset(toy_dataset, tmp_path / "data")
        write_pnm(np.zeros((1, 8, 8)), root / "train" / "normal" / "001.pgm")
        with pytest.raises(IntegrityError, match="001.pgm"):
            load_dataset(root)

    def test_unreadable_image(self, tmp_path, toy_dataset):
        root = write_dataset(toy_dataset, tmp_path / "data")
        (root / "test" / "normal" / "000.pgm").write_bytes(b"P5 garbage")
        with pytest.raises(FormatError):
            load_dataset(root)

    def test_missing_meta(self, tmp_path, toy_dataset):
        root = write_dataset(toy_dataset, tmp_path / "data")
        (root / "meta.json").unlink()
        with pytest.raises(IntegrityError, match="meta.json"):
            load_dataset(root)

    def test_invalid_meta(self, tmp_path, toy_dataset):
        root = write_dataset(toy_dataset, tmp_path / "data")
        (root / "meta.json").write_text(json.dumps({"category": "x", "descriptor": "y", "image_size": 16,
                                                    "channels": 2}))
        with pytest.raises(IntegrityError):
            load_dataset(root)

    def test_descriptor_vocab(self, tmp_path):
        image = np.full((1, 8, 8), 0.5)
        dataset = Dataset(
            category="bolt",
            descriptor="shiny metal bolt",
            image_size=8,
            channels=1,
            vocab=["shiny", "metal", "bolt"],
            train_normal=[Sample(id="train/normal/000", image=image, tokens=[1, 2, 3])],
        )
        loaded = load_dataset(write_dataset(dataset, tmp_path / "bolt"))
        assert loaded.vocab == ["shiny", "metal", "bolt"]
        assert loaded.train_normal[0].tokens == [1, 2, 3]


def record(**overrides) -> SampleRecord:
    values = dict(
        sample_id="test/anomalous/000",
        image_path="test/anomalous/000.pgm",
        image=np.zeros((1, 4, 4)),
        expected_size=4,
        expected_channels=1,
        requires_mask=True,
        mask_path="test/masks/000.pgm",
        mask=np.eye(4),
    )
    values.update(overrides)
    return SampleRecord(**values)


class TestGates:
    def test_valid_record_passes(self):
        passed, results = GatePipeline([ImageDimensionGate(), MaskPresenceGate(), MaskValidityGate()]).run(record())
        assert passed
        assert all(r.gate_result == GateResult.PASS for r in results)

    def test_pipeline_stops_at_first_failure(self):
        pipeline = GatePipeline([ImageDimensionGate(), MaskPresenceGate(), MaskValidityGate()])
        passed, results = pipeline.run(record(image=np.zeros((3, 4, 4)), mask=None))
        assert not passed
        assert [r.gate_name for r in results] == ["image_dimensions"]

    def test_require_raises_with_reason(self):
        with pytest.raises(IntegrityError, match="missing mask"):
            GatePipeline([MaskPresenceGate()]).require(record(mask=None))

    def test_missing_mask(self):
        result = MaskPresenceGate().check(record(mask=None))
        assert not result.passed
        assert "test/masks/000.pgm" in result.gate_reason

    def test_normal_sample_needs_no_mask(self):
        assert MaskPresenceGate().check(record(requires_mask=False, mask=None)).passed

    @pytest.mark.parametrize(
        "mask",
        [np.full((4, 4), 0.5), np.zeros((4, 4)), np.ones((3, 3))],
        ids=["non_binary", "empty", "wrong_size"],
    )
    def test_invalid_masks(self, mask):
        assert not MaskValidityGate().check(record(mask=mask)).passed


def test_training_split_must_be_normal():
    with pytest.raises(IntegrityError):
        Dataset(
            category="x",
            descriptor="x",
            image_size=4,
            channels=1,
            vocab=["x"],
            train_normal=[Sample(id="a", image=np.zeros((1, 4, 4)), tokens=[1], label=Verdict.ANOMALOUS)],
        )
