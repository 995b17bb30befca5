"""Weak and strong feature augmentation"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.exceptions import ShapeError
from app.schemas.config import AugmentConfig, AugmentPolicy
from app.services import augmentation


@pytest.fixture
def batch():
    return np.random.default_rng(0).normal(size=(32, 2)) * 3.0


class TestApply:

    def test_identity_policy(self, batch):
        out = augmentation.apply(AugmentPolicy.identity(), batch, np.random.default_rng(1))
        np.testing.assert_array_equal(out, batch)

    def test_output_shape_and_source_untouched(self, batch):
        before = batch.copy()
        out = augmentation.apply(AugmentConfig().strong, batch, np.random.default_rng(1))
        assert out.shape == batch.shape
        np.testing.assert_array_equal(batch, before)

    def test_same_seed_same_output(self, batch):
        policy = AugmentConfig().strong
        a = augmentation.apply(policy, batch, np.random.default_rng(7))
        b = augmentation.apply(policy, batch, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_two_strong_views_differ(self, batch):
        first, second = augmentation.two_strong_views(AugmentConfig().strong, batch, np.random.default_rng(3))
        assert first.shape == second.shape == batch.shape
        assert not np.allclose(first, second)

    def test_rows_depend_only_on_their_stream(self, batch):
        policy = AugmentConfig().strong
        full = augmentation.apply(policy, batch, augmentation.row_generators(np.random.SeedSequence(11), 32))
        streams = augmentation.row_generators(np.random.SeedSequence(11), 32)
        single = augmentation.apply(policy, batch[5:6], [streams[5]])
        np.testing.assert_array_equal(full[5:6], single)

    def test_weak_perturbs_less_than_strong(self):
        rng = np.random.default_rng(4)
        rows = rng.normal(size=(2000, 2))
        config = AugmentConfig()
        weak = augmentation.apply(config.weak, rows, np.random.default_rng(5))
        strong = augmentation.apply(config.strong, rows, np.random.default_rng(5))
        weak_shift = np.mean(np.linalg.norm(weak - rows, axis=1))
        strong_shift = np.mean(np.linalg.norm(strong - rows, axis=1))
        assert weak_shift < strong_shift

    def test_jitter_scales_with_feature_scale(self):
        rows = np.zeros((4000, 3))
        policy = AugmentPolicy(kind="strong", jitter_sigma=0.5)
        small = augmentation.apply(policy, rows, np.random.default_rng(8), feature_scale=1.0)
        large = augmentation.apply(policy, rows, np.random.default_rng(8), feature_scale=4.0)
        np.testing.assert_allclose(large, 4.0 * small, rtol=1e-12)
        assert np.std(small) == pytest.approx(0.5, rel=0.05)

    def test_rotation_preserves_norm(self):
        rows = np.random.default_rng(9).normal(size=(50, 2))
        policy = AugmentPolicy(kind="strong", jitter_sigma=0.0, rotation_max=math.pi)
        out = augmentation.apply(policy, rows, np.random.default_rng(10))
        np.testing.assert_allclose(np.linalg.norm(out, axis=1), np.linalg.norm(rows, axis=1), rtol=1e-12)

    def test_dropout_zeroes_entries(self):
        rows = np.ones((1000, 4))
        policy = AugmentPolicy(kind="strong", jitter_sigma=0.0, dropout_prob=0.3)
        out = augmentation.apply(policy, rows, np.random.default_rng(12))
        assert set(np.unique(out).tolist()) <= {0.0, 1.0}
        assert np.mean(out == 0.0) == pytest.approx(0.3, abs=0.03)

    def test_empty_batch(self):
        with pytest.raises(ShapeError):
            augmentation.apply(AugmentConfig().weak, np.zeros((0, 2)), np.random.default_rng(0))

    def test_generator_count_mismatch(self, batch):
        with pytest.raises(ShapeError):
            augmentation.apply(AugmentConfig().weak, batch, augmentation.row_generators(np.random.SeedSequence(0), 3))


class TestPolicyValidation:

    def test_weak_rejects_dropout(self):
        with pytest.raises(ValidationError):
            AugmentPolicy(kind="weak", jitter_sigma=0.1, dropout_prob=0.2)

    def test_scale_range_order(self):
        with pytest.raises(ValidationError):
            AugmentPolicy(kind="strong", jitter_sigma=0.1, scale_range=(1.2, 0.8))

    def test_weak_must_be_weaker(self):
        with pytest.raises(ValidationError):
            AugmentConfig(
                weak=AugmentPolicy(kind="weak", jitter_sigma=0.3),
                strong=AugmentPolicy(kind="strong", jitter_sigma=0.1),
            )

    def test_identity_pair_allowed(self):
        config = AugmentConfig(weak=AugmentPolicy.identity("weak"), strong=AugmentPolicy.identity("strong"))
        assert config.strong.jitter_sigma == 0.0
