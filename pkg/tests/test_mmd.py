"""Gaussian-kernel MMD, entropy gating and bandwidth selection"""

import math

import numpy as np
import pytest

from app.core.autograd import GradientTape, Tensor
from app.core.exceptions import ConfigError, ShapeError
from app.schemas.config import KernelConfig
from app.services import mmd
from app.services.gradcheck import central_difference, relative_error


FIXED_ONE = KernelConfig(bandwidth_mode="fixed", sigma=1.0)
MEDIAN = KernelConfig(bandwidth_mode="median_heuristic")


def _reference_mmd(a, b, sigma):
    def k(x, y):
        return math.exp(-float(np.sum((x - y) ** 2)) / (2.0 * sigma * sigma))

    k_aa = sum(k(x, y) for x in a for y in a) / len(a) ** 2
    k_ab = sum(k(x, y) for x in a for y in b) / (len(a) * len(b))
    k_bb = sum(k(x, y) for x in b for y in b) / len(b) ** 2
    return k_aa - 2.0 * k_ab + k_bb


class TestKernel:

    def test_unit_distance(self):
        assert mmd.gaussian_kernel([0.0, 0.0], [1.0, 0.0], 1.0) == pytest.approx(math.exp(-0.5), abs=1e-15)

    def test_same_point(self):
        assert mmd.gaussian_kernel([2.0, -1.0], [2.0, -1.0], 0.3) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mmd.gaussian_kernel([0.0, 0.0], [0.0, 0.0, 0.0], 1.0)

    @pytest.mark.parametrize("sigma", [0.0, -1.0])
    def test_bandwidth_must_be_positive(self, sigma):
        with pytest.raises(ConfigError):
            mmd.gaussian_kernel([0.0], [1.0], sigma)


class TestMedianBandwidth:

    def test_median_of_distances(self):
        assert mmd.median_bandwidth(np.array([[0.0], [1.0], [3.0]])) == pytest.approx(2.0)

    def test_coincident_pairs_count(self):
        assert mmd.median_bandwidth(np.array([[0.0], [0.0], [2.0]])) == pytest.approx(2.0)
        # distances 0, 0, 0, 3, 3, 3
        assert mmd.median_bandwidth(np.array([[0.0], [0.0], [0.0], [3.0]])) == pytest.approx(1.5)

    def test_mostly_duplicates_is_degenerate(self):
        points = np.array([[0.0], [0.0], [0.0], [0.0], [1.0]])
        assert mmd.median_bandwidth(points) == 0.0
        assert mmd.l_mmd(points[:2], points[2:], MEDIAN).item() == 0.0

    def test_degenerate_sets(self):
        assert mmd.median_bandwidth(np.array([[1.0, 1.0]])) == 0.0
        assert mmd.median_bandwidth(np.ones((4, 2))) == 0.0

    def test_fixed_mode_ignores_data(self):
        assert mmd.resolve_bandwidth(KernelConfig(bandwidth_mode="fixed", sigma=0.7), np.zeros((2, 2)), np.ones((2, 2))) == 0.7

    def test_fixed_mode_needs_sigma(self):
        with pytest.raises(ValueError):
            KernelConfig(bandwidth_mode="fixed")


class TestSquaredMmd:

    def test_two_points(self):
        value = mmd.l_mmd(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]), FIXED_ONE).item()
        assert value == pytest.approx(2.0 - 2.0 * math.exp(-0.5), abs=1e-12)
        assert value == pytest.approx(0.7869386805, abs=1e-10)

    def test_matches_reference(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            a = rng.normal(size=(rng.integers(1, 9), 3))
            b = rng.normal(size=(rng.integers(1, 9), 3)) + 0.5
            sigma = float(rng.uniform(0.3, 3.0))
            value = mmd.l_mmd(a, b, MEDIAN, sigma=sigma).item()
            assert abs(value - _reference_mmd(a, b, sigma)) < 1e-12, f"seed {seed}"

    def test_properties_on_random_sets(self):
        for seed in range(500):
            rng = np.random.default_rng(seed)
            a = rng.normal(size=(rng.integers(1, 6), 2))
            b = rng.normal(size=(rng.integers(1, 6), 2)) * rng.uniform(0.5, 2.0)
            ab = mmd.l_mmd(a, b, MEDIAN).item()
            ba = mmd.l_mmd(b, a, MEDIAN).item()
            assert ab >= -1e-12
            assert ab == pytest.approx(ba, abs=1e-12)
            assert abs(mmd.l_mmd(a, a.copy(), FIXED_ONE).item()) < 1e-12
            shift = rng.normal(size=(1, 2)) * 3.0
            assert mmd.l_mmd(a + shift, b + shift, MEDIAN).item() == pytest.approx(ab, abs=1e-12)

    def test_empty_side_is_zero(self):
        value = mmd.l_mmd(np.zeros((0, 2)), np.ones((3, 2)), FIXED_ONE)
        assert value.item() == 0.0
        assert value.tape is None

    def test_degenerate_bandwidth_is_zero(self):
        assert mmd.l_mmd(np.ones((2, 2)), np.ones((3, 2)), MEDIAN).item() == 0.0

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            mmd.l_mmd(np.ones((2, 2)), np.ones((2, 3)), FIXED_ONE)

    def test_gradient_with_frozen_bandwidth(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            a, b = rng.normal(size=(4, 3)), rng.normal(size=(5, 3)) + 1.0

            def value(tape=None):
                ta = tape.watch(a) if tape is not None else Tensor(a)
                tb = tape.watch(b) if tape is not None else Tensor(b)
                return mmd.l_mmd(ta, tb, MEDIAN, sigma=1.3)

            tape = GradientTape()
            analytic = tape.gradient(value(tape), [a, b])
            numeric = [central_difference(lambda: value().item(), arr) for arr in (a, b)]
            assert relative_error(analytic, numeric) < 1e-6, f"seed {seed}"

    def test_mmd_between(self):
        a = np.array([[0.0, 0.0]])
        b = np.array([[1.0, 0.0]])
        assert mmd.mmd_between(a, b, 1.0) == pytest.approx(0.7869386805, abs=1e-10)
        assert mmd.mmd_between(b, a, 1.0) == pytest.approx(0.7869386805, abs=1e-10)
        assert mmd.mmd_between(a, a) == 0.0


class TestSelection:

    def test_sharp_temperature_keeps_only_decided_rows(self):
        half = 1.0 / math.sqrt(2.0)
        z_l = np.array([[1.0, 0.0], [half, half]])
        z_u = np.array([[0.0, 1.0]])
        selection = mmd.select_for_mmd(np.eye(2), z_l, z_u, 0.5 * math.log(2), temperature=1e-3)
        np.testing.assert_array_equal(selection.selected_labeled, [0])
        np.testing.assert_array_equal(selection.selected_unlabeled, [0])
        assert selection.labeled_entropies[1] == pytest.approx(math.log(2))
        assert not selection.empty

    def test_without_temperature_two_classes_stay_uncertain(self):
        z = np.array([[1.0, 0.0], [0.0, 1.0]])
        selection = mmd.select_for_mmd(np.eye(2), z, z, 0.5 * math.log(2))
        assert selection.counts == (0, 0)
        assert selection.empty

    def test_threshold_is_inclusive(self, unit_rows):
        rng = np.random.default_rng(0)
        protos, z = unit_rows(rng, 3, 4), unit_rows(rng, 10, 4)
        probe = mmd.select_for_mmd(protos, z, z, math.log(3))
        epsilon = float(np.sort(probe.labeled_entropies)[4])
        selection = mmd.select_for_mmd(protos, z, z, epsilon)
        assert selection.selected_labeled.size >= 5
        assert np.all(selection.labeled_entropies[selection.selected_labeled] <= epsilon)

    def test_larger_threshold_selects_superset(self, unit_rows):
        rng = np.random.default_rng(1)
        protos, z_l, z_u = unit_rows(rng, 3, 4), unit_rows(rng, 16, 4), unit_rows(rng, 32, 4)
        previous = (set(), set())
        for epsilon in np.linspace(0.0, math.log(3), 8):
            selection = mmd.select_for_mmd(protos, z_l, z_u, float(epsilon), temperature=0.2)
            current = (set(selection.selected_labeled.tolist()), set(selection.selected_unlabeled.tolist()))
            assert previous[0] <= current[0] and previous[1] <= current[1]
            previous = current
        assert len(previous[0]) == 16 and len(previous[1]) == 32

    def test_negative_threshold(self):
        with pytest.raises(ConfigError):
            mmd.select_for_mmd(np.eye(2), np.eye(2), np.eye(2), -0.1)
