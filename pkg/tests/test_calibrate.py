import numpy as np
import pytest
from numpy.testing import assert_allclose

from fairpost.calibrate import (IsotonicMap, apply_platt, calibrate_joint, isotonic,
                                joint_level_keys, multical_error, platt)
from fairpost.errors import InvalidArgumentError


class TestPlatt:
    def test_calibrated_scores_map_near_identity(self):
        rng = np.random.default_rng(0)
        s = rng.uniform(0.05, 0.95, 10_000)
        y = (rng.uniform(0, 1, 10_000) < s).astype(int)
        a, b = platt(s, y)
        grid = np.linspace(0.1, 0.9, 17)
        assert np.abs(apply_platt(grid, a, b) - grid).max() < 0.02

    def test_independent_labels_give_constant_base_rate(self):
        rng = np.random.default_rng(1)
        s = rng.uniform(0.05, 0.95, 10_000)
        y = (rng.uniform(0, 1, 10_000) < 0.37).astype(int)
        a, b = platt(s, y)
        grid = np.linspace(0.1, 0.9, 9)
        assert np.abs(apply_platt(grid, a, b) - y.mean()).max() < 0.02

    def test_anti_correlated_scores_flip_sign(self):
        rng = np.random.default_rng(2)
        s = rng.uniform(0.05, 0.95, 4_000)
        y = (rng.uniform(0, 1, 4_000) < 1 - s).astype(int)
        a, _ = platt(s, y)
        assert a < 0

    def test_single_class_rejected(self):
        with pytest.raises(InvalidArgumentError):
            platt([0.2, 0.8], [1, 1])


class TestIsotonic:
    def test_monotone_frequencies_are_fixed_point(self):
        scores = np.repeat([0.1, 0.4, 0.8], 10)
        labels = np.concatenate([np.zeros(10), [0, 1] * 5, np.ones(10)]).astype(int)
        m = isotonic(scores, labels)
        assert_allclose(m(np.array([0.1, 0.4, 0.8])), [0.0, 0.5, 1.0])

    def test_four_point_hand_run(self):
        m = isotonic([1, 2, 3, 4], [0, 1, 0, 1])
        assert_allclose(m(np.array([1, 2, 3, 4])), [0.0, 0.5, 0.5, 1.0])

    def test_map_is_nondecreasing(self):
        rng = np.random.default_rng(3)
        s = rng.uniform(0, 1, 300)
        y = (rng.uniform(0, 1, 300) < s ** 2).astype(int)
        m = isotonic(s, y)
        grid = np.linspace(-0.2, 1.2, 200)
        out = m(grid)
        assert np.all(np.diff(out) >= -1e-12)

    def test_pav_beats_random_monotone_maps(self):
        rng = np.random.default_rng(4)
        s = rng.uniform(0, 1, 120)
        y = (rng.uniform(0, 1, 120) < 0.3 + 0.4 * s).astype(int)
        m = isotonic(s, y)
        sse_pav = np.sum((m(s) - y) ** 2)
        for trial in range(40):
            trng = np.random.default_rng(100 + trial)
            knots = np.sort(trng.uniform(0, 1, 8))
            values = np.cumsum(trng.uniform(0, 0.25, 8))
            values = np.clip(values / max(values[-1], 1e-9), 0, 1)
            candidate = values[np.clip(np.searchsorted(knots, s), 0, 7)]
            assert sse_pav <= np.sum((candidate - y) ** 2) + 1e-9

    def test_callable_on_scalars_between_knots(self):
        m = IsotonicMap(xs=np.array([0.0, 1.0]), values=np.array([0.2, 0.8]))
        assert m(np.array([-5.0, 0.5, 5.0])).tolist() == [0.2, 0.2, 0.8]


class TestCalibrateJoint:
    def test_already_calibrated_changes_little(self):
        rng = np.random.default_rng(5)
        joint = rng.dirichlet(np.ones(4), size=10_000)
        labels = np.array([rng.choice(4, p=row) for row in joint])
        out = calibrate_joint(joint, labels, method="platt")
        assert np.abs(out - joint).mean() <= 0.02

    def test_distorted_scores_calibration_does_not_hurt_binned_error(self):
        rng = np.random.default_rng(6)
        g_true = rng.dirichlet(np.ones(2), size=8_000)
        z = np.array([rng.choice(2, p=row) for row in g_true])
        distorted = np.column_stack([g_true[:, 0] ** 2.2, 1 - g_true[:, 0] ** 2.2])
        z_onehot = np.eye(2)[z]
        keys = joint_level_keys(np.zeros((z.size, 1)), distorted, bins_per_coord=10)
        before = multical_error(distorted, z_onehot, keys).max()
        fixed = calibrate_joint(distorted, z, method="isotonic")
        after = multical_error(fixed, z_onehot, keys).max()
        assert after <= before + 1e-9

    def test_one_hot_joint_unchanged(self):
        labels = np.array([0, 1, 2, 3] * 30)
        joint = np.eye(4)[labels]
        out = calibrate_joint(joint, labels, method="isotonic")
        assert np.abs(out - joint).max() < 1e-12


class TestMulticalError:
    def test_exact_predictor_scores_zero(self):
        rng = np.random.default_rng(7)
        z = np.eye(2)[rng.integers(0, 2, 50)]
        keys = rng.integers(0, 5, 50)
        assert_allclose(multical_error(z.copy(), z, keys), 0.0)

    def test_single_bin_constant_prediction(self):
        g = np.full((10, 1), 0.6)
        z = np.array([[1.0]] * 5 + [[0.0]] * 5)
        err = multical_error(g, z, np.zeros(10))
        assert err[0] == pytest.approx(2 * abs(0.6 - 0.5) / 0.5)

    def test_binwise_matching_means_scores_zero(self):
        # pointwise wrong but bin means match -> calibration error ignores it
        g = np.array([[0.8], [0.2], [0.7], [0.3]])
        z = np.array([[1.0], [0.0], [0.0], [1.0]])
        keys = np.array([0, 0, 1, 1])
        assert_allclose(multical_error(g, z, keys), 0.0, atol=1e-12)

    def test_empty_group_column_rejected(self):
        g = np.full((4, 2), 0.5)
        z = np.column_stack([np.ones(4), np.zeros(4)])
        with pytest.raises(InvalidArgumentError, match="group 1"):
            multical_error(g, z, np.zeros(4))

    def test_level_keys_respect_bin_cap(self):
        rng = np.random.default_rng(8)
        keys = joint_level_keys(rng.uniform(0, 1, (5000, 2)), rng.uniform(0, 1, (5000, 2)),
                                bins_per_coord=10, max_bins=1000)
        assert keys.max() + 1 <= 1000
