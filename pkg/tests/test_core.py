import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from fairpost.core import (FairnessSpec, NoiseSpec, PostprocessParams, RandomizedClassifier,
                           ScoreBundle, default_sigma, fairness_risk, perturb,
                           weights_from_psi)
from fairpost.errors import InvalidArgumentError


def make_params(w, spec=None, psi=None, mass=None, sigma=0.0, seed=0):
    w = np.asarray(w, dtype=float)
    ny, k = w.shape
    spec = spec or FairnessSpec(ny, k, ((1, tuple(range(k))),), alpha=1.0)
    return PostprocessParams(
        psi=psi if psi is not None else {},
        group_mass=np.full(k, 1.0 / k) if mass is None else mass,
        weights_w=w,
        noise=NoiseSpec(sigma=sigma, seed=seed),
        spec=spec,
    )


class TestFairnessRisk:
    def test_zero_weights_is_identity(self):
        assert_allclose(fairness_risk([0.3, 0.7], [1, 0], np.zeros((2, 2))), [0.3, 0.7])

    def test_single_column_offset(self):
        w = np.array([[0.0, 0.0], [0.2, 0.0]])  # column k=0 equals (0.0, 0.2)
        assert_allclose(fairness_risk([0.3, 0.7], [1, 0], w), [0.3, 0.9])

    def test_symmetric_cancellation(self):
        w = np.array([[0.2, -0.2], [-0.2, 0.2]])
        assert_allclose(fairness_risk([0.5, 0.5], [0.5, 0.5], w), [0.5, 0.5])

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            fairness_risk([0.3, 0.7, 0.1], [1, 0], np.zeros((2, 2)))
        with pytest.raises(InvalidArgumentError):
            fairness_risk([0.3, 0.7], [1, 0, 0], np.zeros((2, 2)))


class TestPredict:
    def test_unconstrained_argmin(self):
        clf = RandomizedClassifier(make_params(np.zeros((2, 2))))
        assert clf.predict([0.3, 0.7], [1, 0]) == 0

    def test_tie_breaks_to_smallest_index(self):
        clf = RandomizedClassifier(make_params(np.zeros((2, 2))))
        assert clf.predict([0.5, 0.5], [1, 0]) == 0

    def test_binary_aware_sp_is_score_thresholding(self):
        # With per-group offsets w(0, a) = 0.2 and w(1, a) = -0.1 the argmin
        # rule reduces to 1[p(Y=1 | x) >= t_a] with t_a = (1 - w(0,a) + w(1,a)) / 2
        # = 0.35: raising class 0's risk and discounting class 1's lowers the
        # threshold below 1/2.
        spec = FairnessSpec(2, 2, ((0, (0, 1)), (1, (0, 1))), alpha=0.5)
        psi = {(0, 0): -0.1, (0, 1): 0.1, (1, 0): 0.05, (1, 1): -0.05}
        mass = np.array([0.5, 0.5])
        w = weights_from_psi(psi, mass, spec)
        assert_allclose(w[:, 0], [0.2, -0.1])
        clf = RandomizedClassifier(PostprocessParams(
            psi=psi, group_mass=mass, weights_w=w, noise=NoiseSpec(sigma=0.0), spec=spec))
        t = (1.0 - w[0, 0] + w[1, 0]) / 2.0
        assert t == pytest.approx(0.35)
        for f1 in np.linspace(0.01, 0.99, 29):
            # pointwise risks of (class 0, class 1) given P(Y=1|x) = f1
            pred = clf.predict([f1, 1.0 - f1], [1.0, 0.0])
            assert pred == int(f1 > t) or abs(f1 - t) < 1e-12

    @given(st.integers(0, 10_000), st.floats(0.01, 100.0))
    @settings(max_examples=60, deadline=None)
    def test_scale_equivariance(self, seed, scale):
        rng = np.random.default_rng(seed)
        r = rng.uniform(0, 1, 3)
        g = rng.uniform(0, 1, 2)
        w = rng.normal(0, 1, (3, 2))
        base = np.argmin(fairness_risk(r, g, w))
        scaled = np.argmin(fairness_risk(scale * r, g, scale * w))
        assert base == scaled


class TestPerturb:
    def test_sigma_zero_is_identity(self):
        risks = np.random.default_rng(1).uniform(0, 1, (5, 3))
        out = perturb(risks, NoiseSpec(sigma=0.0, seed=0))
        assert_array_equal(out, risks)

    def test_mean_absolute_perturbation_is_half_sigma(self):
        sigma = 0.01
        rng = np.random.default_rng(7)
        base = np.zeros((500_000, 2))
        out = perturb(base, NoiseSpec(sigma=sigma, seed=0), rng)
        mean_abs = np.abs(out).mean()
        assert abs(mean_abs - sigma / 2) < 0.05 * (sigma / 2)

    def test_no_exact_ties_under_noise(self):
        rng = np.random.default_rng(3)
        out = perturb(np.full((100_000, 2), 0.5), NoiseSpec(sigma=1e-3, seed=0), rng)
        assert np.all(out[:, 0] != out[:, 1])

    def test_unresolved_sigma_rejected(self):
        with pytest.raises(InvalidArgumentError):
            perturb(np.zeros((2, 2)), NoiseSpec(sigma=None, seed=0))


class TestBundleValidation:
    def test_negative_risk_rejected(self):
        with pytest.raises(InvalidArgumentError):
            ScoreBundle(risks=[[-0.1, 0.2]], groups=[[1.0]], weights=[1.0])

    def test_group_score_above_one_rejected(self):
        with pytest.raises(InvalidArgumentError):
            ScoreBundle(risks=[[0.1, 0.2]], groups=[[1.2]], weights=[1.0])

    def test_weights_must_sum_to_one(self):
        with pytest.raises(InvalidArgumentError):
            ScoreBundle(risks=[[0.1, 0.2]], groups=[[1.0]], weights=[0.9])

    def test_default_weights_uniform(self):
        b = ScoreBundle(risks=[[0.1, 0.2], [0.3, 0.4]], groups=[[1.0], [0.5]])
        assert_allclose(b.weights, [0.5, 0.5])

    def test_arrays_are_immutable(self):
        b = ScoreBundle(risks=[[0.1, 0.2]], groups=[[1.0]], weights=[1.0])
        with pytest.raises(ValueError):
            b.risks[0, 0] = 9.0


class TestSpecValidation:
    def test_group_set_needs_two_groups(self):
        with pytest.raises(InvalidArgumentError):
            FairnessSpec(2, 2, ((1, (0,)),), alpha=0.5)

    def test_alpha_range(self):
        with pytest.raises(InvalidArgumentError):
            FairnessSpec(2, 2, ((1, (0, 1)),), alpha=1.5)

    def test_class_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            FairnessSpec(2, 2, ((2, (0, 1)),), alpha=0.5)


class TestParamsInvariants:
    def test_psi_zero_sum_enforced(self):
        spec = FairnessSpec(2, 2, ((1, (0, 1)),), alpha=0.5)
        psi = {(0, 0): 0.3, (0, 1): -0.1}
        mass = np.array([0.5, 0.5])
        with pytest.raises(InvalidArgumentError):
            PostprocessParams(psi=psi, group_mass=mass,
                              weights_w=weights_from_psi(psi, mass, spec),
                              noise=NoiseSpec(sigma=0.0), spec=spec)

    def test_weights_must_match_psi(self):
        spec = FairnessSpec(2, 2, ((1, (0, 1)),), alpha=0.5)
        psi = {(0, 0): 0.3, (0, 1): -0.3}
        with pytest.raises(InvalidArgumentError):
            PostprocessParams(psi=psi, group_mass=np.array([0.5, 0.5]),
                              weights_w=np.zeros((2, 2)),
                              noise=NoiseSpec(sigma=0.0), spec=spec)

    def test_valid_params_accepted(self):
        spec = FairnessSpec(2, 2, ((1, (0, 1)),), alpha=0.5)
        psi = {(0, 0): 0.3, (0, 1): -0.3}
        mass = np.array([0.25, 0.75])
        p = PostprocessParams(psi=psi, group_mass=mass,
                              weights_w=weights_from_psi(psi, mass, spec),
                              noise=NoiseSpec(sigma=0.0), spec=spec)
        assert p.weights_w[1, 0] == pytest.approx(-0.3 / 0.25)


class TestRngContracts:
    def test_same_seed_same_stream(self):
        params = make_params(np.zeros((2, 2)), sigma=0.05, seed=42)
        a = RandomizedClassifier(params)
        b = RandomizedClassifier(params)
        row_r, row_g = [0.5, 0.5], [1.0, 0.0]
        assert [a.predict(row_r, row_g) for _ in range(64)] == \
               [b.predict(row_r, row_g) for _ in range(64)]

    def test_forked_streams_deterministic_per_index(self):
        params = make_params(np.zeros((2, 2)), sigma=0.05, seed=9)
        clf = RandomizedClassifier(params)
        draws_a = clf.fork(3).uniform(size=4)
        draws_b = clf.fork(3).uniform(size=4)
        draws_c = clf.fork(4).uniform(size=4)
        assert_array_equal(draws_a, draws_b)
        assert np.any(draws_a != draws_c)

    def test_batch_prediction_matches_per_index_forks(self):
        params = make_params(np.zeros((2, 2)), sigma=0.2, seed=5)
        clf = RandomizedClassifier(params)
        rng_data = np.random.default_rng(2)
        risks = rng_data.uniform(0, 1, (20, 2))
        groups = rng_data.dirichlet((1, 1), 20)
        full = clf.predict_batch(risks, groups)
        manual = [
            int(np.argmin(clf.adjusted(risks[i], groups[i])[0]
                          + clf.fork(i).uniform(-0.2, 0.2, 2)))
            for i in range(20)
        ]
        assert_array_equal(full, manual)

    def test_default_sigma_scales_with_risks(self):
        b = ScoreBundle(risks=[[0.2, 1.0], [0.4, 0.6]], groups=[[1.0], [1.0]],
                        weights=[0.5, 0.5])
        assert default_sigma(b) == pytest.approx(1e-4 * 0.8)
