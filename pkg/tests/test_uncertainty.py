import numpy as np
import pytest

from dfdkit.uncertainty import VARIANCE_CONVENTION, aggregate, mean_error


def two_pass_oracle(stack):
    """Scalar two-pass mean/variance, one pixel at a time."""
    k, h, w = stack.shape
    mean = np.zeros((h, w))
    var = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            vals = [stack[i, y, x] for i in range(k)]
            m = sum(vals) / k
            mean[y, x] = m
            var[y, x] = sum((v - m) ** 2 for v in vals) / k
    return mean, var


class TestAggregate:
    def test_identical_maps_zero_variance(self):
        base = np.random.default_rng(0).random((6, 6))
        mean, var = aggregate(np.stack([base, base]))
        np.testing.assert_array_equal(mean, base)
        assert var.max() == 0.0
        # larger counts sum sequentially and leave at most ulp-level dust
        mean7, var7 = aggregate(np.stack([base] * 7))
        assert np.abs(mean7 - base).max() <= 1e-15
        assert var7.max() <= 1e-30

    def test_two_sample_closed_form(self):
        rng = np.random.default_rng(1)
        a, b = rng.random((5, 5)), rng.random((5, 5))
        mean, var = aggregate([a, b])
        np.testing.assert_allclose(mean, (a + b) / 2, atol=1e-15)
        np.testing.assert_allclose(var, ((a - b) / 2) ** 2, atol=1e-15)

    def test_fifty_samples_match_two_pass_oracle(self):
        rng = np.random.default_rng(2)
        stack = rng.random((50, 16, 16)) * 1e4  # large values stress stability
        mean, var = aggregate(stack)
        m2, v2 = two_pass_oracle(stack)
        assert np.abs(mean - m2).max() <= 1e-12 * 1e4
        assert np.abs(var - v2).max() <= 1e-12 * 1e8

    def test_population_convention_single_sample(self):
        mean, var = aggregate(np.random.default_rng(3).random((1, 4, 4)))
        assert var.max() == 0.0
        assert VARIANCE_CONVENTION == "population"

    def test_shift_equivariance(self):
        rng = np.random.default_rng(4)
        stack = rng.random((10, 8, 8))
        m0, v0 = aggregate(stack)
        m1, v1 = aggregate(stack + 3.5)
        assert np.abs(m1 - (m0 + 3.5)).max() <= 1e-12
        assert np.abs(v1 - v0).max() <= 1e-12

    def test_scale_quadratic_in_variance(self):
        rng = np.random.default_rng(5)
        stack = rng.random((10, 8, 8))
        _, v0 = aggregate(stack)
        _, v1 = aggregate(2.0 * stack)
        assert np.abs(v1 - 4.0 * v0).max() <= 1e-12

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            aggregate([np.zeros((4, 4)), np.zeros((4, 5))])

    def test_non_finite_rejected(self):
        bad = np.zeros((2, 3, 3))
        bad[1, 1, 1] = np.inf
        with pytest.raises(ValueError):
            aggregate(bad)

    def test_empty_stack_rejected(self):
        with pytest.raises(ValueError):
            aggregate(np.zeros((0, 4, 4)))


class TestMeanError:
    def test_exact_prediction_zero_map(self):
        gt = np.random.default_rng(6).random((5, 5))
        assert mean_error(gt.copy(), gt).max() == 0.0

    def test_constant_offset(self):
        gt = np.full((4, 4), 2.0)
        valid = np.ones((4, 4), dtype=bool)
        valid[0, 0] = False
        err = mean_error(gt + 0.5, gt, valid)
        assert err[0, 0] == 0.0
        assert np.abs(err[valid] - 0.5).max() <= 1e-15

    def test_random_matches_scalar_oracle(self):
        rng = np.random.default_rng(7)
        mean = rng.random((6, 6))
        gt = rng.random((6, 6))
        err = mean_error(mean, gt)
        for y in range(6):
            for x in range(6):
                assert err[y, x] == abs(mean[y, x] - gt[y, x])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mean_error(np.zeros((3, 3)), np.zeros((3, 4)))
