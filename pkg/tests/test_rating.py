"""Checks for the rating-class probability model and its loss.

The golden configuration (5 classes, sharpness 30, equal-width boundaries)
is verified against a hand-evaluated softmax with the quadratic exponents
written out literally.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratecraft.rating import (
    ClassBoundaries,
    ReturnNormalizer,
    class_probabilities,
    fit_boundaries,
    predict_class,
    rating_loss,
    rating_loss_grad,
)

FIG8 = ClassBoundaries((0.0, 0.2, 0.4, 0.6, 0.8, 1.0))


def hand_softmax(exponents):
    exps = [math.exp(e) for e in exponents]
    total = sum(exps)
    return [e / total for e in exps]


class TestNormalizer:
    def test_endpoints_map_to_zero_and_one(self):
        ctx = ReturnNormalizer(2.0, 6.0)
        assert ctx.normalize(2.0) == 0.0
        assert ctx.normalize(6.0) == 1.0

    def test_midpoint(self):
        assert ReturnNormalizer(2.0, 6.0).normalize(4.0) == 0.5

    def test_out_of_range_clamped(self):
        ctx = ReturnNormalizer(2.0, 6.0)
        # unclamped value would be (7-2)/4 = 1.25
        assert (7.0 - 2.0) / 4.0 == 1.25
        assert ctx.normalize(7.0) == 1.0
        assert ctx.normalize(0.0) == 0.0

    def test_degenerate_span_maps_to_half(self):
        ctx = ReturnNormalizer(3.0, 3.0)
        assert ctx.normalize(3.0) == 0.5
        assert ctx.normalize(-10.0) == 0.5

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            ReturnNormalizer(0.0, 1.0).normalize(float("nan"))

    def test_grad_mask_zero_outside_range(self):
        ctx = ReturnNormalizer(0.0, 2.0)
        _, grad = ctx.normalize_with_grad_mask(np.array([-1.0, 1.0, 3.0]))
        np.testing.assert_array_equal(grad, [0.0, 0.5, 0.0])


class TestFitBoundaries:
    def test_two_class_midpoint(self):
        got = fit_boundaries([0.0, 0.1, 0.3, 0.5, 0.8, 1.0], [2, 4])
        assert got.values == (0.0, pytest.approx((0.1 + 0.3) / 2), 1.0)

    def test_empty_low_class_collapses_to_zero(self):
        got = fit_boundaries([0.2, 0.5, 0.9], [0, 3])
        assert got.values == (0.0, 0.0, 1.0)

    def test_empty_high_class_collapses_to_one(self):
        got = fit_boundaries([0.2, 0.5, 0.9], [3, 0])
        assert got.values == (0.0, 1.0, 1.0)

    def test_five_even_classes(self):
        got = fit_boundaries([0.0, 0.25, 0.5, 0.75, 1.0], [1, 1, 1, 1, 1])
        np.testing.assert_allclose(got.values, [0.0, 0.125, 0.375, 0.625, 0.875, 1.0])

    def test_interior_empty_class_zero_width(self):
        got = fit_boundaries([0.1, 0.2, 0.6, 0.7, 0.8], [2, 0, 3])
        assert got.values[1] == got.values[2] == pytest.approx(0.4)

    def test_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            fit_boundaries([0.1, 0.2], [1, 2])

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            fit_boundaries([0.5, 0.2], [1, 1])


def count_per_class(boundaries, values):
    """Brute-force sort-and-partition: class 0 owns [b0, b1), interior
    classes own open intervals, the top class owns (b_last-1, 1]."""
    b = boundaries.as_array()
    n = boundaries.n_classes
    counts = []
    for i in range(n):
        if i == 0 and n > 1:
            counts.append(int(np.sum((values >= b[0]) & (values < b[1]))))
        elif i == n - 1:
            counts.append(int(np.sum((values > b[i]) & (values <= b[i + 1]))))
        else:
            counts.append(int(np.sum((values > b[i]) & (values < b[i + 1]))))
    return counts


class TestCountMatching:
    @given(st.data())
    @settings(max_examples=200, deadline=None)
    def test_fitted_intervals_capture_observed_counts(self, data):
        n = data.draw(st.integers(1, 6))
        total = data.draw(st.integers(1, 40))
        cut_points = sorted(
            data.draw(
                st.lists(st.integers(0, total), min_size=n - 1, max_size=n - 1)
            )
        )
        counts = np.diff([0, *cut_points, total])
        rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
        # distinct values strictly inside (0, 1)
        values = np.sort(rng.choice(np.linspace(0.01, 0.99, 5000), size=total, replace=False))
        boundaries = fit_boundaries(values, counts)
        assert count_per_class(boundaries, values) == list(counts)


class TestClassProbabilities:
    def test_golden_five_class_sharpness_30(self):
        # quadratic exponents at x=0.3: -30*(0.3-lo)*(0.3-hi) per class
        exponents = [-0.9, 0.3, -0.9, -4.5, -10.5]
        expected = hand_softmax(exponents)
        got = class_probabilities(0.3, FIG8, 30.0)
        np.testing.assert_allclose(got, expected, atol=1e-12)
        assert got[1] == pytest.approx(0.6209, abs=1e-3)
        assert got[0] == pytest.approx(0.1870, abs=1e-3)
        assert got[2] == pytest.approx(0.1870, abs=1e-3)
        assert abs(got.sum() - 1.0) < 1e-9

    def test_boundary_point_splits_neighbours_evenly(self):
        got = class_probabilities(0.4, FIG8, 30.0)
        assert got[1] == pytest.approx(got[2], abs=1e-15)

    def test_single_class_is_certain(self):
        only = ClassBoundaries((0.0, 1.0))
        np.testing.assert_allclose(class_probabilities(0.7, only, 5.0), [1.0])

    def test_no_overflow_at_high_sharpness(self):
        got = class_probabilities(0.95, FIG8, 1e4)
        assert np.isfinite(got).all()
        assert abs(got.sum() - 1.0) < 1e-9

    def test_sharpness_must_be_positive(self):
        with pytest.raises(ValueError):
            class_probabilities(0.5, FIG8, 0.0)

    @given(
        st.integers(1, 6),
        # strict positivity is a float64 guarantee only while the score
        # spread stays under ~709 nats; 500 keeps a wide safety margin
        st.floats(1e-3, 500.0),
        st.floats(0.0, 1.0),
        st.integers(0, 2**31),
    )
    @settings(max_examples=300, deadline=None)
    def test_distribution_properties(self, n, sharpness, x, seed):
        rng = np.random.default_rng(seed)
        inner = np.sort(rng.uniform(0.0, 1.0, size=n - 1))
        boundaries = ClassBoundaries((0.0, *inner.tolist(), 1.0))
        probs = class_probabilities(x, boundaries, sharpness)
        assert abs(probs.sum() - 1.0) < 1e-9
        assert (probs > 0).all()
        assert (probs < 1.0 + 1e-12).all()


class TestPredictClass:
    def test_golden_point_lands_in_class_one(self):
        assert predict_class(0.3, FIG8, 30.0) == 1

    def test_endpoints(self):
        assert predict_class(0.0, FIG8, 30.0) == 0
        assert predict_class(1.0, FIG8, 30.0) == 4

    def test_tie_at_interior_boundary_goes_low(self):
        assert predict_class(0.4, FIG8, 30.0) == 1

    def test_interval_argmax(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = rng.integers(2, 7)
            inner = np.sort(rng.uniform(0.05, 0.95, size=n - 1))
            boundaries = ClassBoundaries((0.0, *inner.tolist(), 1.0))
            b = boundaries.as_array()
            i = int(rng.integers(0, n))
            if b[i + 1] - b[i] < 1e-6:
                continue
            x = rng.uniform(b[i] + 1e-9, b[i + 1] - 1e-9)
            assert predict_class(x, boundaries, float(rng.uniform(0.5, 100))) == i

    def test_midpoint_probability_approaches_one_at_high_sharpness(self):
        mid = 0.5 * (0.2 + 0.4)
        probs = class_probabilities(mid, FIG8, 1e3)
        assert probs[1] > 1.0 - 1e-6


class TestRatingLoss:
    def test_single_class_loss_is_zero(self):
        only = ClassBoundaries((0.0, 1.0))
        assert rating_loss([0.3], [0], only, 10.0) == pytest.approx(0.0, abs=1e-12)

    def test_half_probability_gives_ln2(self):
        halves = ClassBoundaries((0.0, 0.5, 1.0))
        # x exactly at the split: both exponents are 0, so Q = (1/2, 1/2)
        assert rating_loss([0.5], [0], halves, 30.0) == pytest.approx(math.log(2.0))

    def test_batch_is_sum_of_hand_oracle_terms(self):
        xs = [0.3, 0.55, 0.91]
        cs = [1, 2, 4]
        expected = 0.0
        for x, c in zip(xs, cs):
            exponents = [-30.0 * (x - lo) * (x - hi) for lo, hi in zip(FIG8.values[:-1], FIG8.values[1:])]
            expected += -math.log(hand_softmax(exponents)[c])
        assert rating_loss(xs, cs, FIG8, 30.0) == pytest.approx(expected, rel=1e-12)

    def test_positive_unless_certain(self):
        assert rating_loss([0.3], [1], FIG8, 30.0) > 0.0

    def test_out_of_range_class_rejected(self):
        with pytest.raises(ValueError):
            rating_loss([0.3], [5], FIG8, 30.0)

    def test_gradient_matches_finite_difference(self):
        rng = np.random.default_rng(4)
        xs = rng.uniform(0.02, 0.98, size=6)
        cs = rng.integers(0, 5, size=6)
        _, grad = rating_loss_grad(xs, cs, FIG8, 30.0)
        eps = 1e-6
        for i in range(xs.size):
            hi = xs.copy()
            hi[i] += eps
            lo = xs.copy()
            lo[i] -= eps
            numeric = (rating_loss(hi, cs, FIG8, 30.0) - rating_loss(lo, cs, FIG8, 30.0)) / (2 * eps)
            assert grad[i] == pytest.approx(numeric, rel=1e-5, abs=1e-7)

    def test_loss_near_minimum_at_observed_class_midpoint(self):
        # softmax competition shifts the exact minimizer slightly (and to
        # the outer endpoint for the edge classes), but the loss at the
        # class midpoint stays within a whisker of the grid minimum
        grid = np.linspace(0.0, 1.0, 2001)
        for c in range(5):
            losses = np.array([rating_loss([x], [c], FIG8, 30.0) for x in grid])
            midpoint = 0.5 * (FIG8.values[c] + FIG8.values[c + 1])
            at_mid = rating_loss([midpoint], [c], FIG8, 30.0)
            assert at_mid <= losses.min() + 0.25
            if 1 <= c <= 3:
                assert at_mid <= losses.min() + 1e-3
                best = grid[int(np.argmin(losses))]
                assert abs(best - midpoint) < 0.02


class TestMonotonicity:
    """Probability-vs-return trends.

    Each class probability is log-concave in the normalized return, hence
    exactly unimodal; the peak sits at the class midpoint in value terms
    for interior classes of equal-width boundary sets, while the two edge
    classes are monotone toward the nearest endpoint. The per-class score
    (softmax exponent) peaks exactly at the midpoint for any boundaries.
    """

    GRID = np.linspace(0.0, 1.0, 1001)

    def test_every_class_probability_is_unimodal(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            n = int(rng.integers(2, 7))
            inner = np.sort(rng.uniform(0.0, 1.0, size=n - 1))
            boundaries = ClassBoundaries((0.0, *inner.tolist(), 1.0))
            sharpness = float(rng.uniform(1.0, 500.0))
            probs = class_probabilities(self.GRID, boundaries, sharpness)
            for i in range(n):
                col = probs[:, i]
                peak = int(np.argmax(col))
                assert (np.diff(col[: peak + 1]) >= -1e-12).all()
                assert (np.diff(col[peak:]) <= 1e-12).all()

    def test_edge_classes_monotone_toward_endpoints(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            n = int(rng.integers(2, 7))
            inner = np.sort(rng.uniform(0.0, 1.0, size=n - 1))
            boundaries = ClassBoundaries((0.0, *inner.tolist(), 1.0))
            sharpness = float(rng.uniform(1.0, 500.0))
            probs = class_probabilities(self.GRID, boundaries, sharpness)
            assert (np.diff(probs[:, 0]) <= 1e-12).all()
            assert (np.diff(probs[:, n - 1]) >= -1e-12).all()

    def test_interior_class_peaks_at_midpoint_in_value(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(3, 7))
            width = 1.0 / n
            sharpness = float(rng.uniform(0.5 / width**2, 1000.0))
            boundaries = ClassBoundaries.equal_width(n)
            b = boundaries.as_array()
            probs = class_probabilities(self.GRID, boundaries, sharpness)
            for i in range(1, n - 1):
                mid = 0.5 * (b[i] + b[i + 1])
                at_mid = class_probabilities(mid, boundaries, sharpness)[i]
                assert probs[:, i].max() - at_mid <= 0.01

    def test_score_exactly_peaks_at_midpoint(self):
        from ratecraft.rating import class_scores

        rng = np.random.default_rng(12)
        for _ in range(100):
            n = int(rng.integers(2, 7))
            inner = np.sort(rng.uniform(0.0, 1.0, size=n - 1))
            boundaries = ClassBoundaries((0.0, *inner.tolist(), 1.0))
            sharpness = float(rng.uniform(1e-2, 1000.0))
            b = boundaries.as_array()
            scores = class_scores(self.GRID, boundaries, sharpness)
            for i in range(n):
                mid = 0.5 * (b[i] + b[i + 1])
                dist = np.abs(self.GRID - mid)
                order = np.argsort(dist, kind="stable")
                assert (np.diff(scores[order, i]) <= 1e-9).all()
