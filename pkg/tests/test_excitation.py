import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scaleobs.core import NoiseModel, so3_exp
from scaleobs.excitation import (
    UNOBSERVABLE,
    ExcitationLevel,
    classify,
    excitation_index,
    excitation_windowed,
    fisher_per_sample,
    fisher_total,
    verify_fisher_against_likelihood,
)
from scaleobs.imusim import ImuSeries, apply_scale, synthesize


def series(wz, ay, rate=33.0):
    wz, ay = np.asarray(wz, float), np.asarray(ay, float)
    n = len(wz)
    gyro = np.zeros((n, 3))
    accel = np.tile([0.0, 0.0, 9.81], (n, 1))
    gyro[:, 2], accel[:, 1] = wz, ay
    return ImuSeries(np.arange(n) / rate, gyro, accel)


def alternating(amplitude, n=1000):
    # population std of +/-a is exactly a
    return amplitude * np.where(np.arange(n) % 2 == 0, 1.0, -1.0)


class TestExcitationIndex:
    def test_constant_signals_give_zero(self):
        report = excitation_index(series(np.full(50, 0.3), np.full(50, -1.2)))
        assert report.excitation_index == pytest.approx(0.0, abs=1e-30)
        assert report.classification is ExcitationLevel.WEAK

    @pytest.mark.parametrize(
        "sigma_w, sigma_a, expected, level",
        [
            (0.316, 0.75, 0.237, ExcitationLevel.STRONG),
            (5.9e-4, 0.012, 7.1e-6, ExcitationLevel.WEAK),
        ],
    )
    def test_reference_magnitudes(self, sigma_w, sigma_a, expected, level):
        report = excitation_index(series(alternating(sigma_w), alternating(sigma_a)))
        assert report.sigma_yaw_rate == pytest.approx(sigma_w, rel=1e-12)
        assert report.sigma_lateral_accel == pytest.approx(sigma_a, rel=1e-12)
        # reference values are rounded products of rounded inputs
        assert report.excitation_index == pytest.approx(expected, rel=5e-3)
        assert report.classification is level

    def test_index_is_exact_product(self, figure8, bno055):
        imu, _ = synthesize(figure8, noise=bno055, seed=5)
        report = excitation_index(imu)
        assert report.excitation_index == report.sigma_yaw_rate * report.sigma_lateral_accel

    def test_needs_two_samples(self):
        with pytest.raises(ValueError, match="at least 2"):
            excitation_index(series([0.1], [0.2]))

    @settings(max_examples=40, deadline=None)
    @given(
        st.floats(-5, 5, allow_nan=False),
        st.floats(-5, 5, allow_nan=False),
        st.integers(0, 2**32 - 1),
    )
    def test_invariant_to_constant_offsets(self, dw, da, seed):
        rng = np.random.default_rng(seed)
        wz, ay = rng.normal(size=200), rng.normal(size=200)
        base = excitation_index(series(wz, ay)).excitation_index
        shifted = excitation_index(series(wz + dw, ay + da)).excitation_index
        assert shifted == pytest.approx(base, rel=1e-9, abs=1e-15)

    def test_noise_free_ordering(self, straight, circle, figure8):
        e = {
            name: excitation_index(synthesize(kin)[0]).excitation_index
            for name, kin in [("straight", straight), ("circle", circle), ("figure8", figure8)]
        }
        assert e["straight"] == 0.0
        # constant yaw rate makes the noise-free circle exactly zero as well
        assert e["circle"] == pytest.approx(0.0, abs=1e-15)
        assert e["figure8"] > 1e-3

    @pytest.mark.parametrize(
        "value, level",
        [
            (0.0, ExcitationLevel.WEAK),
            (9.99e-5, ExcitationLevel.WEAK),
            (1e-4, ExcitationLevel.MODERATE),
            (1e-2, ExcitationLevel.MODERATE),
            (1.01e-2, ExcitationLevel.STRONG),
        ],
    )
    def test_classification_thresholds(self, value, level):
        assert classify(value) is level

    def test_json_keys(self, circle):
        imu, _ = synthesize(circle)
        payload = excitation_index(imu).to_dict(fisher_total(circle, 0.0134))
        assert set(payload) == {
            "sigma_yaw_rate",
            "sigma_lateral_accel",
            "excitation_index",
            "classification",
            "fisher_total",
            "crlb_std",
        }
        json.dumps(payload, allow_nan=False)

    def test_json_marks_unobservable(self, straight):
        imu, _ = synthesize(straight)
        payload = excitation_index(imu).to_dict(fisher_total(straight, 0.0134))
        assert payload["crlb_std"] == UNOBSERVABLE
        json.dumps(payload, allow_nan=False)


class TestWindowed:
    def test_stationary_is_zero(self):
        t, e = excitation_windowed(series(np.zeros(400), np.zeros(400)), 5.0)
        np.testing.assert_array_equal(e, 0.0)
        assert len(t) == 400 - 166 + 1

    def test_full_window_matches_index(self, figure8):
        imu, _ = synthesize(figure8)
        duration = imu.timestamps[-1] - imu.timestamps[0]
        t, e = excitation_windowed(imu, duration)
        assert len(e) == 1
        assert e[0] == pytest.approx(excitation_index(imu).excitation_index, rel=1e-12)
        assert t[0] == imu.timestamps[-1]

    def test_step_to_figure_eight_rises(self, straight, figure8):
        a, _ = synthesize(straight)
        b, _ = synthesize(figure8)
        dt = 1 / 33.0
        joined = ImuSeries(
            np.concatenate([a.timestamps, a.timestamps[-1] + dt + b.timestamps]),
            np.vstack([a.gyro, b.gyro]),
            np.vstack([a.accel, b.accel]),
        )
        window = 5.0
        t, e = excitation_windowed(joined, window)
        switch = a.timestamps[-1]
        before = e[t <= switch][-1]
        after = e[t >= switch + window][0]
        assert before == 0.0
        assert after > 1e-3
        assert after >= 10 * before

    def test_emits_one_value_per_sample_after_first_window(self, circle):
        imu, _ = synthesize(circle)
        t, e = excitation_windowed(imu, 2.0)
        m = round(2.0 * 33) + 1
        assert len(t) == len(e) == len(imu) - m + 1
        np.testing.assert_array_equal(t, imu.timestamps[m - 1 :])

    def test_rejects_short_window(self, circle):
        imu, _ = synthesize(circle)
        with pytest.raises(ValueError, match="shorter than 2 samples"):
            excitation_windowed(imu, 0.01)

    def test_rejects_window_longer_than_series(self, circle):
        imu, _ = synthesize(circle)
        with pytest.raises(ValueError, match="exceeds"):
            excitation_windowed(imu, 100.0)


class TestFisher:
    def test_zero_acceleration(self):
        assert fisher_per_sample([0.0, 0.0, 0.0], 0.0134) == 0.0

    def test_circle_sample_value(self):
        assert fisher_per_sample([0.0209, 0.0, 0.0], 0.0134) == pytest.approx(2.43, abs=5e-3)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3),
        st.floats(1e-3, 1.0),
    )
    def test_doubling_quadruples(self, a, sigma):
        a = np.asarray(a)
        once = fisher_per_sample(a, sigma)
        assert fisher_per_sample(2 * a, sigma) == pytest.approx(4 * once, rel=1e-12, abs=1e-300)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3))
    def test_rotation_invariant(self, axis_angle):
        a = np.array([0.3, -0.2, 0.05])
        R = so3_exp(axis_angle)
        assert fisher_per_sample(R @ a, 0.02) == pytest.approx(fisher_per_sample(a, 0.02), rel=1e-12)

    @pytest.mark.parametrize("sigma", [0.0, -1.0])
    def test_rejects_nonpositive_sigma(self, sigma):
        with pytest.raises(ValueError):
            fisher_per_sample([1.0, 0, 0], sigma)

    def test_straight_total_is_zero(self, straight):
        info = fisher_total(straight, 0.0134)
        assert info.total == 0.0
        assert math.isinf(info.crlb_std)
        assert not info.observable

    def test_circle_total_closed_form(self, circle):
        info = fisher_total(circle, 0.0134)
        expected = (0.1**2 * 2 * np.pi / 3.0 / 0.0134) ** 2 * 30.0
        assert info.total == pytest.approx(expected, rel=1e-9)
        assert info.total == pytest.approx(73.3, abs=0.05)
        assert info.crlb_std == pytest.approx(1 / math.sqrt(info.total))

    def test_total_is_trapezoid_of_per_sample(self, figure8):
        info = fisher_total(figure8, 0.0134)
        assert info.total == pytest.approx(np.trapezoid(info.per_sample, info.timestamps), rel=1e-14)

    def test_figure_eight_exceeds_circle(self, circle, figure8):
        assert fisher_total(figure8, 0.0134).total > fisher_total(circle, 0.0134).total

    @pytest.mark.parametrize("factor", [0.5, 2.0, 10.0])
    def test_inverse_square_in_sigma(self, figure8, factor):
        base = fisher_total(figure8, 0.0134).total
        assert fisher_total(figure8, 0.0134 * factor).total == pytest.approx(base / factor**2, rel=1e-12)

    @pytest.mark.parametrize("s", [0.5, 2.0])
    def test_quadratic_in_scale(self, circle, s):
        base = fisher_total(circle, 0.0134).total
        assert fisher_total(apply_scale(circle, s), 0.0134).total == pytest.approx(s**2 * base, rel=1e-12)


class TestLikelihoodCheck:
    def test_circle_sample_within_two_percent(self, circle):
        err = verify_fisher_against_likelihood(circle[100], NoiseModel.bno055(), trials=100_000, seed=0)
        assert err < 0.02

    def test_zero_acceleration_defined_as_zero(self, straight):
        assert verify_fisher_against_likelihood(straight[10], 0.0134, trials=1000) == 0.0

    def test_rotation_does_not_change_analytic_value(self, circle):
        rng = np.random.default_rng(4)
        a = circle[50].acceleration_world
        values = [fisher_per_sample(so3_exp(rng.normal(size=3)) @ a, 0.0134) for _ in range(2)]
        assert abs(values[0] - values[1]) < 1e-12

    def test_rejects_few_trials(self, circle):
        with pytest.raises(ValueError):
            verify_fisher_against_likelihood(circle[0], 0.0134, trials=10)
