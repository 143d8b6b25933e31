import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scaleobs.allan import (
    AllanCurve,
    MissingRegionError,
    allan_deviation,
    allan_from_imu,
    default_cluster_sizes,
    fit_noise_params,
    fit_sensor,
    generate_static_log,
)
from scaleobs.core import NoiseModel

RATE = 33.0


def naive_adev(x, m):
    # independent oracle: explicit cluster averages, every overlapping pair
    n = len(x)
    means = [np.mean(x[k : k + m]) for k in range(n - m + 1)]
    pairs = [(means[k + m] - means[k]) ** 2 for k in range(n - 2 * m + 1)]
    return math.sqrt(0.5 * np.mean(pairs))


def white(density, seconds, seed):
    n = int(seconds * RATE)
    return density * math.sqrt(RATE / 2) * np.random.default_rng(seed).standard_normal(n)


def walk(k, seconds, seed):
    n = int(seconds * RATE)
    return np.cumsum(k / math.sqrt(RATE) * np.random.default_rng(seed).standard_normal(n))


def loglog_slope(curve, lo, hi):
    sel = (curve.taus >= lo) & (curve.taus <= hi)
    return np.polyfit(np.log(curve.taus[sel]), np.log(curve.deviations[sel]), 1)[0]


@pytest.fixture(scope="module")
def long_log():
    # seven hours so the random-walk region is resolved on every axis
    return generate_static_log(NoiseModel.bno055(), 7 * 3600, seed=7)


@pytest.fixture(scope="module")
def long_curves(long_log):
    return allan_from_imu(long_log)


class TestAllanDeviation:
    def test_constant_signal(self):
        curve = allan_deviation(np.full(2000, 9.81), RATE)
        np.testing.assert_array_equal(curve.deviations, 0.0)

    @pytest.mark.parametrize("m", [1, 2, 5, 17, 40])
    def test_matches_naive_oracle(self, m):
        x = np.random.default_rng(m).normal(size=200)
        curve = allan_deviation(x, RATE, taus=[m / RATE])
        assert curve.deviations[0] == pytest.approx(naive_adev(x, m), rel=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-1e3, 1e3, allow_nan=False), st.integers(0, 2**32 - 1))
    def test_offset_invariant(self, offset, seed):
        x = np.random.default_rng(seed).normal(size=500)
        a = allan_deviation(x, RATE).deviations
        b = allan_deviation(x + offset, RATE).deviations
        np.testing.assert_allclose(a, b, rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize("k", [0.5, 3.0])
    def test_scales_linearly(self, k):
        x = np.random.default_rng(1).normal(size=800)
        np.testing.assert_allclose(
            allan_deviation(k * x, RATE).deviations, k * allan_deviation(x, RATE).deviations, rtol=1e-9
        )

    def test_default_grid(self):
        ms = default_cluster_sizes(10_000)
        assert ms[0] == 2 and ms[-1] == 2000
        assert np.all(np.diff(ms) > 0)
        # 20 per decade over three decades, minus rounding duplicates at the low end
        assert 50 <= len(ms) <= 61

    def test_realized_taus_are_whole_samples(self):
        curve = allan_deviation(np.random.default_rng(0).normal(size=1000), RATE, taus=[0.1, 1.0, 1.01])
        np.testing.assert_allclose(curve.taus * RATE, np.round(curve.taus * RATE))
        assert len(curve) == 2

    def test_white_noise_slope(self):
        curve = allan_deviation(white(3.31e-3, 7200, seed=0), RATE)
        assert loglog_slope(curve, 0.1, 100.0) == pytest.approx(-0.5, rel=0.05)
        # the discretization reads density / sqrt(2 tau)
        at_one = np.interp(0.0, np.log(curve.taus), np.log(curve.deviations))
        assert math.exp(at_one) == pytest.approx(3.31e-3 / math.sqrt(2), rel=0.05)

    def test_random_walk_slope(self):
        curve = allan_deviation(walk(7.23e-5, 7200, seed=0), RATE)
        assert loglog_slope(curve, 1.0, 100.0) == pytest.approx(0.5, rel=0.05)

    def test_too_few_samples_names_limit(self):
        with pytest.raises(ValueError, match="max feasible tau is 3.0303"):
            allan_deviation(np.zeros(200), RATE, taus=[10.0])

    @pytest.mark.parametrize(
        "kwargs",
        [{"rate": 0.0}, {"rate": -1.0}, {"samples": [np.nan] * 100}, {"taus": [0.001]}],
    )
    def test_invalid_inputs(self, kwargs):
        args = {"samples": np.zeros(100), "rate": RATE, **kwargs}
        with pytest.raises(ValueError):
            allan_deviation(args["samples"], args["rate"], args.get("taus"))

    def test_too_short_for_default_grid(self):
        with pytest.raises(ValueError, match="too few"):
            allan_deviation(np.zeros(8), RATE)


class TestCurve:
    @pytest.mark.parametrize(
        "taus, devs",
        [([1.0, 2.0], [1.0]), ([2.0, 1.0], [1.0, 1.0]), ([1.0, 2.0], [-1.0, 1.0]), ([0.0, 1.0], [1.0, 1.0])],
    )
    def test_rejects_invalid(self, taus, devs):
        with pytest.raises(ValueError):
            AllanCurve(taus, devs)


class TestFit:
    @pytest.mark.slow
    @pytest.mark.parametrize(
        "prefix, density, walk_k",
        [("a", 3.31e-3, 7.23e-5), ("w", 2.22e-2, 8.83e-5)],
    )
    def test_round_trip_seven_hours(self, long_curves, prefix, density, walk_k):
        fit = fit_sensor(long_curves, prefix)
        assert fit.noise_density == pytest.approx(density, rel=0.10)
        assert fit.random_walk == pytest.approx(walk_k, rel=0.20)

    def test_white_only_reports_missing_walk(self):
        curve = allan_deviation(white(3.31e-3, 7200, seed=2), RATE)
        with pytest.raises(MissingRegionError) as info:
            fit_noise_params(curve)
        assert info.value.region == "random_walk"
        assert info.value.partial.noise_density == pytest.approx(3.31e-3, rel=0.10)
        assert math.isnan(info.value.partial.random_walk)

    def test_walk_only_reports_missing_white(self):
        curve = allan_deviation(walk(1e-3, 3600, seed=3), RATE)
        with pytest.raises(MissingRegionError) as info:
            fit_noise_params(curve)
        assert info.value.region == "white_noise"

    def test_constant_signal_has_no_noise(self):
        curve = allan_deviation(np.full(5000, 1.0), RATE)
        with pytest.raises(MissingRegionError):
            fit_noise_params(curve)

    def test_needs_two_decades(self):
        curve = AllanCurve([1.0, 2.0, 5.0, 10.0], [1.0, 0.7, 0.45, 0.3])
        with pytest.raises(ValueError, match="two decades"):
            fit_noise_params(curve)

    def test_fit_json(self, long_curves):
        fit = fit_noise_params(long_curves["az"])
        payload = fit.to_dict()
        json.dumps(payload, allow_nan=False)
        assert payload["noise_density"] > 0
        assert fit.fit_quality < 0.2

    def test_sensor_without_walk_raises(self):
        curves = {f"a{c}": allan_deviation(white(3.31e-3, 3600, seed=i), RATE) for i, c in enumerate("xyz")}
        with pytest.raises(MissingRegionError):
            fit_sensor(curves, "a")

    def test_unknown_prefix(self, long_curves):
        with pytest.raises(ValueError, match="no curves"):
            fit_sensor(long_curves, "q")


class TestStaticLog:
    def test_gravity_on_z(self):
        imu = generate_static_log(NoiseModel.bno055(), 600, seed=0)
        assert imu.accel[:, 2].mean() == pytest.approx(9.81, abs=2e-3)
        assert abs(imu.gyro.mean()) < 5e-3
        assert len(imu) == 600 * 33 + 1

    def test_deterministic(self):
        a = generate_static_log(NoiseModel.bno055(), 400, seed=5)
        b = generate_static_log(NoiseModel.bno055(), 400, seed=5)
        assert a.as_array().tobytes() == b.as_array().tobytes()

    def test_too_short(self):
        with pytest.raises(ValueError, match="at least"):
            generate_static_log(NoiseModel.bno055(), 60, seed=0)

    def test_six_channels(self, long_curves):
        assert set(long_curves) == {"wx", "wy", "wz", "ax", "ay", "az"}
