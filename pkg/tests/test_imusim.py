import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scaleobs.core import GravityModel, NavState, NoiseModel, rot_z_batch
from scaleobs.imusim import (
    ImuSeries,
    apply_scale,
    initial_state,
    integrate,
    synthesize,
)
from scaleobs.trajgen import Trajectory, TrajectorySpec, arc_length, generate


def stationary(n=991, rate=33.0, yaw_rate=0.0):
    t = np.arange(n) / rate
    zeros = np.zeros((n, 3))
    return Trajectory(
        timestamps=t,
        positions=zeros,
        velocities=zeros,
        accelerations=zeros,
        rotations=rot_z_batch(yaw_rate * t),
        yaw_rates=np.full(n, yaw_rate),
        curvatures=np.zeros(n),
    )


def max_position_error(kin):
    imu, _ = synthesize(kin)
    states = integrate(imu, initial_state(kin))
    est = np.array([s.position_world for s in states])
    return float(np.max(np.linalg.norm(est - kin.positions, axis=1)))


class TestSynthesize:
    def test_stationary_reads_gravity_only(self):
        imu, biases = synthesize(stationary())
        np.testing.assert_allclose(imu.accel, np.tile([0.0, 0.0, 9.81], (len(imu), 1)), atol=1e-12)
        np.testing.assert_array_equal(imu.gyro, 0.0)
        np.testing.assert_array_equal(biases.accel_bias, 0.0)

    def test_straight_is_constant(self, straight):
        imu, _ = synthesize(straight)
        np.testing.assert_allclose(imu.accel, np.tile([0.0, 0.0, 9.81], (len(imu), 1)), atol=1e-12)

    def test_circle_lateral_specific_force(self, circle):
        # centripetal v^2 / R with R = 3 / (2 pi)
        expected = 0.1**2 * 2 * np.pi / 3.0
        imu, _ = synthesize(circle)
        np.testing.assert_allclose(np.abs(imu.accel[:, 1]), expected, rtol=1e-9)
        assert expected == pytest.approx(0.02094, abs=1e-5)

    def test_gyro_reads_yaw_rate(self, figure8):
        imu, _ = synthesize(figure8)
        np.testing.assert_allclose(imu.gyro[:, 2], figure8.yaw_rates, atol=1e-15)
        np.testing.assert_array_equal(imu.gyro[:, :2], 0.0)

    def test_initial_bias_is_added(self, straight):
        clean, _ = synthesize(straight)
        biased, biases = synthesize(straight, initial_bias=([0.01, 0, 0], [0, 0.2, 0]))
        np.testing.assert_allclose(biased.accel - clean.accel, biases.accel_bias, atol=1e-15)
        np.testing.assert_allclose(biased.gyro - clean.gyro, biases.gyro_bias, atol=1e-15)
        np.testing.assert_allclose(biases.accel_bias[-1], [0, 0.2, 0])

    def test_white_noise_std(self, bno055):
        noise = NoiseModel(accel_noise_density=bno055.accel_noise_density, sample_rate=33.0)
        imu, _ = synthesize(stationary(n=40000), noise=noise, seed=3)
        sigma = bno055.accel_noise_density * np.sqrt(33.0 / 2)
        np.testing.assert_allclose(imu.accel.std(axis=0), sigma, rtol=0.02)

    def test_bias_random_walk_variance(self):
        rw = 1e-3
        noise = NoiseModel(accel_random_walk=rw)
        n, trials = 331, 400
        finals = np.array(
            [synthesize(stationary(n=n), noise=noise, seed=k)[1].accel_bias[-1] for k in range(trials)]
        )
        # variance after T seconds is rw^2 T
        T = (n - 1) / 33.0
        assert finals.var() == pytest.approx(rw**2 * T, rel=0.15)

    def test_same_seed_is_bitwise_identical(self, figure8, bno055):
        a, ba = synthesize(figure8, noise=bno055, seed=11)
        b, bb = synthesize(figure8, noise=bno055, seed=11)
        assert a.as_array().tobytes() == b.as_array().tobytes()
        assert ba.accel_bias.tobytes() == bb.accel_bias.tobytes()

    def test_different_seed_differs(self, figure8, bno055):
        a, _ = synthesize(figure8, noise=bno055, seed=1)
        b, _ = synthesize(figure8, noise=bno055, seed=2)
        assert not np.array_equal(a.accel, b.accel)

    def test_bias_length_matches(self, circle, bno055):
        imu, biases = synthesize(circle, noise=bno055, seed=0)
        assert len(biases) == len(imu) == len(circle)

    def test_empty_kinematics_rejected(self):
        with pytest.raises(ValueError):
            synthesize(stationary(n=0))

    def test_sequence_protocol(self, straight):
        imu, _ = synthesize(straight)
        sample = imu[5]
        assert sample.timestamp == pytest.approx(5 / 33.0)
        assert len(imu[:10]) == 10
        assert sum(1 for _ in imu) == len(imu)
        np.testing.assert_array_equal(ImuSeries.from_array(imu.as_array()).accel, imu.accel)

    def test_mismatched_shapes_rejected(self):
        with pytest.raises(ValueError):
            ImuSeries(np.arange(3.0), np.zeros((3, 3)), np.zeros((2, 3)))


class TestApplyScale:
    def test_identity(self, figure8):
        same = apply_scale(figure8, 1.0)
        np.testing.assert_array_equal(same.positions, figure8.positions)
        np.testing.assert_array_equal(same.curvatures, figure8.curvatures)

    def test_doubles_arc_length(self, straight):
        assert arc_length(apply_scale(straight, 2.0)) == pytest.approx(6.0, rel=1e-12)

    @pytest.mark.parametrize("s", [0.0, -1.0, np.inf, np.nan])
    def test_rejects_bad_scale(self, straight, s):
        with pytest.raises(ValueError):
            apply_scale(straight, s)

    def test_curvature_sign_kept(self, figure8):
        scaled = apply_scale(figure8, 3.0)
        np.testing.assert_array_equal(np.sign(scaled.curvatures), np.sign(figure8.curvatures))
        np.testing.assert_allclose(scaled.curvatures * 3.0, figure8.curvatures, rtol=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(min_value=0.05, max_value=20.0))
    def test_gravity_term_is_scale_invariant(self, s):
        kin = generate(TrajectorySpec(kind="figure8"))
        base, _ = synthesize(kin)
        scaled, _ = synthesize(apply_scale(kin, s))
        accel_body = np.einsum("nji,nj->ni", kin.rotations, kin.accelerations)
        # only the motion term changes; gravity enters both unscaled
        np.testing.assert_allclose(scaled.accel - base.accel, (s - 1.0) * accel_body, atol=1e-12)
        np.testing.assert_array_equal(scaled.gyro, base.gyro)


class TestIntegrate:
    def test_stationary_holds_state(self):
        kin = stationary()
        imu, _ = synthesize(kin)
        states = integrate(imu, initial_state(kin))
        assert len(states) == len(imu)
        last = states[-1]
        np.testing.assert_allclose(last.position_world, 0.0, atol=1e-9)
        np.testing.assert_allclose(last.velocity_world, 0.0, atol=1e-9)
        np.testing.assert_allclose(last.rotation, np.eye(3), atol=1e-12)

    @pytest.mark.parametrize("kind", ["straight", "circle", "figure8"])
    def test_round_trip_within_a_millimetre(self, kind):
        assert max_position_error(generate(TrajectorySpec(kind=kind))) < 1e-3

    def test_round_trip_error_at_most_quadratic(self):
        slow = max_position_error(generate(TrajectorySpec(kind="figure8", sample_rate=33.0)))
        fast = max_position_error(generate(TrajectorySpec(kind="figure8", sample_rate=330.0)))
        # a tenfold smaller step must cut the error by at least ~100x, less slack
        assert fast <= slow / 50.0 + 1e-12

    def test_constant_rate_is_pure_rotation(self):
        kin = stationary(yaw_rate=0.3)
        imu, _ = synthesize(kin)
        states = integrate(imu, initial_state(kin))
        yaw = np.arctan2(states[-1].rotation[1, 0], states[-1].rotation[0, 0])
        expected = np.angle(np.exp(1j * 0.3 * kin.timestamps[-1]))
        assert yaw == pytest.approx(expected, abs=1e-9)
        drift = max(np.linalg.norm(s.position_world) for s in states)
        assert drift < 1e-6

    def test_holds_initial_biases(self, straight):
        imu, _ = synthesize(straight, initial_bias=(np.zeros(3), [0.05, 0.0, 0.0]))
        start = initial_state(straight)
        start = NavState(
            rotation=start.rotation,
            velocity_world=start.velocity_world,
            position_world=start.position_world,
            accel_bias=[0.05, 0.0, 0.0],
        )
        states = integrate(imu, start)
        np.testing.assert_allclose(states[-1].position_world, straight.positions[-1], atol=1e-9)

    def test_non_monotone_timestamps_rejected(self, straight):
        imu, _ = synthesize(straight)
        t = imu.timestamps.copy()
        t[10] = t[9]
        with pytest.raises(ValueError, match="strictly increasing"):
            integrate(ImuSeries(t, imu.gyro, imu.accel), initial_state(straight))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            integrate(ImuSeries(np.zeros(0), np.zeros((0, 3)), np.zeros((0, 3))), NavState())

    def test_custom_gravity(self):
        g = GravityModel(np.array([0.0, 0.0, -9.8]))
        kin = stationary(n=100)
        imu, _ = synthesize(kin, gravity=g)
        np.testing.assert_allclose(imu.accel[:, 2], 9.8)
        states = integrate(imu, initial_state(kin), gravity=g)
        np.testing.assert_allclose(states[-1].position_world, 0.0, atol=1e-12)
