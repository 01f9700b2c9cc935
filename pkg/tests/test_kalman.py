"""The shared CV filter: exactness on clean data, linearity, RTS behaviour."""

import numpy as np

from egowarn import kalman

DT = 0.4


def cv_track(start, vel, n, dt=DT):
    steps = np.arange(n)[:, None] * dt
    return np.asarray(start) + steps * np.asarray(vel)


class TestForwardFilter:
    def test_exact_on_clean_cv_data(self):
        zs = cv_track([1.0, -2.0], [0.5, 1.25], 10)
        res = kalman.forward_filter(zs, DT, sigma_a=0.5, sigma_m=0.1)
        np.testing.assert_allclose(res.positions, zs, atol=1e-9)
        np.testing.assert_allclose(res.velocities, np.tile([0.5, 1.25], (10, 1)), atol=1e-9)

    def test_linear_in_measurements(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a = rng.normal(0, 3, size=(8, 2))
            b = rng.normal(0, 3, size=(8, 2))
            ra = kalman.forward_filter(a, DT, 0.5, 0.1)
            rb = kalman.forward_filter(b, DT, 0.5, 0.1)
            rab = kalman.forward_filter(a - b, DT, 0.5, 0.1)
            np.testing.assert_allclose(
                rab.positions, ra.positions - rb.positions, atol=1e-9
            )
            np.testing.assert_allclose(
                rab.velocities, ra.velocities - rb.velocities, atol=1e-9
            )

    def test_gap_rows_propagate(self):
        zs = cv_track([0.0, 0.0], [1.0, 0.0], 8)
        with_gap = zs.copy()
        with_gap[4] = np.nan
        res = kalman.forward_filter(with_gap, DT, 0.5, 0.1)
        # clean CV data: the propagated estimate equals the missing truth
        np.testing.assert_allclose(res.positions, zs, atol=1e-9)

    def test_single_measurement_fallback(self):
        zs = np.full((5, 2), np.nan)
        zs[2] = (3.0, 4.0)
        res = kalman.forward_filter(zs, DT, 0.5, 0.1)
        assert res.first_valid == 2
        np.testing.assert_allclose(res.positions[2], [3.0, 4.0])
        np.testing.assert_allclose(res.velocities[2], [0.0, 0.0])
        assert np.isnan(res.positions[0]).all() and np.isnan(res.positions[4]).all()

    def test_leading_gaps_stay_empty(self):
        zs = cv_track([0.0, 0.0], [1.0, 1.0], 6)
        zs[:2] = np.nan
        res = kalman.forward_filter(zs, DT, 0.5, 0.1)
        assert res.first_valid == 2
        assert np.isnan(res.positions[:2]).all()
        np.testing.assert_allclose(res.positions[2:], cv_track([0.0, 0.0], [1.0, 1.0], 6)[2:], atol=1e-9)


class TestCausalEqualsBatch:
    def test_streaming_matches_batch_with_gaps(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            n = int(rng.integers(3, 30))
            zs = rng.normal(0, 5, size=(n, 2))
            for i in range(n):
                if rng.random() < 0.25:
                    zs[i] = np.nan
            batch = kalman.forward_filter(zs, DT, 0.5, 0.1)
            filt = kalman.CausalCvFilter(DT, 0.5, 0.1)
            positions = np.full((n, 2), np.nan)
            for i in range(n):
                z = None if np.isnan(zs[i]).any() else zs[i]
                for est in filt.step(z):
                    positions[est.slot] = est.position
            np.testing.assert_array_equal(
                np.isnan(positions), np.isnan(batch.positions)
            )
            mask = ~np.isnan(positions)
            np.testing.assert_allclose(positions[mask], batch.positions[mask], atol=0)


class TestRts:
    def test_exact_on_clean_cv_data(self):
        zs = cv_track([2.0, 0.0], [-1.25, 0.3], 12)
        res = kalman.forward_filter(zs, DT, 0.5, 0.1)
        pos, vel = kalman.rts_smooth(res, DT, 0.5)
        np.testing.assert_allclose(pos, zs, atol=1e-9)
        np.testing.assert_allclose(vel, np.tile([-1.25, 0.3], (12, 1)), atol=1e-9)

    def test_reduces_noise_on_static_target(self):
        # Monte-Carlo oracle: smoother output must beat the raw measurements
        rng = np.random.default_rng(99)
        raw_err, smooth_err = [], []
        for _ in range(100):
            zs = rng.normal(0.0, 0.2, size=(25, 2))
            res = kalman.forward_filter(zs, DT, 0.5, 0.1)
            pos, _ = kalman.rts_smooth(res, DT, 0.5)
            raw_err.append(np.sqrt((zs**2).mean()))
            smooth_err.append(np.sqrt((pos**2).mean()))
        assert np.mean(smooth_err) < np.mean(raw_err)

    def test_linear_in_measurements(self):
        rng = np.random.default_rng(17)
        a = rng.normal(0, 3, size=(10, 2))
        b = rng.normal(0, 3, size=(10, 2))
        pa, _ = kalman.rts_smooth(kalman.forward_filter(a, DT, 0.5, 0.1), DT, 0.5)
        pb, _ = kalman.rts_smooth(kalman.forward_filter(b, DT, 0.5, 0.1), DT, 0.5)
        pab, _ = kalman.rts_smooth(kalman.forward_filter(a - b, DT, 0.5, 0.1), DT, 0.5)
        np.testing.assert_allclose(pab, pa - pb, atol=1e-9)


class TestExtrapolate:
    def test_rollout_formula(self):
        out = kalman.extrapolate(np.array([1.0, 2.0]), np.array([0.5, -1.0]), 0.4, 3)
        np.testing.assert_allclose(out, [[1.2, 1.6], [1.4, 1.2], [1.6, 0.8]])
