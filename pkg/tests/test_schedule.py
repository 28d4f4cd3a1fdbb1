"""Grid construction, fraction mapping, and training-time level samplers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowjump.schedule import (
    ScheduleConfig,
    TimeGrid,
    build_time_grid,
    sample_dsm_time,
    sample_training_triplet,
    time_from_fraction,
)


class TestScheduleConfig:
    def test_defaults(self):
        cfg = ScheduleConfig()
        assert cfg.sigma_min == 0.002
        assert cfg.sigma_max == 80.0
        assert cfg.rho == 7.0
        assert cfg.sigma_data == 0.5
        assert cfg.n_grid == 18

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"sigma_min": 0.0},
            {"sigma_min": 2.0, "sigma_max": 1.0},
            {"rho": 0.5},
            {"n_grid": 1},
            {"sigma_data": 0.0},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            ScheduleConfig(**kwargs)


class TestTimeFromFraction:
    def test_endpoints_exact(self, sched):
        assert time_from_fraction(sched, 0.0) == sched.sigma_max
        assert time_from_fraction(sched, 1.0) == sched.sigma_min

    def test_known_midpoint(self, sched):
        # Frozen from the closed form ((80^(1/7) + 0.002^(1/7)) / 2)^7.
        assert time_from_fraction(sched, 0.5) == pytest.approx(2.515218976147159, rel=1e-12)

    def test_vector_input(self, sched):
        xi = np.array([0.0, 0.25, 0.5, 1.0])
        t = time_from_fraction(sched, xi)
        assert t.shape == (4,)
        assert t[0] == sched.sigma_max and t[-1] == sched.sigma_min

    def test_rejects_out_of_range(self, sched):
        with pytest.raises(ValueError):
            time_from_fraction(sched, -0.01)
        with pytest.raises(ValueError):
            time_from_fraction(sched, 1.01)

    @given(st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=50, deadline=None)
    def test_monotone_decreasing(self, a, b):
        cfg = ScheduleConfig()
        lo, hi = sorted((a, b))
        if lo < hi:
            assert time_from_fraction(cfg, lo) >= time_from_fraction(cfg, hi)

    @given(st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=50, deadline=None)
    def test_range(self, xi):
        cfg = ScheduleConfig()
        t = time_from_fraction(cfg, xi)
        assert cfg.sigma_min <= t <= cfg.sigma_max


class TestTimeGrid:
    def test_build_shape_and_endpoints(self, sched, grid):
        assert len(grid) == sched.n_grid
        assert grid.times[0] == sched.sigma_max
        assert grid.times[-1] == sched.sigma_min
        assert np.all(np.diff(grid.times) < 0.0)

    def test_concentrates_near_min(self, grid):
        # Curved spacing: gaps shrink monotonically toward the low-noise end.
        gaps = -np.diff(grid.times)
        assert np.all(np.diff(gaps) < 0.0)

    def test_rejects_non_monotone(self):
        with pytest.raises(ValueError):
            TimeGrid(times=np.array([1.0, 2.0, 0.5]), sigma_min=0.5, sigma_max=1.0)

    def test_rejects_wrong_endpoints(self):
        with pytest.raises(ValueError):
            TimeGrid(times=np.array([1.0, 0.5]), sigma_min=0.4, sigma_max=1.0)


class TestSampleDsmTime:
    def test_scalar_and_vector(self, sched, rng):
        t = sample_dsm_time(sched, rng)
        assert isinstance(t, float)
        ts = sample_dsm_time(sched, rng, size=1000)
        assert ts.shape == (1000,)
        assert np.all(ts >= sched.sigma_min) and np.all(ts <= sched.sigma_max)

    def test_covers_both_branches(self, sched, rng):
        ts = sample_dsm_time(sched, rng, size=4000)
        # The log-normal branch concentrates near exp(-1.2) ~ 0.3; the curved
        # branch with fraction <= 0.7 reaches far into the large-noise regime.
        assert np.mean(ts < 1.0) > 0.3
        assert np.mean(ts > 10.0) > 0.05

    def test_deterministic_given_seed(self, sched):
        a = sample_dsm_time(sched, np.random.default_rng(7), size=64)
        b = sample_dsm_time(sched, np.random.default_rng(7), size=64)
        np.testing.assert_array_equal(a, b)


class TestSampleTrainingTriplet:
    def test_constraints_hold(self, grid, rng):
        for _ in range(500):
            t, s, u = sample_training_triplet(grid, 4, rng)
            assert s <= u < t
            i = int(np.flatnonzero(grid.times == t)[0])
            j = int(np.flatnonzero(grid.times == u)[0])
            assert j - i <= 4
            assert t in grid.times and s in grid.times and u in grid.times

    def test_rejects_bad_max_steps(self, grid, rng):
        with pytest.raises(ValueError):
            sample_training_triplet(grid, 0, rng)

    def test_equal_s_u_possible(self, grid, rng):
        seen_equal = any(
            s == u for t, s, u in (sample_training_triplet(grid, 17, rng) for _ in range(300))
        )
        assert seen_equal
