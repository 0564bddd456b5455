"""Lifts, fBm sampling, seminorms, metric, shifts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpde_lab import roughpath as rpm


def lift_linear(n=64, gamma=0.4):
    dt = 1.0 / n
    return rpm.lift_piecewise_linear(np.arange(n + 1) * dt, 0.0, dt, gamma=gamma)


class TestLift:
    def test_linear_path_single_cell(self):
        rp = rpm.lift_piecewise_linear([0.0, 1.0], 0.0, 1.0, gamma=0.4)
        assert rp.xx[0] == 0.5

    def test_constant_path_has_zero_area(self):
        rp = rpm.lift_piecewise_linear(np.full(9, 3.7), 0.0, 0.125, gamma=0.4)
        assert np.all(rp.xx == 0.0)
        assert np.all(rp.x == 0.0)

    def test_rebased_to_zero(self):
        rp = rpm.lift_piecewise_linear([5.0, 6.0, 4.5], 0.0, 0.5, gamma=0.4)
        assert rp.x[0] == 0.0
        assert rp.x[1] == 1.0

    def test_cell_area_matches_riemann_oracle(self):
        # brute-force Riemann approximation of the iterated integral of the
        # piecewise-linear interpolant, 1e4 sub-steps per cell
        rng = np.random.default_rng(5)
        samples = np.cumsum(rng.normal(0, 0.5, 8))
        dt = 0.25
        rp = rpm.lift_piecewise_linear(samples, 0.0, dt, gamma=0.4)
        sub = 10_000
        for k in range(7):
            dx = rp.x[k + 1] - rp.x[k]
            r = (np.arange(sub) + 0.5) / sub
            riemann = np.sum((r * dx) * (dx / sub))
            assert rp.xx[k] == pytest.approx(riemann, rel=1e-6)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            rpm.lift_piecewise_linear([1.0], 0.0, 1.0)


class TestFbm:
    def test_brownian_increment_variance(self):
        n, reps = 8, 10_000
        incs = []
        for seed in range(reps):
            x = rpm.sample_fbm(0.5, n, seed)
            incs.append(np.diff(x))
        var = float(np.var(np.concatenate(incs)))
        assert abs(var - 1.0 / n) <= 0.05 / n

    def test_starts_at_zero(self):
        for hurst in (0.4, 0.5, 0.75, 1.0):
            assert rpm.sample_fbm(hurst, 16, seed=3)[0] == 0.0

    def test_terminal_variance_h04(self):
        reps = 10_000
        finals = np.array([rpm.sample_fbm(0.4, 16, seed)[-1] for seed in range(reps)])
        assert abs(np.var(finals) - 1.0) <= 0.05

    def test_self_similarity_scaling(self):
        a = rpm.sample_fbm(0.4, 32, seed=11, horizon=4.0)
        b = rpm.sample_fbm(0.4, 32, seed=11, horizon=1.0)
        assert a == pytest.approx(b * 4.0 ** 0.4)

    def test_deterministic_per_seed(self):
        assert np.array_equal(rpm.sample_fbm(0.45, 32, 7), rpm.sample_fbm(0.45, 32, 7))

    def test_hurst_validation(self):
        with pytest.raises(ValueError):
            rpm.sample_fbm(0.2, 16, 0)
        with pytest.raises(ValueError):
            rpm.sample_fbm(1.2, 16, 0)
        with pytest.raises(ValueError):
            rpm.sample_fbm(0.5, 1, 0)


class TestSeminorm:
    def test_linear_path_value(self):
        rp = lift_linear(64, gamma=0.4)
        # |t-s| / (t-s)^0.4 maximal at the full interval
        assert rpm.holder_seminorm(rp, "first") == pytest.approx(1.0, abs=1e-12)

    def test_constant_path(self):
        rp = rpm.lift_piecewise_linear(np.zeros(17), 0.0, 1 / 16, gamma=0.4)
        assert rpm.holder_seminorm(rp, "first") == 0.0
        assert rpm.holder_seminorm(rp, "second") == 0.0

    def test_empty_interval(self):
        rp = lift_linear(8)
        assert rpm.holder_seminorm(rp, "first", (0.25, 0.25)) == 0.0

    def test_refinement_monotonicity(self):
        xs = rpm.sample_fbm(0.5, 128, seed=2)
        fine = rpm.lift_piecewise_linear(xs, 0.0, 1 / 128, gamma=0.4)
        coarse = rpm.coarsen(fine, 2)
        for level in ("first", "second"):
            assert rpm.holder_seminorm(fine, level) >= rpm.holder_seminorm(coarse, level)

    def test_shift_equivariance_exact(self):
        xs = rpm.sample_fbm(0.45, 96, seed=9)
        rp = rpm.lift_piecewise_linear(xs, 0.0, 1 / 32, gamma=0.4)
        sh = rpm.shift(rp, 0.5)
        for level in ("first", "second"):
            assert rpm.holder_seminorm(sh, level, (0.0, 1.0)) == \
                rpm.holder_seminorm(rp, level, (0.5, 1.5))


class TestChen:
    def test_linear_path_exact_area(self):
        rp = lift_linear(64)
        dt = rp.dt
        for i in range(0, 65, 7):
            for j in range(i + 1, 65, 5):
                assert rp.second_level(i, j) == ((j - i) * dt) ** 2 / 2.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=10 ** 6))
    def test_chen_defect_random_paths(self, seed):
        rng = np.random.default_rng(seed)
        n = 24
        x = np.concatenate([[0.0], np.cumsum(rng.normal(0, 0.3, n))])
        xx = rng.normal(0, 0.1, n)
        rp = rpm.GridRoughPath(0.0, 0.125, x, xx, 0.4)
        idx = rng.integers(0, n + 1, size=(20, 3))
        for raw in idx:
            i, u, j = np.sort(raw)
            if i == u or u == j:
                continue
            defect = rpm.chen_defect(rp, i, u, j)
            assert abs(defect) <= 1e-12 * (1.0 + abs(rp.second_level(i, j)))


class TestMetric:
    def test_self_distance_zero(self):
        rp = lift_linear(32)
        assert rpm.rough_metric(rp, rp) == 0.0

    def test_distance_to_zero_is_rho(self):
        xs = rpm.sample_fbm(0.5, 64, seed=4)
        rp = rpm.lift_piecewise_linear(xs, 0.0, 1 / 64, gamma=0.4)
        rho = rpm.rough_metric(rp, rpm.zero_path_like(rp))
        expected = rpm.holder_seminorm(rp, "first") + rpm.holder_seminorm(rp, "second")
        assert rho == pytest.approx(expected, rel=1e-12)

    def test_symmetry(self):
        a = rpm.lift_piecewise_linear(rpm.sample_fbm(0.5, 32, 1), 0.0, 1 / 32, gamma=0.4)
        b = rpm.lift_piecewise_linear(rpm.sample_fbm(0.5, 32, 2), 0.0, 1 / 32, gamma=0.4)
        assert rpm.rough_metric(a, b) == rpm.rough_metric(b, a)
        assert rpm.rough_metric(a, b) > 0

    def test_mismatched_grids_rejected(self):
        a = lift_linear(32)
        b = lift_linear(64)
        with pytest.raises(ValueError):
            rpm.rough_metric(a, b)

    def test_nested_lifts_agree_on_common_grid(self):
        # scalar canonical lifts carry the geometric second level X^2/2, so
        # nested samples restrict to the identical rough path on a coarse grid
        n_fine = 256
        xs = rpm.sample_fbm(0.5, n_fine, seed=13)
        coarse = rpm.lift_piecewise_linear(xs[::4], 0.0, 4 / n_fine, gamma=0.4)
        fine = rpm.lift_piecewise_linear(xs, 0.0, 1 / n_fine, gamma=0.4)
        assert rpm.rough_metric(coarse, rpm.coarsen(fine, 4)) <= 1e-12

    def test_dyadic_lifts_form_cauchy_sequence(self):
        # lifts of dyadic piecewise-linear interpolants of one fBm sample
        # converge to the full-resolution lift in the gamma' metric, gamma' < H
        n_fine = 512
        xs = rpm.sample_fbm(0.5, n_fine, seed=13)
        t_fine = np.arange(n_fine + 1) / n_fine
        fine = rpm.lift_piecewise_linear(xs, 0.0, 1 / n_fine, gamma=0.35)
        dists = []
        for n in (32, 64, 128, 256):
            k = n_fine // n
            t_coarse = np.arange(n + 1) * k / n_fine
            interp = np.interp(t_fine, t_coarse, xs[::k])
            approx = rpm.lift_piecewise_linear(interp, 0.0, 1 / n_fine, gamma=0.35)
            dists.append(rpm.rough_metric(approx, fine))
        assert all(b < a for a, b in zip(dists, dists[1:]))


class TestShift:
    def test_zero_shift_is_identity(self):
        rp = lift_linear(16)
        sh = rpm.shift(rp, 0.0)
        assert np.array_equal(sh.x, rp.x) and np.array_equal(sh.xx, rp.xx)

    def test_double_shift_composes(self):
        xs = rpm.sample_fbm(0.5, 64, seed=6)
        rp = rpm.lift_piecewise_linear(xs, 0.0, 1 / 16, gamma=0.4)
        once = rpm.shift(rpm.shift(rp, 0.25), 0.5)
        direct = rpm.shift(rp, 0.75)
        assert np.array_equal(once.x_raw, direct.x_raw)
        assert np.array_equal(once.xx, direct.xx)

    def test_shift_rezeroes(self):
        xs = rpm.sample_fbm(0.5, 32, seed=8)
        sh = rpm.shift(rpm.lift_piecewise_linear(xs, 0.0, 1 / 32, gamma=0.4), 0.5)
        assert sh.x[0] == 0.0

    def test_shift_beyond_horizon(self):
        rp = lift_linear(16)
        with pytest.raises(ValueError):
            rpm.shift(rp, 1.0)
        with pytest.raises(ValueError):
            rpm.shift(rp, 0.3)  # not a grid multiple


class TestSerialization:
    def test_round_trip(self, tmp_path):
        xs = rpm.sample_fbm(0.45, 48, seed=21)
        rp = rpm.lift_piecewise_linear(xs, 0.0, 1 / 48, gamma=0.4)
        path = tmp_path / "path.csv"
        rpm.save_csv(rp, str(path))
        back = rpm.load_csv(str(path), gamma=0.4)
        assert np.array_equal(back.x, rp.x)
        assert np.array_equal(back.xx, rp.xx)
        path2 = tmp_path / "again.csv"
        rpm.save_csv(back, str(path2))
        assert path.read_bytes() == path2.read_bytes()

    def test_header_schema(self, tmp_path):
        rp = lift_linear(4)
        path = tmp_path / "p.csv"
        rpm.save_csv(rp, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x,xx_cell"
        assert lines[-1].endswith(",")  # last row has an empty cell column
