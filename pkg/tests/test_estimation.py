import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffusion_factor.errors import InsufficientDataError, InvalidInputError
from diffusion_factor.estimation import (
    METRIC_COLUMNS,
    DivisionDegenerateError,
    MomentEstimate,
    all_metrics,
    eigen_gap,
    re_cov,
    re_eigen,
    re_mean,
    re_subspace,
    sample_moments,
    top_k_subspace,
    write_metrics_csv,
)
from diffusion_factor.panel import ReturnPanel
from helpers import random_orthonormal, random_spd, rel_fro


def random_estimate(rng, d):
    return MomentEstimate(rng.normal(0.0, 1.0, d), random_spd(rng, d))


class TestSampleMoments:
    def test_hand(self):
        est = sample_moments(np.array([[0.0, 0.0], [2.0, 0.0]]))
        np.testing.assert_allclose(est.mean, [1.0, 0.0])
        np.testing.assert_allclose(est.cov, np.diag([2.0, 0.0]))
        assert est.n_used == 2 and est.source == "real_emp"

    def test_identical_rows(self):
        est = sample_moments(np.tile([1.0, 2.0, 3.0], (5, 1)))
        np.testing.assert_array_equal(est.cov, np.zeros((3, 3)))

    def test_lln(self):
        rng = np.random.default_rng(0)
        cov = random_spd(rng, 5)
        x = rng.multivariate_normal(np.zeros(5), cov, size=100_000)
        assert rel_fro(sample_moments(x).cov, cov) <= 0.03

    def test_accepts_panel(self):
        est = sample_moments(ReturnPanel(np.array([[1.0, 2.0], [3.0, 5.0]])), "diff_emp")
        assert est.source == "diff_emp"

    def test_one_row(self):
        with pytest.raises(InsufficientDataError):
            sample_moments(np.ones((1, 3)))

    def test_missing(self):
        with pytest.raises(InvalidInputError):
            sample_moments(np.array([[1.0, np.nan], [0.0, 1.0]]))

    def test_estimate_validation(self):
        with pytest.raises(InvalidInputError):
            MomentEstimate(np.zeros(2), np.eye(3))
        with pytest.raises(InvalidInputError):
            MomentEstimate(np.zeros(2), -np.eye(2))

    def test_with_replacements(self):
        est = MomentEstimate(np.zeros(2), np.eye(2), "real_emp", 10)
        assert est.with_mean(np.ones(2)).n_used == 10
        assert est.with_cov(2 * np.eye(2), "oracle").source == "oracle"


class TestSubspace:
    def test_diagonal(self):
        sub = top_k_subspace(MomentEstimate(np.zeros(3), np.diag([3.0, 2.0, 1.0])), 2)
        np.testing.assert_allclose(sub.eigenvalues, [3.0, 2.0])
        np.testing.assert_allclose(sub.basis, np.eye(3)[:, :2], atol=1e-15)

    def test_repeated_top_projector_unique(self):
        cov = np.diag([2.0, 2.0, 1.0])
        rot = random_orthonormal(np.random.default_rng(0), 3, 3)
        a = top_k_subspace(cov, 2).projector
        b = top_k_subspace(rot @ cov @ rot.T, 2).projector
        np.testing.assert_allclose(rot @ a @ rot.T, b, atol=1e-10)

    def test_spike_alignment(self):
        rng = np.random.default_rng(1)
        u = random_orthonormal(rng, 20, 1)
        noise = 1e-9 * random_spd(rng, 20)
        sub = top_k_subspace(100.0 * u @ u.T + noise, 1)
        cos = abs(float(sub.basis[:, 0] @ u[:, 0]))
        assert np.arccos(min(cos, 1.0)) < 1e-6

    @pytest.mark.parametrize("k", [0, 4])
    def test_invalid_k(self, k):
        with pytest.raises(InvalidInputError):
            top_k_subspace(np.eye(3), k)

    def test_eigen_gap(self):
        assert eigen_gap(np.diag([3.0, 2.0, 1.0]), 1) == pytest.approx(1.0)
        assert eigen_gap(np.eye(4), 2) == 0.0

    def test_eigen_gap_grows_with_spike(self):
        u = random_orthonormal(np.random.default_rng(2), 6, 1)
        gaps = [eigen_gap(s * u @ u.T + np.eye(6), 1) for s in (0.5, 1.0, 4.0)]
        assert gaps[0] < gaps[1] < gaps[2]

    def test_eigen_gap_invalid(self):
        with pytest.raises(InvalidInputError):
            eigen_gap(np.eye(3), 3)


class TestMetrics:
    def test_exact(self):
        est = random_estimate(np.random.default_rng(0), 5)
        assert all(v == pytest.approx(0.0, abs=1e-12) for v in all_metrics(est, est, 2).values())

    def test_eigen_hand(self):
        assert re_eigen([1.1 * 4.0, 0.9 * 2.0], [4.0, 2.0]) == pytest.approx(0.1)

    def test_subspace_hand(self):
        assert re_subspace(np.array([[0.0], [1.0]]), np.array([[1.0], [0.0]])) == pytest.approx(np.sqrt(2))

    def test_mean_and_cov(self):
        assert re_mean([1.0, 1.0], [1.0, 0.0]) == pytest.approx(1.0)
        assert re_cov(2 * np.eye(2), np.eye(2)) == pytest.approx(1.0)

    def test_zero_denominators(self):
        with pytest.raises(DivisionDegenerateError):
            re_mean([1.0], [0.0])
        with pytest.raises(DivisionDegenerateError):
            re_cov(np.eye(2), np.zeros((2, 2)))
        with pytest.raises(DivisionDegenerateError):
            re_eigen([1.0], [0.0])

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            re_eigen([1.0, 2.0], [1.0])
        with pytest.raises(InvalidInputError):
            re_subspace(np.eye(3)[:, :1], np.eye(3)[:, :2])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(3, 8))
    def test_basis_invariance(self, seed, d):
        rng = np.random.default_rng(seed)
        est, truth = random_estimate(rng, d), random_estimate(rng, d)
        k = int(rng.integers(1, d))
        o = random_orthonormal(rng, d, d)
        rot = lambda m: MomentEstimate(o @ m.mean, o @ m.cov @ o.T)  # noqa: E731
        a, b = all_metrics(est, truth, k), all_metrics(rot(est), rot(truth), k)
        for key in a:
            assert b[key] == pytest.approx(a[key], rel=1e-7, abs=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3))
    def test_scale_invariance(self, seed, c):
        rng = np.random.default_rng(seed)
        est, truth = random_estimate(rng, 5), random_estimate(rng, 5)
        scale = lambda m: MomentEstimate(c * m.mean, c * m.cov)  # noqa: E731
        a, b = all_metrics(est, truth, 2), all_metrics(scale(est), scale(truth), 2)
        for key in a:
            assert b[key] == pytest.approx(a[key], rel=1e-7, abs=1e-9)

    def test_subspace_ignores_basis_choice(self):
        rng = np.random.default_rng(3)
        u = random_orthonormal(rng, 6, 2)
        q = random_orthonormal(rng, 2, 2)
        v = random_orthonormal(rng, 6, 2)
        assert re_subspace(u @ q, v) == pytest.approx(re_subspace(u, v), rel=1e-12)

    def test_emp_consistency(self):
        rng = np.random.default_rng(4)
        cov = random_spd(rng, 4)
        truth = MomentEstimate(np.ones(4), cov)
        errs = []
        for n in (100, 10_000, 1_000_000):
            x = rng.multivariate_normal(truth.mean, cov, size=n)
            errs.append(all_metrics(sample_moments(x), truth, 2)["RE4"])
        assert errs[2] < errs[1] < errs[0] and errs[2] < 0.01

    def test_write_csv(self, tmp_path):
        rows = [{"N": 8, "metric": "RE1", "diff_value": 0.1, "emp_value": 0.2, "ratio": 0.5, "seed": 0}]
        path = tmp_path / "m.csv"
        write_metrics_csv(path, rows)
        with open(path) as fh:
            back = list(csv.reader(fh))
        assert back[0] == METRIC_COLUMNS and back[1] == ["8", "RE1", "0.1", "0.2", "0.5", "0"]
