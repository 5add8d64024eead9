import json

import numpy as np
import pytest

from diffusion_factor.diffusion import DiffusionSchedule, FactorModelSpec, PointMass, gaussian_score_fn, marginal_covariance
from diffusion_factor.errors import InvalidInputError, NumericalAbort
from diffusion_factor.panel import read_panel_csv
from diffusion_factor.sampler import (
    BLOCK_ROWS,
    SamplerConfig,
    appendix_d_spec,
    brownian_increments,
    reverse_sample,
    seed_key,
    simulate_panel,
    spec_hash,
    write_samples,
)
from helpers import random_gaussian_spec, rel_fro, well_conditioned_spec

SCHED = DiffusionSchedule(T=5.0, t0=0.01)


class TestSimulate:
    def test_near_degenerate_rows_in_span(self):
        spec = random_gaussian_spec(np.random.default_rng(0), 6, 2)
        spec = FactorModelSpec(spec.beta, spec.law, np.full(6, 1e-6))
        x = simulate_panel(spec, 200, 1).values
        resid = x - x @ spec.beta @ spec.beta.T
        assert np.max(np.linalg.norm(resid, axis=1)) < 1e-3

    def test_covariance_lln(self):
        spec = appendix_d_spec(10, 3, 0)
        x = simulate_panel(spec, 100_000, 1).values
        assert rel_fro(np.cov(x.T), spec.covariance()) <= 0.03

    def test_point_mass(self):
        spec = random_gaussian_spec(np.random.default_rng(1), 5, 2)
        f0 = np.array([1.0, -2.0])
        spec = FactorModelSpec(spec.beta, PointMass(f0), np.full(5, 1e-9))
        x = simulate_panel(spec, 10, 0).values
        np.testing.assert_allclose(x, np.tile(spec.beta @ f0, (10, 1)), atol=1e-7)

    def test_deterministic(self):
        spec = appendix_d_spec(5, 2, 3)
        a = simulate_panel(spec, 20, (4, 5)).values
        np.testing.assert_array_equal(a, simulate_panel(spec, 20, (4, 5)).values)
        assert not np.array_equal(a, simulate_panel(spec, 20, (4, 6)).values)

    def test_meta(self):
        spec = appendix_d_spec(5, 2, 3)
        panel = simulate_panel(spec, 3, 7)
        assert panel.meta == {"seed": [7], "spec_hash": spec_hash(spec)}
        assert spec_hash(appendix_d_spec(5, 2, 4)) != spec_hash(spec)

    def test_appendix_spec_ranges(self):
        spec = appendix_d_spec(50, 3, 0, sigma_max=0.4)
        assert np.all(spec.sigma <= 0.4) and np.all(np.diff(spec.sigma) <= 0)
        mu = spec.law.mean
        assert np.all((mu >= 0) & (mu <= 0.1))
        np.testing.assert_allclose(np.sqrt(np.diag(spec.law.cov)), 1.5 * mu)

    def test_invalid_n(self):
        with pytest.raises(InvalidInputError):
            simulate_panel(appendix_d_spec(5, 2, 0), 0, 0)


class TestBrownian:
    def test_refinement_consistent(self):
        coarse = brownian_increments([1, 2], 3, 2, 12, 0.1)
        fine = brownian_increments([1, 2], 3, 2, 24, 0.05)
        np.testing.assert_allclose(fine[0::2] + fine[1::2], coarse, atol=1e-14)

    def test_variance(self):
        inc = brownian_increments([0], 2000, 4, 40, 0.01)
        assert inc.var() == pytest.approx(0.01, rel=0.02)
        assert abs(np.corrcoef(inc[0::2].ravel(), inc[1::2].ravel())[0, 1]) < 0.01

    @pytest.mark.parametrize("seed, key", [(3, [3]), ((1, 2), [1, 2]), (np.int64(5), [5])])
    def test_seed_key(self, seed, key):
        assert seed_key(seed) == key


class TestReverseSample:
    def test_standard_normal_stationary(self):
        cfg = SamplerConfig(steps=100, m=20_000, seed=0)
        x = reverse_sample(lambda r, t: -r, SCHED, cfg, 4).values
        assert rel_fro(np.cov(x.T), np.eye(4)) <= 0.10

    def test_general_covariance(self):
        spec = well_conditioned_spec(np.random.default_rng(0))
        cfg = SamplerConfig(steps=200, m=10_000, seed=1)
        x = reverse_sample(gaussian_score_fn(spec, SCHED), SCHED, cfg, 8).values
        assert rel_fro(np.cov(x.T), marginal_covariance(spec, SCHED, SCHED.t0)) <= 0.10

    def test_refinement_non_increasing(self):
        spec = well_conditioned_spec(np.random.default_rng(1))
        target = marginal_covariance(spec, SCHED, SCHED.t0)
        errs = []
        for steps in (25, 50, 100, 200):
            x = reverse_sample(gaussian_score_fn(spec, SCHED), SCHED, SamplerConfig(steps, m=5000, seed=2), 8).values
            errs.append(rel_fro(np.cov(x.T), target))
        assert all(b <= a for a, b in zip(errs, errs[1:])), errs

    def test_deterministic_and_block_stable(self):
        score = lambda r, t: -r  # noqa: E731
        a = reverse_sample(score, SCHED, SamplerConfig(20, m=300, seed=(4, 2)), 3)
        b = reverse_sample(score, SCHED, SamplerConfig(20, m=300, seed=(4, 2)), 3)
        c = reverse_sample(score, SCHED, SamplerConfig(20, m=600, seed=(4, 2)), 3)
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.values[:BLOCK_ROWS], c.values[:BLOCK_ROWS])
        assert a.meta["seed"] == [4, 2] and a.meta["steps"] == 20

    def test_footnote_mode_runs(self):
        cfg = SamplerConfig(steps=200, mode="ddpm_footnote", m=2000, seed=0)
        x = reverse_sample(lambda r, t: -r, SCHED, cfg, 3).values
        assert np.all(np.isfinite(x))

    def test_non_finite_score_aborts(self):
        with pytest.raises(NumericalAbort):
            reverse_sample(lambda r, t: r * np.nan, SCHED, SamplerConfig(10, m=4), 2)

    @pytest.mark.parametrize("kw", [{"steps": 1}, {"m": 0}, {"mode": "ode"}])
    def test_config_validation(self, kw):
        with pytest.raises(InvalidInputError):
            SamplerConfig(**kw)

    def test_write_samples(self, tmp_path):
        panel = reverse_sample(lambda r, t: -r, SCHED, SamplerConfig(10, m=5), 2)
        path = tmp_path / "s.csv"
        write_samples(path, panel, {"seed": 0})
        back = read_panel_csv(path)
        np.testing.assert_array_equal(back.values, panel.values)
        assert json.loads((tmp_path / "s.csv.json").read_text()) == {"seed": 0}
