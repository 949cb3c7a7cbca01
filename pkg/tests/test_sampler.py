"""
Tests for Langevin sampling, persistent chains and the linear-Gaussian oracle
"""
import numpy as np
import pytest
import torch
from pydantic import ValidationError as PydanticValidationError

from lpt.config import LangevinConfig
from lpt.envs.lingauss import LinearGaussianSpec, gen_linear_gaussian_dataset
from lpt.errors import DomainError, ValidationError
from lpt.model import LatentPlanTransformer
from lpt.numerics import RngStream, gaussian_sample, logpdf_normal
from lpt.sampler import (
    ChainStore,
    gaussian_oracle_solve,
    langevin_step,
    linear_gaussian_log_marginal,
    pmc_get_init,
    pmc_update,
    sample_plan,
    sample_posterior,
)


def test_langevin_step_fixed_point():
    """Zero score without noise leaves z unchanged"""
    cfg = LangevinConfig(step_size=0.1, noise_scale=0)
    z = torch.tensor([0.4, -2.0], dtype=torch.float64)
    assert torch.equal(langevin_step(z, torch.zeros_like(z), cfg, RngStream(0)), z)


def test_langevin_step_standard_normal():
    """One noiseless step on N(0, 1) from z=1 with s=0.1 lands at 0.9"""
    cfg = LangevinConfig(step_size=0.1, noise_scale=0)
    z = torch.tensor([1.0], dtype=torch.float64)
    assert float(langevin_step(z, -z, cfg, RngStream(0))) == pytest.approx(0.9)


def test_langevin_step_shape_mismatch():
    cfg = LangevinConfig(step_size=0.1)
    with pytest.raises(ValidationError):
        langevin_step(torch.zeros(3, dtype=torch.float64), torch.zeros(2, dtype=torch.float64), cfg, RngStream(0))


def test_zero_steps_rejected():
    with pytest.raises(PydanticValidationError):
        LangevinConfig(num_steps=0)


def test_sample_posterior_single_step_prior_free(small_model, small_cfg):
    """N=1 without noise and with a flat likelihood moves init by -s z0"""
    cfg = LangevinConfig(step_size=0.2, num_steps=1, noise_scale=0)
    init = torch.randn(small_cfg.latent_dim, dtype=torch.float64)
    out = sample_posterior(small_model, None, None, cfg, init, RngStream(0))
    assert torch.allclose(out, 0.8 * init)


def test_sample_posterior_deterministic(small_model, small_cfg, random_trajectories):
    """Fixed seed and init give bit-identical chains"""
    windows = small_model.windows_for(random_trajectories)
    y = torch.tensor([0.1, 0.5, -0.2], dtype=torch.float64)
    init = gaussian_sample([3, small_cfg.latent_dim], RngStream(1))
    cfg = LangevinConfig(step_size=0.1, num_steps=5)
    first = sample_posterior(small_model, windows, y, cfg, init, RngStream(9, 2))
    second = sample_posterior(small_model, windows, y, cfg, init, RngStream(9, 2))
    assert torch.equal(first, second)
    assert not torch.equal(first, init)


def test_sample_posterior_chain_count_mismatch(small_model, small_cfg, random_trajectories):
    windows = small_model.windows_for(random_trajectories)
    init = torch.zeros(2, small_cfg.latent_dim, dtype=torch.float64)
    with pytest.raises(ValidationError):
        sample_posterior(small_model, windows, None, LangevinConfig(), init, RngStream(0))


def test_sample_posterior_trace(small_model, small_cfg):
    cfg = LangevinConfig(step_size=0.1, num_steps=4)
    init = torch.zeros(small_cfg.latent_dim, dtype=torch.float64)
    z0, trace = sample_posterior(small_model, None, None, cfg, init, RngStream(0), return_trace=True)
    assert z0.shape == (small_cfg.latent_dim,)
    assert len(trace) == 4


def test_sample_plan_rejects_non_finite_target(small_model):
    with pytest.raises(ValidationError):
        sample_plan(small_model, float("nan"), LangevinConfig(), RngStream(0))


def test_linear_gaussian_posterior_moments(lingauss_spec):
    """Langevin draws match the exact posterior of a small linear-Gaussian instance"""
    data = gen_linear_gaussian_dataset(lingauss_spec, 1, seed=4)
    traj, y = data.trajectories[0], float(data.returns[0])
    model = LatentPlanTransformer.from_linear_gaussian(lingauss_spec)
    oracle = gaussian_oracle_solve(lingauss_spec, traj.actions, y)
    chains = 2000
    windows = model.windows_for([traj]).repeat(chains)
    rng = RngStream(11)
    init = gaussian_sample([chains, lingauss_spec.latent_dim], rng)
    cfg = LangevinConfig(step_size=0.05, num_steps=500)
    z0 = sample_posterior(model, windows, torch.full((chains,), y, dtype=torch.float64), cfg, init, rng)

    mean_err = float((z0.mean(0) - oracle.mean).abs().max())
    cov_err = float(torch.linalg.norm(torch.cov(z0.T) - oracle.covariance) / torch.linalg.norm(oracle.covariance))
    assert mean_err <= 0.05, f"mean error {mean_err:.3f}"
    assert cov_err <= 0.1, f"covariance error {cov_err:.3f}"
    print(f"✓ Posterior moments: mean err {mean_err:.3f}, cov err {cov_err:.3f}")


@pytest.mark.slow
def test_plan_without_guidance_is_stationary_prior(small_model, small_cfg):
    """w=0 samples have mean near 0 and the ULA variance 1 / (1 - s/2)"""
    s = 0.3
    cfg = LangevinConfig(step_size=s, num_steps=64, guidance_weight=0.0)
    z0 = sample_plan(small_model, 1.0, cfg, RngStream(3), num_chains=10_000)
    assert float(z0.mean(0).abs().max()) <= 0.05
    target = 1.0 / (1.0 - s / 2.0)
    assert float((z0.var(0) / target - 1.0).abs().max()) <= 0.05


@pytest.mark.slow
def test_plan_matches_return_posterior(lingauss_spec):
    """w=1 planning matches N((I + aa'/s2)^-1 a (y - b) / s2, (I + aa'/s2)^-1)"""
    model = LatentPlanTransformer.from_linear_gaussian(lingauss_spec)
    y = 1.5
    oracle = gaussian_oracle_solve(lingauss_spec, None, y)
    cfg = LangevinConfig(step_size=0.05, num_steps=500, guidance_weight=1.0)
    z0 = sample_plan(model, y, cfg, RngStream(5), num_chains=4000)
    assert float((z0.mean(0) - oracle.mean).abs().max()) <= 0.05
    cov_err = torch.linalg.norm(torch.cov(z0.T) - oracle.covariance) / torch.linalg.norm(oracle.covariance)
    assert float(cov_err) <= 0.1


def test_chain_store_examples():
    """Repeat touches agree, updates stick, distinct indices draw independently"""
    store = ChainStore(10, 4, master_seed=0)
    first = pmc_get_init(store, 5)
    assert torch.equal(first, pmc_get_init(store, 5))
    assert not torch.equal(first, pmc_get_init(store, 6))

    new = torch.arange(4, dtype=torch.float64)
    pmc_update(store, 5, new)
    assert torch.equal(pmc_get_init(store, 5), new)
    assert len(store) == 2


def test_chain_store_is_order_independent():
    a, b = ChainStore(10, 4, master_seed=3), ChainStore(10, 4, master_seed=3)
    a.get_init(1)
    assert torch.equal(a.get_init(7), b.get_init(7))


def test_chain_store_errors_and_state():
    store = ChainStore(3, 2, master_seed=1)
    with pytest.raises(ValidationError):
        store.get_init(3)
    with pytest.raises(ValidationError):
        store.update(0, torch.zeros(3, dtype=torch.float64))
    store.update_batch([0, 2], torch.ones(2, 2, dtype=torch.float64))
    restored = ChainStore.from_state_dict(store.state_dict())
    assert torch.equal(restored.get_batch([0, 2]), store.get_batch([0, 2]))


def test_oracle_prior_only():
    """W=0, a=0 leaves the prior unchanged"""
    spec = LinearGaussianSpec(W=np.zeros((2, 3)), c=np.zeros(2), a=np.zeros(3), b=0.0, sigma2=1.0)
    oracle = gaussian_oracle_solve(spec, np.ones((3, 2)), 1.0)
    assert torch.allclose(oracle.precision, torch.eye(3, dtype=torch.float64))
    assert torch.allclose(oracle.mean, torch.zeros(3, dtype=torch.float64))


def test_oracle_scalar_conjugacy():
    """d=1, W=0, a=1, b=0, sigma2=1, y=2 gives precision 2 and mean 1"""
    spec = LinearGaussianSpec(W=np.zeros((1, 1)), c=np.zeros(1), a=np.ones(1), b=0.0, sigma2=1.0)
    oracle = gaussian_oracle_solve(spec, np.zeros((1, 1)), 2.0)
    assert float(oracle.precision[0, 0]) == pytest.approx(2.0)
    assert float(oracle.mean[0]) == pytest.approx(1.0)


def test_oracle_solve_residual(lingauss_spec):
    actions = np.random.default_rng(0).normal(size=(3, 2))
    oracle = gaussian_oracle_solve(lingauss_spec, actions, 0.4)
    w = torch.as_tensor(lingauss_spec.W)
    a = torch.as_tensor(lingauss_spec.a)
    rhs = w.T @ (torch.as_tensor(actions) - torch.as_tensor(lingauss_spec.c)).sum(0)
    rhs = rhs + a * (0.4 - lingauss_spec.b) / lingauss_spec.sigma2
    assert float((oracle.precision @ oracle.mean - rhs).abs().max()) <= 1e-10


def test_oracle_antithetic_sampling(lingauss_spec):
    oracle = gaussian_oracle_solve(lingauss_spec, None, 1.0)
    draws = oracle.sample(6, RngStream(0), antithetic=True)
    assert torch.allclose(draws[:3] + draws[3:], 2 * oracle.mean.expand(3, -1))
    with pytest.raises(ValidationError):
        oracle.sample(5, RngStream(0), antithetic=True)


def test_log_marginal_matches_scalar_case():
    """With W=0 the action and the return factorize; y ~ N(b, a^2 + sigma2)"""
    spec = LinearGaussianSpec(W=np.zeros((1, 1)), c=np.zeros(1), a=np.array([2.0]), b=0.5, sigma2=1.0, horizon=1)
    value = linear_gaussian_log_marginal(spec, np.zeros((1, 1)), 1.5)
    zero = torch.tensor(0.0, dtype=torch.float64)
    expected = logpdf_normal(zero, zero, 1.0) + logpdf_normal(torch.tensor(1.5, dtype=torch.float64), zero + 0.5, 5.0)
    assert float(value) == pytest.approx(float(expected), abs=1e-10)


def test_non_positive_variance_rejected():
    with pytest.raises(DomainError):
        LinearGaussianSpec(W=np.zeros((1, 1)), c=np.zeros(1), a=np.ones(1), b=0.0, sigma2=0.0)
