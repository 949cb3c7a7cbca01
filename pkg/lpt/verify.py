"""
Self-checks for the numerical core: reverse-mode gradients against central
differences, Langevin stationarity, and the linear-Gaussian oracles.

Each check returns a CheckResult; ``run_suite`` groups them the way the
``lpt verify`` command reports them.
"""
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
import torch

from lpt import config
from lpt.config import LangevinConfig, ModelConfig
from lpt.envs.lingauss import LinearGaussianSpec, gen_linear_gaussian_dataset, random_spec
from lpt.errors import ValidationError
from lpt.model import LatentPlanTransformer, Trajectory, randomize_prior_output
from lpt.numerics import (
    RngStream,
    finite_diff_check,
    gaussian_sample,
    grad,
    logpdf_normal,
    normal_logpdf_terms,
    numeric_grad,
)
from lpt.sampler import (
    gaussian_oracle_solve,
    langevin_step,
    linear_gaussian_log_marginal,
    sample_plan,
    sample_posterior,
)
from lpt.trainer import estimate_learning_gradient

SUITES = ("gradcheck", "langevin", "oracle", "all")
CORRUPTION = 0.1

# Oracle Configuration
POSTERIOR_INSTANCES = 5
POSTERIOR_CHAINS = 8_000
POSTERIOR_SAMPLER = LangevinConfig(step_size=0.05, num_steps=500)
POSTERIOR_MEAN_TOLERANCE = 0.05
POSTERIOR_COV_TOLERANCE = 0.10
GUIDANCE_WEIGHTS = (0.5, 1.0, 2.0, 4.0, 8.0)
GUIDANCE_CHAINS = 10_000
GUIDANCE_TOLERANCE = 0.10
GRADIENT_INSTANCES = 10
GRADIENT_SAMPLES = 10_000
GRADIENT_TOLERANCE = 1e-2
SCALING_SAMPLES = (2_000, 8_000)
SCALING_REPEATS = 16
SCALING_RANGE = (0.35, 0.65)

# Langevin Configuration
STATIONARY_CHAINS = 20_000
STATIONARY_TOLERANCE = 0.05


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    seconds: float

    def to_dict(self) -> dict:
        return asdict(self)


def _timed(name: str, fn: Callable[[], float], threshold: float, lower: float | None = None) -> CheckResult:
    start = time.perf_counter()
    value = float(fn())
    passed = bool(np.isfinite(value) and value <= threshold and (lower is None or value >= lower))
    return CheckResult(name, passed, value, threshold, time.perf_counter() - start)


def _corrupted(name: str, corrupt_op: str | None) -> bool:
    return corrupt_op is not None and corrupt_op in (name, name.split("[")[0])


def _perturb(analytic, corrupt: bool):
    analytic = [a.detach().clone() for a in analytic]
    if corrupt:
        analytic[0].view(-1)[0] += CORRUPTION
    return analytic


# ---------------------------------------------------------------------------
# Gradient checks
# ---------------------------------------------------------------------------


def _gradcheck_config(**overrides) -> ModelConfig:
    values = dict(
        state_dim=3,
        action_dim=2,
        latent_dim=8,
        context_length=3,
        num_layers=1,
        num_heads=2,
        hidden_width=8,
        return_hidden=8,
        latent_tokens=2,
        unet_base_width=4,
        unet_multipliers=(1, 2),
        activation="gelu",
    )
    values.update(overrides)
    return ModelConfig(**values)


def _random_trajectories(cfg: ModelConfig, rng: np.random.Generator, n: int = 2, length: int = 4):
    trajs = []
    for _ in range(n):
        states = rng.normal(size=(length, cfg.state_dim))
        if cfg.discrete_actions:
            actions = rng.integers(0, cfg.action_dim, size=length)
        else:
            actions = rng.normal(size=(length, cfg.action_dim))
        trajs.append(Trajectory(states, actions))
    return trajs


def _check_function(name, f, inputs, corrupt_op, analytic=None) -> CheckResult:
    def run():
        a = analytic if analytic is not None else grad(f, *inputs)
        return finite_diff_check(f, inputs, config.FINITE_DIFF_EPSILON, _perturb(a, _corrupted(name, corrupt_op)))

    return _timed(name, run, config.GRADCHECK_TOLERANCE)


def _check_parameters(name, params, loss_fn, corrupt_op) -> CheckResult:
    """Gradient of ``loss_fn()`` w.r.t. a group of module parameters."""

    def run():
        analytic = torch.autograd.grad(loss_fn(), params)
        originals = [p.detach().clone() for p in params]

        def f(*values):
            with torch.no_grad():
                for p, v in zip(params, values):
                    p.copy_(v)
                return loss_fn()

        try:
            numeric = numeric_grad(f, originals, config.FINITE_DIFF_EPSILON)
        finally:
            with torch.no_grad():
                for p, v in zip(params, originals):
                    p.copy_(v)
        worst = 0.0
        for a, n in zip(_perturb(analytic, _corrupted(name, corrupt_op)), numeric):
            err = (a.reshape(-1) - n.reshape(-1)).abs() / n.reshape(-1).abs().clamp(min=1.0)
            worst = max(worst, float(err.max()))
        return worst

    return _timed(name, run, config.GRADCHECK_TOLERANCE)


def check_gradients(seed: int = 0, corrupt_op: str | None = None) -> list[CheckResult]:
    """Every differentiable building block against central differences (float64, eps = 1e-6)."""
    rng = RngStream.derive(seed, "gradcheck")
    gen = rng.numpy
    torch.manual_seed(seed)
    results = []

    x = gaussian_sample([5], rng)
    mean = gaussian_sample([5], rng)
    results.append(_check_function("logpdf_normal", lambda x_: logpdf_normal(x_, mean, 0.7), [x], corrupt_op))

    for prior in ("unet", "mlp"):
        model = LatentPlanTransformer(_gradcheck_config(prior_type=prior))
        randomize_prior_output(model, scale=0.3, seed=seed)
        z0 = gaussian_sample([2, model.latent_dim], rng)
        results.append(
            _check_function(
                f"prior_transform[{prior}]", lambda z0_: (model.prior_transform(z0_) ** 2).sum(), [z0], corrupt_op
            )
        )

    model = LatentPlanTransformer(_gradcheck_config())
    randomize_prior_output(model, scale=0.3, seed=seed)
    trajs = _random_trajectories(model.cfg, gen)
    windows = model.windows_for(trajs)
    y = gaussian_sample([2], rng)
    z0 = gaussian_sample([2, model.latent_dim], rng)
    results.append(
        _check_function(
            "traj_loglik[continuous]", lambda z_: model.traj_loglik(windows, z_).sum(), [z0], corrupt_op
        )
    )
    results.append(_check_function("return_loglik", lambda z_: model.return_loglik(y, z_).sum(), [z0], corrupt_op))
    results.append(
        _check_function(
            "posterior_score",
            lambda z_: model.log_joint(z_, windows, y).sum(),
            [z0],
            corrupt_op,
            analytic=[model.posterior_score(z0, windows, y)],
        )
    )
    w = 2.0

    def plan_objective(z_):
        prior = normal_logpdf_terms(z_, torch.zeros_like(z_), 1.0).sum()
        return prior + w * model.return_loglik(y, model.prior_transform(z_)).sum()

    results.append(
        _check_function("plan_score", plan_objective, [z0], corrupt_op, analytic=[model.plan_score(z0, y, w)])
    )

    discrete = LatentPlanTransformer(_gradcheck_config(discrete_actions=True, action_dim=5))
    d_windows = discrete.windows_for(_random_trajectories(discrete.cfg, gen))
    results.append(
        _check_function(
            "traj_loglik[discrete]", lambda z_: discrete.traj_loglik(d_windows, z_).sum(), [z0], corrupt_op
        )
    )

    def learning_loss():
        z = model.prior_transform(z0)
        return -(model.traj_loglik(windows, z) + model.return_loglik(y, z)).sum()

    for group, params in model.parameter_groups().items():
        results.append(_check_parameters(f"parameters[{group}]", params, learning_loss, corrupt_op))
    return results


# ---------------------------------------------------------------------------
# Langevin checks
# ---------------------------------------------------------------------------


def check_langevin(seed: int = 0, chains: int = STATIONARY_CHAINS) -> list[CheckResult]:
    """ULA on N(0, I) settles at variance 1 / (1 - s/2); planning with w = 0 must too."""
    results = []

    def ula_variance():
        cfg = LangevinConfig(step_size=0.1, num_steps=200)
        rng = RngStream.derive(seed, "verify-ula")
        z = torch.zeros(chains, dtype=config.DTYPE)
        for _ in range(cfg.num_steps):
            z = langevin_step(z, -z, cfg, rng)
        expected = 1.0 / (1.0 - cfg.step_size / 2.0)
        return abs(float(z.var()) - expected) / expected

    results.append(_timed("ula_stationary_variance", ula_variance, STATIONARY_TOLERANCE))

    torch.manual_seed(seed)
    model = LatentPlanTransformer(_gradcheck_config(latent_dim=4, unet_multipliers=(1,)))
    randomize_prior_output(model, scale=0.3, seed=seed)
    cfg = LangevinConfig(step_size=0.3, num_steps=64, guidance_weight=0.0)
    samples = {}

    def plan_samples():
        if "z" not in samples:
            samples["z"] = sample_plan(model, 1.0, cfg, RngStream.derive(seed, "verify-plan-w0"), num_chains=chains)
        return samples["z"]

    def plan_variance():
        expected = 1.0 / (1.0 - cfg.step_size / 2.0)
        return float(((plan_samples().var(0) - expected).abs() / expected).max())

    results.append(_timed("plan_w0_variance", plan_variance, STATIONARY_TOLERANCE))
    results.append(_timed("plan_w0_mean", lambda: float(plan_samples().mean(0).abs().max()), 0.05))

    def plan_matches_posterior():
        z0 = gaussian_sample([3, model.latent_dim], RngStream.derive(seed, "verify-w1"))
        y = torch.tensor([0.5, -1.0, 2.0], dtype=config.DTYPE)
        return float((model.plan_score(z0, y, 1.0) - model.posterior_score(z0, None, y)).abs().max())

    results.append(_timed("plan_w1_equals_return_posterior", plan_matches_posterior, 0.0))
    return results


# ---------------------------------------------------------------------------
# Linear-Gaussian oracles
# ---------------------------------------------------------------------------


def _posterior_instance(seed: int, index: int):
    spec = random_spec(4, 2, 3, RngStream.derive(seed, "oracle-spec", index).numpy)
    data = gen_linear_gaussian_dataset(spec, 1, seed + index)
    return spec, data.trajectories[0], float(data.returns[0])


def check_posterior_oracle(
    seed: int = 0,
    instances: int = POSTERIOR_INSTANCES,
    chains: int = POSTERIOR_CHAINS,
    sampler: LangevinConfig = POSTERIOR_SAMPLER,
) -> list[CheckResult]:
    """Langevin draws of p(z0 | tau, y) against the exact Gaussian posterior."""
    results = []
    for i in range(instances):
        spec, traj, y = _posterior_instance(seed, i)
        model = LatentPlanTransformer.from_linear_gaussian(spec)
        oracle = gaussian_oracle_solve(spec, traj.actions, y)
        windows = model.windows_for([traj]).repeat(chains)
        y_b = torch.full((chains,), y, dtype=config.DTYPE)
        rng = RngStream.derive(seed, "oracle-chains", i)
        init = gaussian_sample([chains, spec.latent_dim], rng)
        start = time.perf_counter()
        z0 = sample_posterior(model, windows, y_b, sampler, init, rng)
        elapsed = time.perf_counter() - start
        mean_err = float((z0.mean(0) - oracle.mean).abs().max())
        cov = torch.cov(z0.T)
        cov_err = float(torch.linalg.norm(cov - oracle.covariance) / torch.linalg.norm(oracle.covariance))
        mean_ok, cov_ok = mean_err <= POSTERIOR_MEAN_TOLERANCE, cov_err <= POSTERIOR_COV_TOLERANCE
        results.append(CheckResult(f"posterior_mean[{i}]", mean_ok, mean_err, POSTERIOR_MEAN_TOLERANCE, elapsed))
        results.append(CheckResult(f"posterior_cov[{i}]", cov_ok, cov_err, POSTERIOR_COV_TOLERANCE, 0.0))
    return results


def sharpening_spec() -> LinearGaussianSpec:
    return LinearGaussianSpec(
        W=np.zeros((1, 4)),
        c=np.zeros(1),
        a=np.array([0.5, -0.3, 0.2, 0.4]),
        b=0.0,
        sigma2=1.0,
        horizon=1,
    )


def check_guidance_sharpening(
    seed: int = 0,
    weights=GUIDANCE_WEIGHTS,
    chains: int = GUIDANCE_CHAINS,
    y: float = 1.0,
) -> list[CheckResult]:
    """Variance along a under plan_score(., y, w) against 1 / (1 + w |a|^2 / sigma^2), non-increasing in w."""
    spec = sharpening_spec()
    model = LatentPlanTransformer.from_linear_gaussian(spec)
    direction = torch.as_tensor(spec.a, dtype=config.DTYPE)
    direction = direction / direction.norm()
    results, variances = [], []
    for w in weights:
        cfg = LangevinConfig(step_size=0.01, num_steps=1000, guidance_weight=w)
        start = time.perf_counter()
        z0 = sample_plan(model, y, cfg, RngStream.derive(seed, "sharpening", int(w * 1000)), num_chains=chains)
        var = float((z0 @ direction).var())
        oracle = gaussian_oracle_solve(spec, None, y, guidance_weight=w)
        expected = float(direction @ oracle.covariance @ direction)
        err = abs(var - expected) / expected
        variances.append(var)
        results.append(
            CheckResult(
                f"guidance_variance[w={w:g}]",
                err <= GUIDANCE_TOLERANCE,
                err,
                GUIDANCE_TOLERANCE,
                time.perf_counter() - start,
            )
        )
    increases = max((b - a for a, b in zip(variances, variances[1:])), default=0.0)
    results.append(CheckResult("guidance_monotone", increases <= 0.0, increases, 0.0, 0.0))
    return results


def _gradient_instance(seed: int, index: int):
    """Random linear-Gaussian model with an observation offset so the gradient stays well away from zero."""
    gen = RngStream.derive(seed, "identity-spec", index).numpy
    spec = random_spec(4, 2, 3, gen)
    actions = spec.c + gen.normal(1.5, 1.0, size=(spec.horizon, spec.action_dim))
    y = spec.b + gen.normal(2.0, 1.0)
    return spec, actions, float(y)


def _learning_gradient_error(spec, actions, y, n_samples: int, rng: RngStream, corrupt: bool = False) -> float:
    """||MC estimate - exact gradient of log p(tau, y)|| / max(1, ||exact||) over (W, c, a, b)."""
    model = LatentPlanTransformer.from_linear_gaussian(spec)
    windows = model.windows_for([Trajectory(np.zeros((len(actions), 1)), actions)])
    samples = gaussian_oracle_solve(spec, actions, y).sample(n_samples, rng, antithetic=True)
    est = estimate_learning_gradient(model, windows, y, samples)
    names = ["generator.linear.weight", "generator.linear.bias", "return_head.net.weight", "return_head.net.bias"]
    params = dict(model.named_parameters())

    def log_marginal(w_mat, c, a, b):
        return linear_gaussian_log_marginal(LinearGaussianSpec(w_mat, c, a, b, spec.sigma2), actions, y)

    exact = numeric_grad(log_marginal, [params[n].detach() for n in names], config.FINITE_DIFF_EPSILON)
    est_vec = torch.cat([est[n].reshape(-1) for n in names])
    exact_vec = torch.cat([e.reshape(-1) for e in exact])
    if corrupt:
        # offset relative to the gradient norm
        est_vec[0] += CORRUPTION * float(exact_vec.norm().clamp(min=1.0))
    return float((est_vec - exact_vec).norm() / exact_vec.norm().clamp(min=1.0))


def check_gradient_identity(
    seed: int = 0,
    instances: int = GRADIENT_INSTANCES,
    n_samples: int = GRADIENT_SAMPLES,
    corrupt_op: str | None = None,
) -> list[CheckResult]:
    """Mean over exact posterior draws of grad_theta log p(tau, y | z) equals grad_theta log p(tau, y)."""
    results = []
    for i in range(instances):
        name = f"gradient_identity[{i}]"
        spec, actions, y = _gradient_instance(seed, i)
        rng = RngStream.derive(seed, "identity-samples", i)
        corrupt = _corrupted(name, corrupt_op)
        results.append(
            _timed(
                name, lambda: _learning_gradient_error(spec, actions, y, n_samples, rng, corrupt), GRADIENT_TOLERANCE
            )
        )
    return results


def check_gradient_scaling(seed: int = 0, repeats: int = SCALING_REPEATS) -> CheckResult:
    """RMS estimator error shrinks like 1 / sqrt(S): quadrupling S roughly halves it."""

    def ratio():
        spec, actions, y = _gradient_instance(seed, 0)
        rms = []
        for n in SCALING_SAMPLES:
            errors = [
                _learning_gradient_error(spec, actions, y, n, RngStream.derive(seed, f"scaling-{n}", r))
                for r in range(repeats)
            ]
            rms.append(float(np.sqrt(np.mean(np.square(errors)))))
        return rms[1] / rms[0]

    return _timed("gradient_scaling", ratio, SCALING_RANGE[1], lower=SCALING_RANGE[0])


def check_oracles(seed: int = 0, corrupt_op: str | None = None) -> list[CheckResult]:
    results = check_posterior_oracle(seed)
    results += check_guidance_sharpening(seed)
    results += check_gradient_identity(seed, corrupt_op=corrupt_op)
    results.append(check_gradient_scaling(seed))
    return results


def run_suite(name: str = "all", seed: int = 0, corrupt_op: str | None = None) -> list[CheckResult]:
    """
    Run one verification suite.

    Args:
        name: "gradcheck", "langevin", "oracle" or "all"
        seed: Master seed for every random draw in the suite
        corrupt_op: Add a fixed offset to the analytic gradient of this check,
            to confirm the harness catches a broken operation

    Returns:
        One CheckResult per check, in run order
    """
    if name not in SUITES:
        raise ValidationError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    results = []
    if name in ("gradcheck", "all"):
        results += check_gradients(seed, corrupt_op)
    if name in ("langevin", "all"):
        results += check_langevin(seed)
    if name in ("oracle", "all"):
        results += check_oracles(seed, corrupt_op)
    return results
