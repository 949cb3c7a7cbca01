"""
Langevin dynamics over z0 for the training posterior p(z0 | tau, y) and the
planning posterior p(z0 | y), persistent chain storage, and the closed-form
linear-Gaussian oracle.
"""
import math
import threading
from dataclasses import dataclass

import numpy as np
import torch

from lpt import config
from lpt.config import LangevinConfig
from lpt.errors import DomainError, ValidationError
from lpt.model import ContextWindows, LatentPlanTransformer
from lpt.numerics import RngStream, ensure_finite, gaussian_sample


def langevin_step(z: torch.Tensor, score: torch.Tensor, cfg: LangevinConfig, rng: RngStream) -> torch.Tensor:
    """z + s * score + noise_scale * sqrt(2 s) * eps, eps ~ N(0, I)."""
    if z.shape != score.shape:
        raise ValidationError(f"z and score shapes differ: {tuple(z.shape)} vs {tuple(score.shape)}")
    out = z + cfg.step_size * score
    if cfg.noise_scale:
        noise = gaussian_sample(z.shape, rng, z.dtype) if z.dim() else gaussian_sample([1], rng, z.dtype)[0]
        out = out + cfg.noise_scale * math.sqrt(2.0 * cfg.step_size) * noise
    return out


def _run_chain(score_fn, init: torch.Tensor, cfg: LangevinConfig, rng: RngStream, return_trace: bool):
    z = init.detach().clone()
    trace = []
    for _ in range(cfg.num_steps):
        z = langevin_step(z, score_fn(z), cfg, rng).detach()
        if return_trace:
            trace.append(float(z.norm(dim=-1).mean()))
    ensure_finite(z, "Langevin chain state")
    if return_trace:
        return z, trace
    return z


def sample_posterior(
    model: LatentPlanTransformer,
    windows: ContextWindows | None,
    y: torch.Tensor | None,
    cfg: LangevinConfig,
    init: torch.Tensor,
    rng: RngStream,
    return_trace: bool = False,
):
    """
    Run N Langevin steps on z0 with score = posterior_score.

    Args:
        model: Parameter snapshot (not modified)
        windows: Context windows with ``n_owners`` equal to the number of chains
        y: Normalized returns, one per chain
        init: (B, d) or (d,) initial z0
        rng: Noise stream; one (B, d) draw per step
        return_trace: Also return the mean chain norm after every step

    Returns:
        Final z0, or (z0, trace) with ``return_trace``
    """
    if init.shape[-1] != model.latent_dim:
        raise ValidationError(f"init has dimension {init.shape[-1]}, model expects {model.latent_dim}")
    single = init.dim() == 1
    z_init = init.reshape(1, -1) if single else init
    y_b = None if y is None else torch.as_tensor(y, dtype=z_init.dtype).reshape(-1)
    if windows is not None and windows.n_owners != z_init.shape[0]:
        raise ValidationError(f"{windows.n_owners} trajectories for {z_init.shape[0]} chains")

    def score(z):
        return model.posterior_score(z, windows, y_b)

    out = _run_chain(score, z_init, cfg, rng, return_trace)
    if single:
        return (out[0][0], out[1]) if return_trace else out[0]
    return out


def sample_plan(
    model: LatentPlanTransformer,
    y: float | torch.Tensor,
    cfg: LangevinConfig,
    rng: RngStream,
    num_chains: int | None = None,
    return_trace: bool = False,
):
    """
    Planning as inference: z0 ~ N(0, I), then N steps with score = plan_score(., y, w).

    ``y`` is on the normalized return scale. With ``num_chains`` a (B, d)
    batch of independent plans for the same target is returned.
    """
    dtype = next(model.parameters()).dtype
    d = model.latent_dim
    shape = [d] if num_chains is None else [num_chains, d]
    init = gaussian_sample(shape, rng, dtype)
    y_t = torch.as_tensor(y, dtype=dtype)
    if not bool(torch.isfinite(y_t).all()):
        raise ValidationError(f"target return must be finite, got {y}")
    if num_chains is not None and y_t.dim() == 0:
        y_t = y_t.expand(num_chains)
    w = cfg.guidance_weight

    def score(z):
        return model.plan_score(z, y_t, w)

    return _run_chain(score, init, cfg, rng, return_trace)


class ChainStore:
    """
    Persistent Markov chain states, one z0 per training example.

    The first touch of an index draws N(0, I) from a stream derived from
    (master_seed, "chain-init", index), so initial states do not depend on the
    order in which examples are visited.
    """

    def __init__(self, n_examples: int, latent_dim: int, master_seed: int, dtype: torch.dtype = config.DTYPE):
        if n_examples < 1:
            raise ValidationError("a chain store needs at least one example")
        self.n_examples = n_examples
        self.latent_dim = latent_dim
        self.master_seed = master_seed
        self.dtype = dtype
        self._states: dict[int, torch.Tensor] = {}
        self._lock = threading.Lock()

    def _check(self, idx: int) -> int:
        idx = int(idx)
        if not 0 <= idx < self.n_examples:
            raise ValidationError(f"example index {idx} outside [0, {self.n_examples})")
        return idx

    def get_init(self, idx: int) -> torch.Tensor:
        idx = self._check(idx)
        with self._lock:
            if idx not in self._states:
                rng = RngStream.derive(self.master_seed, "chain-init", idx)
                self._states[idx] = gaussian_sample([self.latent_dim], rng, self.dtype)
            return self._states[idx].clone()

    def update(self, idx: int, z0: torch.Tensor) -> None:
        idx = self._check(idx)
        if z0.shape != (self.latent_dim,):
            raise ValidationError(f"chain state must have shape ({self.latent_dim},), got {tuple(z0.shape)}")
        with self._lock:
            self._states[idx] = z0.detach().clone().to(self.dtype)

    def get_batch(self, indices) -> torch.Tensor:
        return torch.stack([self.get_init(i) for i in indices])

    def update_batch(self, indices, z0: torch.Tensor) -> None:
        for row, idx in enumerate(indices):
            self.update(idx, z0[row])

    def __len__(self) -> int:
        return len(self._states)

    def state_dict(self) -> dict:
        with self._lock:
            keys = sorted(self._states)
            states = torch.stack([self._states[k] for k in keys]) if keys else torch.zeros(0, self.latent_dim)
            return {
                "n_examples": self.n_examples,
                "latent_dim": self.latent_dim,
                "master_seed": self.master_seed,
                "indices": torch.as_tensor(keys, dtype=torch.long),
                "states": states.to(self.dtype),
            }

    @classmethod
    def from_state_dict(cls, state: dict) -> "ChainStore":
        store = cls(int(state["n_examples"]), int(state["latent_dim"]), int(state["master_seed"]))
        for k, z in zip(state["indices"].tolist(), state["states"]):
            store._states[int(k)] = z.clone().to(store.dtype)
        return store


def pmc_get_init(store: ChainStore, idx: int) -> torch.Tensor:
    return store.get_init(idx)


def pmc_update(store: ChainStore, idx: int, z0: torch.Tensor) -> None:
    store.update(idx, z0)


# ---------------------------------------------------------------------------
# Linear-Gaussian oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianOracle:
    """N(mean, precision^-1) with a symmetric positive definite precision."""

    precision: torch.Tensor
    mean: torch.Tensor

    def __post_init__(self):
        p = self.precision
        if p.dim() != 2 or p.shape[0] != p.shape[1] or p.shape[0] != self.mean.shape[0]:
            raise ValidationError("precision must be (d, d) and mean (d,)")
        if not torch.allclose(p, p.T, atol=1e-12, rtol=0.0):
            raise DomainError("precision matrix is not symmetric")
        _, info = torch.linalg.cholesky_ex(p)
        if int(info) != 0:
            raise DomainError("precision matrix is not positive definite")

    @property
    def covariance(self) -> torch.Tensor:
        return torch.cholesky_inverse(torch.linalg.cholesky(self.precision))

    def sample(self, n: int, rng: RngStream, antithetic: bool = False) -> torch.Tensor:
        """(n, d) exact draws; antithetic pairs mean +/- L eps when requested (n must be even)."""
        scale = torch.linalg.cholesky(self.covariance)
        d = self.mean.shape[0]
        if antithetic:
            if n % 2:
                raise ValidationError("antithetic sampling needs an even number of draws")
            eps = gaussian_sample([n // 2, d], rng, self.mean.dtype)
            eps = torch.cat([eps, -eps])
        else:
            eps = gaussian_sample([n, d], rng, self.mean.dtype)
        return self.mean + eps @ scale.T


def _spec_tensors(spec, dtype=config.DTYPE):
    w = torch.as_tensor(spec.W, dtype=dtype)
    c = torch.as_tensor(spec.c, dtype=dtype)
    a = torch.as_tensor(spec.a, dtype=dtype).reshape(-1)
    b = torch.as_tensor(spec.b, dtype=dtype).reshape(())
    sigma2 = float(spec.sigma2)
    if sigma2 <= 0:
        raise DomainError(f"sigma2 must be > 0, got {sigma2}")
    return w, c, a, b, sigma2


def gaussian_oracle_solve(
    spec,
    actions: np.ndarray | torch.Tensor | None,
    y: float | None,
    guidance_weight: float = 1.0,
) -> GaussianOracle:
    """
    Closed-form posterior of z0 in the linear-Gaussian model.

    precision = I + T W'W + w a a' / sigma^2
    mean = precision^-1 (sum_t W'(a_t - c) + w a (y - b) / sigma^2)

    ``actions=None`` drops the trajectory terms (planning posterior), and
    ``y=None`` drops the return term.
    """
    w_mat, c, a, b, sigma2 = _spec_tensors(spec)
    d = w_mat.shape[1]
    precision = torch.eye(d, dtype=w_mat.dtype)
    rhs = torch.zeros(d, dtype=w_mat.dtype)
    if actions is not None:
        acts = torch.as_tensor(actions, dtype=w_mat.dtype).reshape(-1, w_mat.shape[0])
        precision = precision + acts.shape[0] * w_mat.T @ w_mat
        rhs = rhs + w_mat.T @ (acts - c).sum(0)
    if y is not None:
        precision = precision + guidance_weight * torch.outer(a, a) / sigma2
        rhs = rhs + guidance_weight * a * (float(y) - b) / sigma2
    precision = 0.5 * (precision + precision.T)
    mean = torch.linalg.solve(precision, rhs)
    return GaussianOracle(precision=precision, mean=mean)


def linear_gaussian_log_marginal(spec, actions, y) -> torch.Tensor:
    """
    Closed-form log p(a_1..a_T, y) with z integrated out.

    The stacked vector (a_1, ..., a_T, y) is Gaussian with mean (c, ..., c, b)
    and covariance M M' + diag(1, ..., 1, sigma^2), M = (W; ...; W; a').
    Differentiable in the spec tensors when they require grad.
    """
    w_mat, c, a, b, sigma2 = _spec_tensors(spec)
    acts = torch.as_tensor(actions, dtype=w_mat.dtype).reshape(-1, w_mat.shape[0])
    t = acts.shape[0]
    m = torch.cat([w_mat.repeat(t, 1), a.reshape(1, -1)])
    noise = torch.cat([torch.ones(t * w_mat.shape[0], dtype=w_mat.dtype), torch.tensor([sigma2], dtype=w_mat.dtype)])
    cov = m @ m.T + torch.diag(noise)
    mean = torch.cat([c.repeat(t), b.reshape(1)])
    value = torch.cat([acts.reshape(-1), torch.as_tensor([float(y)], dtype=w_mat.dtype)])
    return torch.distributions.MultivariateNormal(mean, covariance_matrix=cov).log_prob(value)
