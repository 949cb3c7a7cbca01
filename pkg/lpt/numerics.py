"""
Tensor numerics: seeded random streams, Gaussian log-densities,
reverse-mode gradients and a central-difference gradient checker.

Tensors are ``torch.Tensor`` in double precision by default; reverse-mode
gradients come from ``torch.autograd``.
"""
import hashlib
import math
from typing import Callable, Sequence

import numpy as np
import torch

from lpt import config
from lpt.errors import DomainError, GradientError, NonFiniteError, ValidationError

_LOG_2PI = math.log(2.0 * math.pi)
_SEED_MASK = (1 << 63) - 1


def _hash64(*parts: object) -> int:
    digest = hashlib.blake2b(":".join(str(p) for p in parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") & _SEED_MASK


class RngStream:
    """
    Reproducible random stream identified by ``(master_seed, stream_id)``.

    Two streams with equal ids produce identical sequences; distinct ids are
    seeded from unrelated hashes. Holds a torch generator for tensors and a
    numpy generator for environment-side sampling.
    """

    def __init__(self, master_seed: int, stream_id: int = 0):
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self.torch = torch.Generator(device="cpu")
        self.torch.manual_seed(_hash64("torch", self.master_seed, self.stream_id))
        self._numpy: np.random.Generator | None = None

    @classmethod
    def derive(cls, master_seed: int, purpose: str, index: int = 0) -> "RngStream":
        """One stream per (purpose, index) pair under a master seed."""
        return cls(master_seed, _hash64(purpose, index))

    @property
    def numpy(self) -> np.random.Generator:
        if self._numpy is None:
            seq = np.random.SeedSequence([self.master_seed & _SEED_MASK, self.stream_id])
            self._numpy = np.random.Generator(np.random.PCG64(seq))
        return self._numpy

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"


def gaussian_sample(shape: Sequence[int], rng: RngStream, dtype: torch.dtype = config.DTYPE) -> torch.Tensor:
    """
    Draw i.i.d. standard normal entries.

    Args:
        shape: Non-empty list of dimensions, each >= 1
        rng: Stream the draw is taken from (advances its state)

    Returns:
        Tensor of the requested shape
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0 or min(shape) < 1:
        raise ValidationError(f"shape must be non-empty with dims >= 1, got {shape}")
    return torch.randn(shape, generator=rng.torch, dtype=dtype)


def _check_variance(variance) -> None:
    v = torch.as_tensor(variance)
    if not bool(torch.all(v > 0)):
        raise DomainError(f"variance must be > 0, got {variance}")


def normal_logpdf_terms(x: torch.Tensor, mean: torch.Tensor, variance) -> torch.Tensor:
    """Elementwise -1/2 log(2 pi v) - (x - mean)^2 / (2 v)."""
    _check_variance(variance)
    variance_t = torch.as_tensor(variance, dtype=x.dtype)
    return -0.5 * (_LOG_2PI + torch.log(variance_t)) - (x - mean) ** 2 / (2.0 * variance_t)


def logpdf_normal(x, mean, variance) -> torch.Tensor:
    """
    Isotropic Gaussian log-density summed over all coordinates.

    Returns:
        0-dim tensor (differentiable w.r.t. x and mean)
    """
    x = torch.as_tensor(x, dtype=config.DTYPE) if not torch.is_tensor(x) else x
    mean = torch.as_tensor(mean, dtype=x.dtype) if not torch.is_tensor(mean) else mean
    if x.shape != mean.shape:
        raise ValidationError(f"x and mean shapes differ: {tuple(x.shape)} vs {tuple(mean.shape)}")
    return normal_logpdf_terms(x, mean, variance).sum()


def ensure_finite(t: torch.Tensor, what: str) -> torch.Tensor:
    if not bool(torch.isfinite(t).all()):
        bad = int((~torch.isfinite(t)).sum())
        raise NonFiniteError(f"non-finite values in {what}", {"count": bad, "shape": tuple(t.shape)})
    return t


def grad(f: Callable[..., torch.Tensor], *inputs: torch.Tensor, create_graph: bool = False) -> tuple[torch.Tensor, ...]:
    """
    Reverse-mode gradient of a scalar function.

    Args:
        f: Callable returning a 0-dim tensor built from differentiable torch ops
        inputs: Points at which to differentiate (not modified)

    Returns:
        Tuple of gradients, one per input, same shapes as the inputs
    """
    leaves = [x.detach().clone().requires_grad_(True) for x in inputs]
    with torch.enable_grad():
        out = f(*leaves)
        if not torch.is_tensor(out) or out.numel() != 1:
            raise GradientError("f must return a scalar tensor")
        if not out.requires_grad:
            raise GradientError("f does not depend differentiably on its inputs")
        grads = torch.autograd.grad(out.reshape(()), leaves, create_graph=create_graph, allow_unused=True)
    return tuple(torch.zeros_like(x) if g is None else g for x, g in zip(leaves, grads))


def numeric_grad(
    f: Callable[..., torch.Tensor],
    inputs: Sequence[torch.Tensor],
    epsilon: float = config.FINITE_DIFF_EPSILON,
) -> list[torch.Tensor]:
    """Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) for every coordinate."""
    if not 1e-7 <= epsilon <= 1e-3:
        raise DomainError(f"epsilon must lie in [1e-7, 1e-3], got {epsilon}")
    inputs = [x.detach().clone() for x in inputs]
    out = []
    with torch.no_grad():
        for x in inputs:
            flat = x.view(-1)
            g = torch.empty_like(flat)
            for i in range(flat.numel()):
                original = flat[i].item()
                flat[i] = original + epsilon
                up = float(f(*inputs))
                flat[i] = original - epsilon
                down = float(f(*inputs))
                flat[i] = original
                g[i] = (up - down) / (2.0 * epsilon)
            out.append(g.view_as(x))
    return out


def finite_diff_check(
    f: Callable[..., torch.Tensor],
    inputs: Sequence[torch.Tensor],
    epsilon: float = config.FINITE_DIFF_EPSILON,
    analytic: Sequence[torch.Tensor] | None = None,
) -> float:
    """
    Compare reverse-mode gradients with central differences.

    Args:
        f: Scalar function of ``inputs``
        inputs: Evaluation point
        epsilon: Perturbation size in [1e-7, 1e-3]
        analytic: Gradients to check instead of ``grad(f, *inputs)``

    Returns:
        max over coordinates of |analytic - numeric| / max(1, |numeric|)
    """
    numeric = numeric_grad(f, inputs, epsilon)
    if analytic is None:
        analytic = grad(f, *inputs)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        err = (a.detach().reshape(-1) - n.reshape(-1)).abs() / n.reshape(-1).abs().clamp(min=1.0)
        worst = max(worst, float(err.max()) if err.numel() else 0.0)
    return worst
