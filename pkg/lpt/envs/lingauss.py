"""
Synthetic linear-Gaussian data: z ~ N(0, I), a_t ~ N(W z + c, I),
y ~ N(a'z + b, sigma^2). States are constant placeholders.
"""
from dataclasses import dataclass

import numpy as np

from lpt.envs.dataset import OfflineDataset
from lpt.errors import DomainError, ValidationError
from lpt.model import Trajectory
from lpt.numerics import RngStream

ENV_ID = "lingauss-v0"


@dataclass(frozen=True)
class LinearGaussianSpec:
    W: np.ndarray  # (d_a, d)
    c: np.ndarray  # (d_a,)
    a: np.ndarray  # (d,)
    b: float
    sigma2: float
    horizon: int = 3

    def __post_init__(self):
        if float(self.sigma2) <= 0:
            raise DomainError(f"sigma2 must be > 0, got {self.sigma2}")
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")

    @property
    def latent_dim(self) -> int:
        return int(np.shape(self.W)[1])

    @property
    def action_dim(self) -> int:
        return int(np.shape(self.W)[0])

    def to_dict(self) -> dict:
        return {
            "W": np.asarray(self.W).tolist(),
            "c": np.asarray(self.c).tolist(),
            "a": np.asarray(self.a).tolist(),
            "b": float(self.b),
            "sigma2": float(self.sigma2),
            "horizon": self.horizon,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinearGaussianSpec":
        return cls(
            W=np.asarray(data["W"], dtype=np.float64),
            c=np.asarray(data["c"], dtype=np.float64),
            a=np.asarray(data["a"], dtype=np.float64),
            b=float(data["b"]),
            sigma2=float(data["sigma2"]),
            horizon=int(data.get("horizon", 3)),
        )

    @classmethod
    def from_model(cls, model, horizon: int = 3) -> "LinearGaussianSpec":
        """Read W, c, a, b back from a linear-Gaussian LatentPlanTransformer."""
        gen, ret = model.generator.linear, model.return_head.net
        return cls(
            W=gen.weight.detach().numpy().copy(),
            c=gen.bias.detach().numpy().copy(),
            a=ret.weight.detach().numpy().reshape(-1).copy(),
            b=float(ret.bias.detach()[0]),
            sigma2=model.cfg.return_variance,
            horizon=horizon,
        )


def random_spec(
    latent_dim: int,
    action_dim: int,
    horizon: int,
    rng: np.random.Generator,
    w_scale: float = 0.25,
    a_scale: float = 0.5,
    sigma2: float = 1.0,
) -> LinearGaussianSpec:
    """Random instance with entries drawn at the given scales."""
    return LinearGaussianSpec(
        W=rng.normal(0.0, w_scale, size=(action_dim, latent_dim)),
        c=rng.normal(0.0, 0.5, size=action_dim),
        a=rng.normal(0.0, a_scale, size=latent_dim),
        b=float(rng.normal(0.0, 0.5)),
        sigma2=sigma2,
        horizon=horizon,
    )


def gen_linear_gaussian_dataset(spec: LinearGaussianSpec, n: int, seed: int) -> OfflineDataset:
    if n < 1:
        raise ValidationError("n must be >= 1")
    w_mat, c, a = np.asarray(spec.W), np.asarray(spec.c), np.asarray(spec.a)
    t = spec.horizon
    trajectories, returns = [], []
    for i in range(n):
        rng = RngStream.derive(seed, "lingauss-example", i).numpy
        z = rng.standard_normal(spec.latent_dim)
        actions = w_mat @ z + c + rng.standard_normal((t, spec.action_dim))
        y = float(a @ z + spec.b + np.sqrt(spec.sigma2) * rng.standard_normal())
        trajectories.append(Trajectory(np.zeros((t, 1)), actions))
        returns.append(y)
    return OfflineDataset(
        env_id=ENV_ID,
        state_dim=1,
        discrete=False,
        action_size=spec.action_dim,
        trajectories=trajectories,
        returns=np.array(returns),
        metadata={"generator": "linear-gaussian", "seed": seed, "spec": spec.to_dict()},
    )
