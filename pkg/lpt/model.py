"""
Latent Plan Transformer: prior transform U_alpha, trajectory generator
p_beta(tau | z) and return predictor p_gamma(y | z), plus the composite
log-densities and scores used by learning and planning.
"""
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn

from lpt import config
from lpt.config import ModelConfig
from lpt.errors import ValidationError
from lpt.numerics import ensure_finite, grad, normal_logpdf_terms

_ACTIVATIONS = {"relu": nn.ReLU, "gelu": nn.GELU, "tanh": nn.Tanh, "silu": nn.SiLU}


@dataclass(frozen=True)
class Trajectory:
    """(s_1, a_1, ..., s_T, a_T); actions are (T, d_a) floats or (T,) integer indices."""

    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        actions = np.asarray(self.actions)
        if states.ndim != 2 or len(states) < 1:
            raise ValidationError(f"states must be (T, d_s) with T >= 1, got shape {states.shape}")
        if actions.ndim not in (1, 2) or len(actions) != len(states):
            raise ValidationError(
                f"actions must have one entry per state: {len(actions)} actions for {len(states)} states"
            )
        if actions.ndim == 2:
            actions = actions.astype(np.float64)
        elif not np.issubdtype(actions.dtype, np.integer):
            if not np.all(np.equal(np.mod(actions, 1), 0)):
                raise ValidationError("1-d actions must be integer indices")
            actions = actions.astype(np.int64)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)

    @property
    def length(self) -> int:
        return len(self.states)

    @property
    def discrete(self) -> bool:
        return self.actions.ndim == 1

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Trajectory)
            and np.array_equal(self.states, other.states)
            and np.array_equal(self.actions, other.actions)
        )


@dataclass(frozen=True)
class ContextWindows:
    """
    All finite-context windows of a batch of trajectories, left-padded to K.

    Slot K-1 is the current step; its action is the prediction target and is
    never embedded as an input token.
    """

    states: torch.Tensor  # (W, K, d_s)
    actions: torch.Tensor  # (W, K, d_a) float or (W, K) long
    valid: torch.Tensor  # (W, K) bool
    owner: torch.Tensor  # (W,) long, index of the trajectory each window belongs to
    n_owners: int

    @property
    def targets(self) -> torch.Tensor:
        return self.actions[:, -1]

    def __len__(self) -> int:
        return self.states.shape[0]

    def repeat(self, n: int) -> "ContextWindows":
        """Replicate the windows for ``n`` independent chains (owner-major)."""
        w = len(self)
        owner = torch.arange(n).repeat_interleave(w) * self.n_owners + self.owner.repeat(n)
        return ContextWindows(
            states=self.states.repeat(n, *([1] * (self.states.dim() - 1))),
            actions=self.actions.repeat(n, *([1] * (self.actions.dim() - 1))),
            valid=self.valid.repeat(n, 1),
            owner=owner,
            n_owners=self.n_owners * n,
        )


def build_windows(
    trajectories: Sequence[Trajectory],
    context_length: int,
    discrete: bool,
    state_mean: np.ndarray | None = None,
    state_std: np.ndarray | None = None,
    dtype: torch.dtype = config.DTYPE,
) -> ContextWindows:
    """
    Cut every trajectory into its T windows s_{t-K+1..t}, a_{t-K+1..t}.

    Args:
        trajectories: Batch of trajectories (owner index = position in the list)
        context_length: K
        discrete: Expected action mode; a mismatch raises ValidationError
        state_mean, state_std: Optional normalization applied to states
    """
    if len(trajectories) == 0:
        raise ValidationError("cannot build windows for an empty batch")
    k = context_length
    states_out, actions_out, valid_out, owner_out = [], [], [], []
    for owner, traj in enumerate(trajectories):
        if traj.discrete != discrete:
            mode = "discrete" if discrete else "continuous"
            raise ValidationError(f"trajectory {owner} actions do not match the {mode} action head")
        states = traj.states
        if state_mean is not None:
            states = (states - state_mean) / state_std
        t = np.arange(traj.length)
        idx = t[:, None] - (k - 1) + np.arange(k)[None, :]
        valid = idx >= 0
        idx = np.clip(idx, 0, None)
        s = states[idx] * valid[..., None]
        if discrete:
            a = np.where(valid, traj.actions[idx], 0)
        else:
            a = traj.actions[idx] * valid[..., None]
        states_out.append(s)
        actions_out.append(a)
        valid_out.append(valid)
        owner_out.append(np.full(traj.length, owner))
    actions = np.concatenate(actions_out)
    return ContextWindows(
        states=torch.as_tensor(np.concatenate(states_out), dtype=dtype),
        actions=torch.as_tensor(actions, dtype=torch.long if discrete else dtype),
        valid=torch.as_tensor(np.concatenate(valid_out)),
        owner=torch.as_tensor(np.concatenate(owner_out), dtype=torch.long),
        n_owners=len(trajectories),
    )


def context_window(states, actions, cfg: ModelConfig, dtype: torch.dtype = config.DTYPE) -> ContextWindows:
    """
    The single window for the current step of a rollout.

    Args:
        states: (k, d_s) states up to and including the current one
        actions: the k - 1 previous actions; anything older than K steps is dropped
    """
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2 or len(states) == 0:
        raise ValidationError("context must contain at least the current state")
    actions = np.asarray(actions)
    if len(actions) != len(states) - 1:
        raise ValidationError(f"expected {len(states) - 1} previous actions, got {len(actions)}")
    k = cfg.context_length
    states = states[-k:]
    actions = actions[len(actions) - (len(states) - 1):] if len(states) > 1 else actions[:0]
    if cfg.discrete_actions:
        padded = np.concatenate([actions.astype(np.int64).reshape(-1), np.zeros(1, dtype=np.int64)])
    else:
        padded = np.concatenate([actions.reshape(-1, cfg.action_dim), np.zeros((1, cfg.action_dim))])
    windows = build_windows([Trajectory(states, padded)], k, cfg.discrete_actions, dtype=dtype)
    last = len(windows) - 1
    return ContextWindows(
        states=windows.states[last:],
        actions=windows.actions[last:],
        valid=windows.valid[last:],
        owner=torch.zeros(1, dtype=torch.long),
        n_owners=1,
    )


def action_distribution_from_head(out: torch.Tensor, discrete: bool) -> torch.distributions.Distribution:
    """Categorical over logits, or an independent unit-variance Normal around the mean."""
    if discrete:
        return torch.distributions.Categorical(logits=out)
    return torch.distributions.Independent(torch.distributions.Normal(out, torch.ones_like(out)), 1)


# ---------------------------------------------------------------------------
# Prior transforms U_alpha
# ---------------------------------------------------------------------------


class IdentityPrior(nn.Module):
    """No UNet: z = z0."""

    def forward(self, z0: torch.Tensor) -> torch.Tensor:
        return z0


class ResidualMLPPrior(nn.Module):
    def __init__(self, latent_dim: int, hidden: int, activation: str):
        super().__init__()
        act = _ACTIVATIONS[activation]
        self.net = nn.Sequential(
            nn.Linear(latent_dim, hidden), act(), nn.Linear(hidden, hidden), act(), nn.Linear(hidden, latent_dim)
        )
        nn.init.zeros_(self.net[-1].weight)
        nn.init.zeros_(self.net[-1].bias)

    def forward(self, z0: torch.Tensor) -> torch.Tensor:
        return z0 + self.net(z0)


class ResBlock1D(nn.Module):
    def __init__(self, c_in: int, c_out: int, activation: str):
        super().__init__()
        self.act = _ACTIVATIONS[activation]()
        self.conv1 = nn.Conv1d(c_in, c_out, 3, padding=1)
        self.conv2 = nn.Conv1d(c_out, c_out, 3, padding=1)
        self.skip = nn.Conv1d(c_in, c_out, 1) if c_in != c_out else nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv1(self.act(x))
        h = self.conv2(self.act(h))
        return h + self.skip(x)


class UNetPrior(nn.Module):
    """
    1-D convolutional UNet over z0 reshaped to (channels, d / channels).

    Encoder stages (ResBlocks, stride-2 downsampling between stages), a middle
    ResBlock, and a decoder with skip connections. The last convolution is
    zero-initialized and added to z0, so training starts from U(z0) = z0.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c, base, act = cfg.unet_channels, cfg.unet_base_width, cfg.activation
        widths = [base * m for m in cfg.unet_multipliers]
        self.channels = c
        self.init_conv = nn.Conv1d(c, base, cfg.unet_init_kernel, padding=cfg.unet_init_kernel // 2)
        self.down = nn.ModuleList()
        self.downsample = nn.ModuleList()
        ch = base
        for i, width in enumerate(widths):
            blocks = []
            for _ in range(cfg.unet_res_blocks):
                blocks.append(ResBlock1D(ch, width, act))
                ch = width
            self.down.append(nn.Sequential(*blocks))
            if i < len(widths) - 1:
                self.downsample.append(nn.Conv1d(ch, ch, 3, stride=2, padding=1))
        self.mid = ResBlock1D(ch, ch, act)
        self.up = nn.ModuleList()
        self.upsample = nn.ModuleList()
        for i in reversed(range(len(widths))):
            blocks = [ResBlock1D(ch + widths[i], widths[i], act)]
            ch = widths[i]
            blocks += [ResBlock1D(ch, ch, act) for _ in range(cfg.unet_res_blocks - 1)]
            self.up.append(nn.Sequential(*blocks))
            if i > 0:
                self.upsample.append(
                    nn.Sequential(nn.Upsample(scale_factor=2, mode="nearest"), nn.Conv1d(ch, ch, 3, padding=1))
                )
        self.out_act = _ACTIVATIONS[act]()
        self.out_conv = nn.Conv1d(ch, c, 1)
        nn.init.zeros_(self.out_conv.weight)
        nn.init.zeros_(self.out_conv.bias)

    def forward(self, z0: torch.Tensor) -> torch.Tensor:
        batch_shape = z0.shape[:-1]
        x = z0.reshape(-1, self.channels, z0.shape[-1] // self.channels)
        h = self.init_conv(x)
        skips = []
        for i, stage in enumerate(self.down):
            h = stage(h)
            skips.append(h)
            if i < len(self.downsample):
                h = self.downsample[i](h)
        h = self.mid(h)
        for j, stage in enumerate(self.up):
            h = stage(torch.cat([h, skips[len(skips) - 1 - j]], dim=1))
            if j < len(self.upsample):
                h = self.upsample[j](h)
        out = self.out_conv(self.out_act(h))
        return z0 + out.reshape(*batch_shape, -1)


def build_prior(cfg: ModelConfig) -> nn.Module:
    if cfg.prior_type == "identity":
        return IdentityPrior()
    if cfg.prior_type == "mlp":
        return ResidualMLPPrior(cfg.latent_dim, cfg.return_hidden, cfg.activation)
    return UNetPrior(cfg)


# ---------------------------------------------------------------------------
# Trajectory generator p_beta
# ---------------------------------------------------------------------------


class Attention(nn.Module):
    """Multi-head scaled dot-product attention with an explicit boolean mask."""

    def __init__(self, width: int, num_heads: int):
        super().__init__()
        self.num_heads = num_heads
        self.head_dim = width // num_heads
        self.query = nn.Linear(width, width)
        self.key = nn.Linear(width, width)
        self.value = nn.Linear(width, width)
        self.proj = nn.Linear(width, width)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        b, t, _ = x.shape
        return x.view(b, t, self.num_heads, self.head_dim).transpose(1, 2)

    def forward(self, x: torch.Tensor, memory: torch.Tensor, allowed: torch.Tensor | None = None) -> torch.Tensor:
        q, k, v = self._split(self.query(x)), self._split(self.key(memory)), self._split(self.value(memory))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if allowed is not None:
            scores = scores.masked_fill(~allowed[:, None], float("-inf"))
        out = torch.softmax(scores, dim=-1) @ v
        b, _, t, _ = out.shape
        return self.proj(out.transpose(1, 2).reshape(b, t, -1))


class GeneratorBlock(nn.Module):
    """Causal self-attention, cross-attention to the plan tokens, MLP."""

    def __init__(self, width: int, num_heads: int, activation: str):
        super().__init__()
        self.ln_self = nn.LayerNorm(width)
        self.self_attn = Attention(width, num_heads)
        self.ln_cross = nn.LayerNorm(width)
        self.cross_attn = Attention(width, num_heads)
        self.ln_mlp = nn.LayerNorm(width)
        self.mlp = nn.Sequential(nn.Linear(width, 4 * width), _ACTIVATIONS[activation](), nn.Linear(4 * width, width))

    def forward(self, x: torch.Tensor, plan: torch.Tensor, allowed: torch.Tensor) -> torch.Tensor:
        h = self.ln_self(x)
        x = x + self.self_attn(h, h, allowed)
        x = x + self.cross_attn(self.ln_cross(x), plan)
        return x + self.mlp(self.ln_mlp(x))


class TransformerGenerator(nn.Module):
    """
    Finite-context causal transformer over interleaved (s, a) tokens with the
    plan z attended through cross-attention. Positions are slot indices inside
    the right-aligned window, so the output depends only on the window.
    """

    def __init__(self, cfg: ModelConfig, conditioning_dim: int | None = None):
        super().__init__()
        width, k = cfg.hidden_width, cfg.context_length
        self.cfg = cfg
        self.state_embed = nn.Linear(cfg.state_dim, width)
        if cfg.discrete_actions:
            self.action_embed: nn.Module = nn.Embedding(cfg.action_dim, width)
        else:
            self.action_embed = nn.Linear(cfg.action_dim, width)
        self.position = nn.Embedding(2 * k - 1, width)
        self.latent_tokens = cfg.latent_tokens
        self.plan_embed = nn.Linear(conditioning_dim or cfg.latent_dim, cfg.latent_tokens * width)
        self.blocks = nn.ModuleList(
            GeneratorBlock(width, cfg.num_heads, cfg.activation) for _ in range(cfg.num_layers)
        )
        self.ln_out = nn.LayerNorm(width)
        self.head = nn.Linear(width, cfg.action_dim)

    def forward(self, windows: ContextWindows, z: torch.Tensor) -> torch.Tensor:
        """
        Args:
            windows: W windows of length K
            z: (W, d) plan for each window

        Returns:
            (W, d_a) action means, or (W, n_actions) logits
        """
        w, k = windows.valid.shape
        width = self.cfg.hidden_width
        s_tok = self.state_embed(windows.states)
        a_tok = self.action_embed(windows.actions)
        tokens = torch.stack([s_tok, a_tok], dim=2).reshape(w, 2 * k, width)[:, :-1]
        tokens = tokens + self.position.weight[None]
        token_valid = windows.valid.repeat_interleave(2, dim=1)[:, :-1]
        n = 2 * k - 1
        causal = torch.tril(torch.ones(n, n, dtype=torch.bool))
        eye = torch.eye(n, dtype=torch.bool)
        allowed = causal[None] & (token_valid[:, None, :] | eye[None])
        plan = self.plan_embed(z).view(w, self.latent_tokens, width)
        h = tokens
        for block in self.blocks:
            h = block(h, plan, allowed)
        return self.head(self.ln_out(h[:, -1]))


class LinearGenerator(nn.Module):
    """a_t | z ~ N(W z + c, I); ignores states (linear-Gaussian configuration)."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.linear = nn.Linear(cfg.latent_dim, cfg.action_dim)

    def forward(self, windows: ContextWindows, z: torch.Tensor) -> torch.Tensor:
        return self.linear(z)


# ---------------------------------------------------------------------------
# Return predictor p_gamma
# ---------------------------------------------------------------------------


class ReturnPredictor(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        if cfg.return_head_type == "linear":
            self.net: nn.Module = nn.Linear(cfg.latent_dim, 1)
        else:
            act = _ACTIVATIONS[cfg.activation]
            self.net = nn.Sequential(
                nn.Linear(cfg.latent_dim, cfg.return_hidden),
                act(),
                nn.Linear(cfg.return_hidden, cfg.return_hidden),
                act(),
                nn.Linear(cfg.return_hidden, 1),
            )

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.net(z).squeeze(-1)


# ---------------------------------------------------------------------------
# The composite model
# ---------------------------------------------------------------------------


class LatentPlanTransformer(nn.Module):
    """
    theta = (alpha, beta, gamma) = (prior, generator, return_head).

    The generator never reads the return head and vice versa, so
    tau and y are conditionally independent given z.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.prior = build_prior(cfg)
        if cfg.generator_type == "linear":
            self.generator: nn.Module = LinearGenerator(cfg)
        else:
            self.generator = TransformerGenerator(cfg)
        self.return_head = ReturnPredictor(cfg)
        self.to(config.DTYPE)

    @classmethod
    def from_linear_gaussian(cls, spec) -> "LatentPlanTransformer":
        """Identity prior with linear heads copied from a LinearGaussianSpec."""
        cfg = ModelConfig(
            state_dim=1,
            action_dim=spec.W.shape[0],
            latent_dim=spec.W.shape[1],
            context_length=1,
            prior_type="identity",
            generator_type="linear",
            return_head_type="linear",
            return_variance=float(spec.sigma2),
        )
        model = cls(cfg)
        with torch.no_grad():
            model.generator.linear.weight.copy_(torch.as_tensor(spec.W))
            model.generator.linear.bias.copy_(torch.as_tensor(spec.c))
            model.return_head.net.weight.copy_(torch.as_tensor(spec.a).reshape(1, -1))
            model.return_head.net.bias.fill_(float(spec.b))
        return model

    @property
    def latent_dim(self) -> int:
        return self.cfg.latent_dim

    def parameter_groups(self) -> dict[str, list[nn.Parameter]]:
        return {
            "prior": list(self.prior.parameters()),
            "generator": list(self.generator.parameters()),
            "return": list(self.return_head.parameters()),
        }

    def _check_latent(self, z: torch.Tensor) -> None:
        if z.shape[-1] != self.cfg.latent_dim:
            raise ValidationError(f"latent dimension {z.shape[-1]} does not match model d={self.cfg.latent_dim}")

    def prior_transform(self, z0: torch.Tensor) -> torch.Tensor:
        """z = U_alpha(z0); accepts (d,) or (B, d)."""
        self._check_latent(z0)
        return self.prior(z0)

    def windows_for(self, trajectories: Sequence[Trajectory], stats=None) -> ContextWindows:
        mean = std = None
        if stats is not None:
            mean, std = stats.state_mean, stats.state_std
        return build_windows(
            trajectories, self.cfg.context_length, self.cfg.discrete_actions, mean, std, self._dtype()
        )

    def _dtype(self) -> torch.dtype:
        return next(self.return_head.parameters()).dtype

    def action_distribution(
        self, states: np.ndarray, actions: np.ndarray, z: torch.Tensor
    ) -> torch.distributions.Distribution:
        """
        p_beta(a_t | s_{t-K+1..t}, a_{t-K+1..t-1}, z) for a single context.

        Args:
            states: (k, d_s) states up to and including the current one
            actions: the k - 1 previous actions
            z: (d,) plan

        Returns:
            Independent unit-variance Normal over R^{d_a}, or a Categorical
        """
        self._check_latent(z)
        single = context_window(states, actions, self.cfg, self._dtype())
        out = self.generator(single, z.reshape(1, -1))[0]
        return action_distribution_from_head(out, self.cfg.discrete_actions)

    def window_log_probs(self, windows: ContextWindows, z: torch.Tensor) -> torch.Tensor:
        """log p_beta(a_t | window_t, z_owner(t)) for every window; z is (n_owners, d)."""
        out = self.generator(windows, z[windows.owner])
        targets = windows.targets
        if self.cfg.discrete_actions:
            return torch.log_softmax(out, dim=-1).gather(1, targets[:, None]).squeeze(1)
        if targets.shape[-1] != out.shape[-1]:
            raise ValidationError(f"action dim {targets.shape[-1]} does not match head dim {out.shape[-1]}")
        return normal_logpdf_terms(targets, out, 1.0).sum(-1)

    def traj_loglik(self, windows: ContextWindows, z: torch.Tensor) -> torch.Tensor:
        """Sum_t log p_beta(a_t | window, z) per trajectory; states are conditioning only."""
        z = z.reshape(-1, self.cfg.latent_dim)
        self._check_latent(z)
        per_window = self.window_log_probs(windows, z)
        return torch.zeros(windows.n_owners, dtype=per_window.dtype).index_add(0, windows.owner, per_window)

    def predicted_return(self, z: torch.Tensor) -> torch.Tensor:
        return self.return_head(z)

    def return_loglik(self, y: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        """log N(y; r_gamma(z), sigma^2) per row."""
        self._check_latent(z)
        y = torch.as_tensor(y, dtype=z.dtype)
        return normal_logpdf_terms(y, self.return_head(z), self.cfg.return_variance)

    def log_joint(
        self,
        z0: torch.Tensor,
        windows: ContextWindows | None,
        y: torch.Tensor | None,
    ) -> torch.Tensor:
        """log p0(z0) + log p_gamma(y|z) + log p_beta(tau|z) per chain; None drops a term."""
        z = self.prior_transform(z0)
        total = normal_logpdf_terms(z0, torch.zeros_like(z0), 1.0).sum(-1)
        if y is not None:
            total = total + self.return_loglik(y, z)
        if windows is not None:
            total = total + self.traj_loglik(windows, z)
        return total

    def _likelihood_grad(
        self, z0: torch.Tensor, windows: ContextWindows | None, y: torch.Tensor | None
    ) -> torch.Tensor:
        def objective(z0_):
            z = self.prior_transform(z0_)
            total = torch.zeros((), dtype=z0_.dtype)
            if y is not None:
                total = total + self.return_loglik(y, z).sum()
            if windows is not None:
                total = total + self.traj_loglik(windows, z).sum()
            return total

        return grad(objective, z0)[0]

    def posterior_score(
        self,
        z0: torch.Tensor,
        windows: ContextWindows | None,
        y: torch.Tensor | None,
    ) -> torch.Tensor:
        """
        Gradient w.r.t. z0 of log p0(z0) + log p_gamma(y|U(z0)) + sum_t log p_beta(...|U(z0)).

        Rows of a (B, d) z0 are independent chains; ``windows.n_owners`` must
        equal B. Passing None for a term disables it.
        """
        self._check_latent(z0)
        if windows is None and y is None:
            return -z0
        score = -z0 + self._likelihood_grad(z0, windows, y)
        return ensure_finite(score, "posterior score")

    def plan_score(self, z0: torch.Tensor, y: torch.Tensor, w: float) -> torch.Tensor:
        """-z0 + w * grad log p_gamma(y | U(z0)); w = 1 is the plain return posterior."""
        if w < 0:
            raise ValidationError(f"guidance weight must be >= 0, got {w}")
        self._check_latent(z0)
        if w == 0:
            return -z0
        score = -z0 + w * self._likelihood_grad(z0, None, y)
        return ensure_finite(score, "plan score")


def traj_loglik(traj: Trajectory, z: torch.Tensor, model: LatentPlanTransformer) -> torch.Tensor:
    """log p_beta(tau | z) for one trajectory (0-dim tensor)."""
    return model.traj_loglik(model.windows_for([traj]), z.reshape(1, -1))[0]


def return_loglik(y: float, z: torch.Tensor, model: LatentPlanTransformer) -> torch.Tensor:
    return model.return_loglik(torch.as_tensor(y, dtype=z.dtype), z)


def randomize_prior_output(model: LatentPlanTransformer, scale: float = 0.1, seed: int = 0) -> None:
    """Give the zero-initialized last prior layer random weights."""
    gen = torch.Generator().manual_seed(seed)
    if isinstance(model.prior, UNetPrior):
        last = model.prior.out_conv
    elif isinstance(model.prior, ResidualMLPPrior):
        last = model.prior.net[-1]
    else:
        return
    with torch.no_grad():
        last.weight.copy_(torch.randn(last.weight.shape, generator=gen, dtype=last.weight.dtype) * scale)
        last.bias.copy_(torch.randn(last.bias.shape, generator=gen, dtype=last.bias.dtype) * scale)
