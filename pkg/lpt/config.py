# Configuration for the Latent Plan Transformer

import json
import os
from pathlib import Path
from typing import Any, Literal

import torch
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from lpt.errors import ConfigError

load_dotenv()

# Numeric Configuration
DTYPE = torch.float64  # float32 only for quick experiments; gradient checks need float64
FINITE_DIFF_EPSILON = 1e-6
GRADCHECK_TOLERANCE = 1e-6

# Model Configuration
LATENT_DIM = 16
CONTEXT_LENGTH = 16
NUM_LAYERS = 2
NUM_HEADS = 2
HIDDEN_WIDTH = 64
LATENT_TOKENS = 1
RETURN_VARIANCE = 0.25  # sigma^2 of the return predictor, on the normalized return scale
PRIOR_TYPE = "unet"  # "unet", "identity" or "mlp"
UNET_CHANNELS = 1
UNET_BASE_WIDTH = 16
UNET_MULTIPLIERS = (1, 2, 4)
UNET_RES_BLOCKS = 1
UNET_INIT_KERNEL = 3
ACTIVATION = "relu"

# Sampler Configuration
TRAIN_STEP_SIZE = 0.3
TRAIN_STEPS_FRESH = 15
TRAIN_STEPS_PMC = 2
PLAN_STEP_SIZE = 0.3
PLAN_STEPS = 64

# Trainer Configuration
ITERATIONS = 20_000
BATCH_SIZE = 32
LEARNING_RATE = 1e-3
GRAD_CLIP_NORM = 10.0
CLIP_PER_GROUP = False
CHECKPOINT_EVERY = 1_000
USE_PMC = True
OPTIMIZER = "adam"  # "adam" or "sgd" (plain gradient ascent)

# Evaluation Configuration
EVAL_EPISODES = 100
EVAL_SEEDS = 5
GUIDANCE_WEIGHTS = (1.0, 4.0)
DETERMINISTIC_ACTIONS = True

# Output Configuration
OUTPUT_DIR = "outputs"
TRAINING_LOG = "training_log.csv"
LOG_LEVEL = os.getenv("LPT_LOG_LEVEL", "INFO")  # DEBUG, INFO, WARNING, ERROR
THREADS = int(os.getenv("LPT_THREADS", "1"))


def seed_from_env(default: int | None = None) -> int | None:
    """Seed fallback from the LPT_SEED environment variable."""
    raw = os.getenv("LPT_SEED")
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError([f"LPT_SEED must be an integer, got {raw!r}"]) from e


class _Config(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    @classmethod
    def build(cls, **values: Any):
        """Validate ``values`` and report every problem at once as a ConfigError."""
        try:
            return cls(**values)
        except ValidationError as e:
            problems = [
                f"{cls.__name__}.{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
                for err in e.errors()
            ]
            raise ConfigError(problems) from e

    def updated(self, **overrides: Any):
        """Copy with ``overrides`` applied; ``None`` values are ignored."""
        values = self.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return type(self).build(**values)


class ModelConfig(_Config):
    """Architecture of the prior transform, trajectory generator and return predictor."""

    state_dim: int = Field(..., ge=1)
    action_dim: int = Field(..., ge=1, description="continuous action size, or number of discrete actions")
    discrete_actions: bool = False
    latent_dim: int = Field(LATENT_DIM, ge=1)
    context_length: int = Field(CONTEXT_LENGTH, ge=1)
    num_layers: int = Field(NUM_LAYERS, ge=1)
    num_heads: int = Field(NUM_HEADS, ge=1)
    hidden_width: int = Field(HIDDEN_WIDTH, ge=1)
    latent_tokens: int = Field(LATENT_TOKENS, ge=1)
    return_hidden: int = Field(HIDDEN_WIDTH, ge=1)
    return_variance: float = Field(RETURN_VARIANCE, gt=0)
    prior_type: Literal["unet", "identity", "mlp"] = PRIOR_TYPE
    generator_type: Literal["transformer", "linear"] = "transformer"
    return_head_type: Literal["mlp", "linear"] = "mlp"
    unet_channels: int = Field(UNET_CHANNELS, ge=1)
    unet_base_width: int = Field(UNET_BASE_WIDTH, ge=1)
    unet_multipliers: tuple[int, ...] = UNET_MULTIPLIERS
    unet_res_blocks: int = Field(UNET_RES_BLOCKS, ge=1)
    unet_init_kernel: int = Field(UNET_INIT_KERNEL, ge=1)
    activation: Literal["relu", "gelu", "tanh", "silu"] = ACTIVATION

    @model_validator(mode="after")
    def _check_shapes(self):
        if self.hidden_width % self.num_heads != 0:
            raise ValueError("hidden_width must be divisible by num_heads")
        if self.unet_init_kernel % 2 == 0:
            raise ValueError("unet_init_kernel must be odd")
        if self.prior_type == "unet":
            if not self.unet_multipliers or min(self.unet_multipliers) < 1:
                raise ValueError("unet_multipliers must be non-empty positive integers")
            if self.latent_dim % self.unet_channels != 0:
                raise ValueError("latent_dim must be divisible by unet_channels")
            length = self.latent_dim // self.unet_channels
            if length % (2 ** (len(self.unet_multipliers) - 1)) != 0:
                raise ValueError(
                    "latent_dim / unet_channels must be divisible by 2 ** (len(unet_multipliers) - 1)"
                )
        if self.generator_type == "linear" and self.discrete_actions:
            raise ValueError("the linear generator only supports continuous actions")
        return self


class LangevinConfig(_Config):
    """Unadjusted Langevin settings: step size s, number of steps N, guidance weight w."""

    step_size: float = Field(TRAIN_STEP_SIZE, gt=0)
    num_steps: int = Field(TRAIN_STEPS_FRESH, ge=1)
    guidance_weight: float = Field(1.0, ge=0)
    noise_scale: Literal[0, 1] = 1


class TrainerConfig(_Config):
    iterations: int = Field(ITERATIONS, ge=1)
    batch_size: int = Field(BATCH_SIZE, ge=1)
    lr_prior: float = Field(LEARNING_RATE, ge=0)
    lr_generator: float = Field(LEARNING_RATE, ge=0)
    lr_return: float = Field(LEARNING_RATE, ge=0)
    sampler: LangevinConfig = LangevinConfig(num_steps=TRAIN_STEPS_PMC)  # replaced when pmc_enabled is off
    pmc_enabled: bool = USE_PMC
    optimizer: Literal["adam", "sgd"] = OPTIMIZER
    grad_clip: float | None = Field(GRAD_CLIP_NORM, gt=0)
    clip_per_group: bool = CLIP_PER_GROUP  # clip prior, generator and return head on their own norms
    seed: int = 0
    checkpoint_every: int = Field(CHECKPOINT_EVERY, ge=1)
    threads: int = Field(THREADS, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _default_sampler(cls, data: Any):
        # warm-started chains need far fewer steps than fresh ones
        if not isinstance(data, dict):
            return data
        sampler = data.get("sampler")
        steps = TRAIN_STEPS_PMC if data.get("pmc_enabled", USE_PMC) else TRAIN_STEPS_FRESH
        if sampler is None:
            data = {**data, "sampler": LangevinConfig(num_steps=steps)}
        elif isinstance(sampler, dict) and "num_steps" not in sampler:
            data = {**data, "sampler": {**sampler, "num_steps": steps}}
        return data


class EvalConfig(_Config):
    episodes: int = Field(EVAL_EPISODES, ge=1)
    guidance_weights: tuple[float, ...] = GUIDANCE_WEIGHTS
    sampler: LangevinConfig = LangevinConfig(step_size=PLAN_STEP_SIZE, num_steps=PLAN_STEPS)
    deterministic_actions: bool = DETERMINISTIC_ACTIONS
    seed: int = 0

    @model_validator(mode="after")
    def _check_weights(self):
        if not self.guidance_weights or min(self.guidance_weights) < 0:
            raise ValueError("guidance_weights must be non-empty and >= 0")
        return self


class RunConfig(_Config):
    """Everything one CLI invocation needs, after precedence has been applied."""

    command: str
    env_id: str | None = None
    dataset_path: Path | None = None
    checkpoint_path: Path | None = None
    seed: int | None = None
    model: dict[str, Any] = Field(default_factory=dict)
    trainer: dict[str, Any] = Field(default_factory=dict)
    eval: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_paths(self):
        if self.command == "train":
            if self.dataset_path is None:
                raise ValueError("train needs a dataset path")
            if not Path(self.dataset_path).exists():
                raise ValueError(f"dataset not found: {self.dataset_path}")
        if self.command == "eval":
            if self.checkpoint_path is None or not Path(self.checkpoint_path).exists():
                raise ValueError(f"checkpoint not found: {self.checkpoint_path}")
        if self.command in ("gen-data", "train") and self.seed is None:
            raise ValueError("a seed is required (flag, config file or LPT_SEED)")
        return self


def load_config_file(path: str | Path | None) -> dict[str, Any]:
    """Read a JSON config file with optional ``model``/``trainer``/``eval`` sections."""
    if path is None:
        return {}
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError([f"config file not found: {path}"]) from e
    except json.JSONDecodeError as e:
        raise ConfigError([f"config file {path} is not valid JSON: {e}"]) from e
    if not isinstance(data, dict):
        raise ConfigError([f"config file {path} must contain a JSON object"])
    unknown = set(data) - {"model", "trainer", "eval", "seed", "env_id"}
    if unknown:
        raise ConfigError([f"unknown config section(s): {', '.join(sorted(unknown))}"])
    return data


def _overlay(base: dict[str, Any], layer: dict[str, Any], drop_none: bool) -> dict[str, Any]:
    merged = dict(base)
    for key, value in layer.items():
        if value is None and drop_none:
            continue
        if isinstance(value, dict):
            value = _overlay(merged.get(key) if isinstance(merged.get(key), dict) else {}, value, drop_none)
            if not value and drop_none:
                continue
        merged[key] = value
    return merged


def merge_sections(defaults: dict[str, Any], file_values: dict[str, Any], flags: dict[str, Any]) -> dict[str, Any]:
    """
    CLI flag > config file > built-in default, merged key by key into nested
    sections such as ``sampler``. ``None`` flags do not override; a ``null``
    in the config file does.
    """
    return _overlay(_overlay(defaults, file_values, drop_none=False), flags, drop_none=True)
