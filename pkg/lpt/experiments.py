"""
Multi-seed experiments on the built-in environments: stitching in the grid
maze, contingent play in Connect Four, and the prior ablation.

Every seed generates its own dataset, trains the LPT and the matched-budget
behavior-cloning baseline, and evaluates both on identical episode streams.
"""
import math
from pathlib import Path

import pandas as pd
import torch

from lpt import config, console
from lpt.agent import PlanningAgent, evaluate, evaluate_baseline, train_baseline
from lpt.config import EvalConfig, ModelConfig, TrainerConfig
from lpt.envs import audit_dataset, generate_dataset, make_env
from lpt.envs.dataset import OfflineDataset
from lpt.errors import ValidationError
from lpt.model import LatentPlanTransformer
from lpt.trainer import fit

EXPERIMENTS = ("stitching", "contingency", "ablation")

# Experiment Configuration
SETTINGS = {
    "stitching": {"env_id": "gridmaze-v0", "n": 2_000, "episodes": 100},
    "contingency": {"env_id": "connect4-v0", "n": 2_000, "episodes": 200},
    "ablation": {"env_id": "gridmaze-v0", "n": 2_000, "episodes": 100},
}
FAR_START_LIMIT = 0.02
STITCHING_SUCCESS = 0.5
WIN_FRACTION = 0.8  # share of seeds in which a pairwise comparison must hold
ABLATION_FRACTION = 0.6


def _required(seeds: int, fraction: float) -> int:
    return math.ceil(fraction * seeds - 1e-9)


def _model_config(dataset: OfflineDataset, overrides: dict) -> ModelConfig:
    return ModelConfig.build(
        state_dim=dataset.state_dim,
        action_dim=dataset.action_size,
        discrete_actions=dataset.discrete,
        **overrides,
    )


def _train_lpt(dataset: OfflineDataset, model_cfg: ModelConfig, trainer_cfg: TrainerConfig) -> PlanningAgent:
    torch.manual_seed(trainer_cfg.seed)
    model, _ = fit(dataset, LatentPlanTransformer(model_cfg), trainer_cfg)
    model.eval()
    return PlanningAgent(model, dataset.stats, dataset.env_id, float(dataset.returns.max()))


def _seed_run(
    name: str,
    seed: int,
    settings: dict,
    model_overrides: dict,
    trainer_cfg: TrainerConfig,
    eval_cfg: EvalConfig,
) -> dict:
    env_id = settings["env_id"]
    console.print_section(f"{name.upper()} - SEED {seed}")
    dataset = generate_dataset(env_id, settings["n"], seed)
    audit = audit_dataset(dataset)
    env = make_env(env_id)
    y_target = float(dataset.returns.max())
    trainer_cfg = trainer_cfg.updated(seed=seed)
    eval_cfg = eval_cfg.updated(seed=seed, episodes=settings["episodes"])
    row: dict = {"seed": seed, "y_target": y_target}
    if env_id == "gridmaze-v0":
        row["far_start_success_fraction"] = audit["far_start_success_fraction"]

    model_cfg = _model_config(dataset, model_overrides)
    agent = _train_lpt(dataset, model_cfg, trainer_cfg)
    weights = eval_cfg.guidance_weights if name != "ablation" else (1.0,)
    summaries, _ = evaluate(env, agent, y_target, eval_cfg.episodes, weights, eval_cfg)
    for w, summary in summaries.items():
        row[f"lpt_w{w}_success"] = summary["success_rate"]
        row[f"lpt_w{w}_return"] = summary["mean_return"]

    if name == "ablation":
        identity_cfg = model_cfg.updated(prior_type="identity")
        identity = _train_lpt(dataset, identity_cfg, trainer_cfg)
        summary = evaluate(env, identity, y_target, eval_cfg.episodes, (1.0,), eval_cfg)[0]["1"]
        row["identity_success"] = summary["success_rate"]
        row["identity_return"] = summary["mean_return"]
    else:
        policy = train_baseline(dataset, model_cfg, trainer_cfg)
        summary, _ = evaluate_baseline(env, policy, y_target, eval_cfg.episodes, eval_cfg)
        row["bc_success"] = summary["success_rate"]
        row["bc_return"] = summary["mean_return"]
    console.success(", ".join(f"{k}={v:.3g}" for k, v in row.items() if isinstance(v, float)))
    return row


def _criterion(value: float, required: float, passed: bool) -> dict:
    return {"value": value, "required": required, "passed": bool(passed)}


def _criteria(name: str, frame: pd.DataFrame) -> dict:
    seeds = len(frame)
    checks = {}
    if name == "stitching":
        far = float(frame["far_start_success_fraction"].max())
        checks["far_start_success_fraction"] = _criterion(far, FAR_START_LIMIT, far <= FAR_START_LIMIT)
        rate = float(frame["lpt_w1_success"].mean())
        checks["goal_reach_rate"] = _criterion(rate, STITCHING_SUCCESS, rate >= STITCHING_SUCCESS)
        beats = int((frame["lpt_w1_success"] > frame["bc_success"]).sum())
        need = _required(seeds, WIN_FRACTION)
        checks["lpt_beats_bc_seeds"] = _criterion(beats, need, beats >= need)
        if "lpt_w4_success" in frame:
            ordered = int((frame["lpt_w4_success"] >= frame["lpt_w1_success"]).sum())
            checks["guidance_ordering_seeds"] = _criterion(ordered, need, ordered >= need)
    elif name == "contingency":
        beats = int((frame["lpt_w1_return"] > frame["bc_return"]).sum())
        need = _required(seeds, WIN_FRACTION)
        checks["lpt_beats_bc_seeds"] = _criterion(beats, need, beats >= need)
    else:
        held = int((frame["identity_success"] <= frame["lpt_w1_success"]).sum())
        need = _required(seeds, ABLATION_FRACTION)
        checks["identity_not_better_seeds"] = _criterion(held, need, held >= need)
    return checks


def run_experiment(
    name: str,
    seeds: int = config.EVAL_SEEDS,
    trainer_cfg: TrainerConfig | None = None,
    eval_cfg: EvalConfig | None = None,
    model_overrides: dict | None = None,
    n: int | None = None,
    episodes: int | None = None,
    out_dir: str | Path | None = None,
) -> dict:
    """
    Run one named experiment over ``seeds`` seeds (0 .. seeds - 1).

    Args:
        name: "stitching", "contingency" or "ablation"
        trainer_cfg: Training budget shared by the LPT and the baseline
        model_overrides: ModelConfig fields applied on top of the defaults
        n, episodes: Dataset size and evaluation episodes per seed (defaults per experiment)
        out_dir: Where the per-seed CSV and the JSON report are written

    Returns:
        Report with per-seed rows, criteria and an overall ``passed`` flag
    """
    if name not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    if seeds < 1:
        raise ValidationError("seeds must be >= 1")
    if name == "ablation" and (model_overrides or {}).get("prior_type", config.PRIOR_TYPE) == "identity":
        raise ValidationError("the ablation compares a learned prior against identity; choose prior unet or mlp")
    settings = dict(SETTINGS[name])
    if n is not None:
        settings["n"] = n
    if episodes is not None:
        settings["episodes"] = episodes
    trainer_cfg = trainer_cfg or TrainerConfig()
    eval_cfg = eval_cfg or EvalConfig()
    rows = [_seed_run(name, s, settings, model_overrides or {}, trainer_cfg, eval_cfg) for s in range(seeds)]
    frame = pd.DataFrame(rows)
    criteria = _criteria(name, frame)
    report = {
        "experiment": name,
        "env_id": settings["env_id"],
        "dataset_size": settings["n"],
        "episodes": settings["episodes"],
        "iterations": trainer_cfg.iterations,
        "seeds": rows,
        "criteria": criteria,
        "passed": all(c["passed"] for c in criteria.values()),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out / f"{name}_seeds.csv", index=False)
        console.save_json(report, out / f"{name}_report.json")
    return report
