"""
Command-line interface: ``lpt gen-data | train | eval | verify | export-metrics | experiment``.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""
import argparse
import json
import sys
from pathlib import Path

import torch

from lpt import __version__, config, console
from lpt.agent import create_agent, evaluate
from lpt.config import (
    EvalConfig,
    ModelConfig,
    RunConfig,
    TrainerConfig,
    load_config_file,
    merge_sections,
    seed_from_env,
)
from lpt.envs import ENV_IDS, audit_dataset, generate_dataset, load_dataset, make_env, save_dataset
from lpt.errors import ConfigError, DatasetFormatError, LPTError, ValidationError
from lpt.experiments import EXPERIMENTS, run_experiment
from lpt.model import LatentPlanTransformer
from lpt.trainer import Trainer, fit
from lpt.verify import SUITES, run_suite
from lpt.visualize import export_metrics

USAGE_ERRORS = (ConfigError, ValidationError, DatasetFormatError)


def _resolve_seed(flag: int | None, file_values: dict) -> int | None:
    if flag is not None:
        return flag
    if file_values.get("seed") is not None:
        return int(file_values["seed"])
    return seed_from_env()


def _print_resolved(title: str, payload: dict) -> None:
    console.print_section(title)
    console.info(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _trainer_flags(args) -> dict:
    flags = {
        "iterations": args.iterations,
        "batch_size": args.batch_size,
        "threads": args.threads,
        "checkpoint_every": args.checkpoint_every,
        "pmc_enabled": False if args.no_pmc else None,
        "optimizer": args.optimizer,
        "sampler": {"step_size": args.langevin_step_size, "num_steps": args.langevin_steps},
    }
    if args.lr is not None:
        flags.update(lr_prior=args.lr, lr_generator=args.lr, lr_return=args.lr)
    return flags


def _model_flags(args) -> dict:
    return {
        "latent_dim": args.latent_dim,
        "context_length": args.context_length,
        "prior_type": args.prior,
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    file_values = load_config_file(args.config)
    run = RunConfig.build(
        command="gen-data",
        env_id=args.env or file_values.get("env_id"),
        seed=_resolve_seed(args.seed, file_values),
    )
    if run.env_id not in ENV_IDS:
        raise ValidationError(f"unknown env id {run.env_id!r}; choose from {', '.join(ENV_IDS)}")
    options = {
        k: v
        for k, v in {
            "noise_prob": args.noise_prob,
            "max_segment": args.max_segment,
            "behavior_mix": args.behavior_mix,
            "opponent_epsilon": args.opponent_epsilon,
        }.items()
        if v is not None
    }
    _print_resolved("DATASET GENERATION", {"env_id": run.env_id, "n": args.n, "seed": run.seed, **options})
    dataset = generate_dataset(run.env_id, args.n, run.seed, **options)
    path = save_dataset(dataset, args.out)
    console.success(f"Wrote {len(dataset)} trajectories to: {path}")

    console.print_section("DATASET AUDIT")
    audit = audit_dataset(dataset)
    for key, value in audit.items():
        if isinstance(value, dict):
            console.info(f"{key + ':':<28}")
            for k, v in value.items():
                console.info(f"    {k:<24} {v}")
        else:
            console.info(f"{key + ':':<28} {value:.4g}" if isinstance(value, float) else f"{key + ':':<28} {value}")
    return 0


def cmd_train(args) -> int:
    file_values = load_config_file(args.config)
    seed = _resolve_seed(args.seed, file_values)
    run = RunConfig.build(
        command="train",
        dataset_path=args.dataset,
        checkpoint_path=args.out,
        seed=seed,
        model=merge_sections({}, file_values.get("model", {}), _model_flags(args)),
        trainer=merge_sections({}, file_values.get("trainer", {}), _trainer_flags(args)),
    )
    dataset = load_dataset(run.dataset_path)
    trainer_cfg = TrainerConfig.build(**{**run.trainer, "seed": run.seed})

    if args.resume:
        trainer = Trainer.resume(args.resume, dataset, trainer_cfg)
        model = trainer.model
        if run.model:
            console.warn("Model options are ignored when resuming; the checkpoint's architecture is used")
        console.info(f"Resuming from iteration {trainer.iteration}")
    else:
        model_cfg = ModelConfig.build(
            state_dim=dataset.state_dim,
            action_dim=dataset.action_size,
            discrete_actions=dataset.discrete,
            **run.model,
        )
        torch.manual_seed(run.seed)
        model = LatentPlanTransformer(model_cfg)
        trainer = Trainer(model, dataset, trainer_cfg)

    _print_resolved(
        "RESOLVED CONFIGURATION",
        {
            "dataset": run.dataset_path,
            "checkpoint": run.checkpoint_path,
            "model": model.cfg.model_dump(),
            "trainer": trainer_cfg.model_dump(),
        },
    )
    console.print_section("TRAINING")
    _, log = fit(dataset, model, trainer_cfg, run.checkpoint_path, args.log, trainer=trainer)
    console.success(f"Checkpoint saved to: {run.checkpoint_path}")
    if not log.empty:
        last = log.iloc[-1]
        console.info(f"Final action NLL {last['action_nll']:.4f}, return NLL {last['return_nll']:.4f}")
    return 0


def cmd_eval(args) -> int:
    file_values = load_config_file(args.config)
    seed = _resolve_seed(args.seed, file_values)
    eval_flags = {"episodes": args.episodes, "seed": seed, "deterministic_actions": False if args.stochastic else None}
    if args.weights:
        eval_flags["guidance_weights"] = tuple(args.weights)
    run = RunConfig.build(
        command="eval",
        checkpoint_path=args.checkpoint,
        env_id=args.env or file_values.get("env_id"),
        seed=seed,
        eval=merge_sections({}, file_values.get("eval", {}), eval_flags),
    )
    eval_cfg = EvalConfig.build(**run.eval)
    if args.steps is not None or args.step_size is not None:
        sampler = eval_cfg.sampler.updated(num_steps=args.steps, step_size=args.step_size)
        eval_cfg = eval_cfg.updated(sampler=sampler.model_dump())
    agent = create_agent(run.checkpoint_path)
    env_id = run.env_id or agent.env_id
    if env_id is None:
        raise ValidationError("no env id given and the checkpoint does not name one")
    env = make_env(env_id)
    agent.check_env(env)
    y_target = agent.resolve_target(args.target)

    _print_resolved(
        "EVALUATION",
        {"checkpoint": run.checkpoint_path, "env_id": env_id, "y_target": y_target, **eval_cfg.model_dump()},
    )
    summaries, episodes = evaluate(env, agent, y_target, eval_cfg.episodes, eval_cfg.guidance_weights, eval_cfg)
    rows = [{"w": w, **s} for w, s in summaries.items()]
    console.print_table(rows, ["w", "episodes", "success_rate", "mean_return", "std_return", "mean_length"])

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "checkpoint": str(run.checkpoint_path),
        "env_id": env_id,
        "y_target": y_target,
        "episodes": eval_cfg.episodes,
        "seed": eval_cfg.seed,
        "sampler": eval_cfg.sampler.model_dump(),
        "weights": summaries,
    }
    console.save_json(report, out / "eval_report.json")
    episodes.to_csv(out / "eval_episodes.csv", index=False)
    console.success(f"Per-episode results saved to: {out / 'eval_episodes.csv'}")
    return 0


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else (seed_from_env() or 0)
    console.print_section(f"VERIFY: {args.suite}")
    results = run_suite(args.suite, seed=seed, corrupt_op=args.corrupt_op)
    console.print_table(
        [{**r.to_dict(), "passed": "✓" if r.passed else "❌"} for r in results],
        ["name", "passed", "value", "threshold", "seconds"],
    )
    if args.out:
        console.save_json({"suite": args.suite, "seed": seed, "results": [r.to_dict() for r in results]}, args.out)
    failed = [r.name for r in results if not r.passed]
    if failed:
        console.error(f"{len(failed)} of {len(results)} checks failed: {', '.join(failed)}")
        return 1
    console.success(f"All {len(results)} checks passed")
    return 0


def cmd_export_metrics(args) -> int:
    if args.log is None and not args.reports:
        raise ValidationError("export-metrics needs --log and/or --reports")
    console.print_section("EXPORT METRICS")
    export_metrics(args.log, args.reports or [], args.out_dir)
    return 0


def cmd_experiment(args) -> int:
    file_values = load_config_file(args.config)
    trainer_cfg = TrainerConfig.build(
        **merge_sections({}, file_values.get("trainer", {}), {"iterations": args.iterations, "threads": args.threads})
    )
    eval_cfg = EvalConfig.build(**file_values.get("eval", {}))
    model_overrides = merge_sections({}, file_values.get("model", {}), {"prior_type": args.prior})
    _print_resolved(
        f"EXPERIMENT: {args.name}",
        {
            "seeds": args.seeds,
            "trainer": trainer_cfg.model_dump(),
            "eval": eval_cfg.model_dump(),
            "model": model_overrides,
        },
    )
    report = run_experiment(
        args.name,
        seeds=args.seeds,
        trainer_cfg=trainer_cfg,
        eval_cfg=eval_cfg,
        model_overrides=model_overrides,
        n=args.n,
        episodes=args.episodes,
        out_dir=args.out_dir,
    )
    console.print_section("CRITERIA")
    for name, check in report["criteria"].items():
        line = f"{name}: {check['value']:.4g} (required {check['required']})"
        if check["passed"]:
            console.success(line)
        else:
            console.warn(line)
    return 0 if report["passed"] else 1


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "verify": cmd_verify,
    "export-metrics": cmd_export_metrics,
    "experiment": cmd_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpt", description="Latent Plan Transformer")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate an offline dataset")
    gen.add_argument("--env", help=f"one of {', '.join(ENV_IDS)}")
    gen.add_argument("--n", type=int, required=True, help="number of trajectories")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", required=True, help="dataset JSONL path")
    gen.add_argument("--config", help="JSON config file")
    gen.add_argument("--noise-prob", type=float, help="gridmaze: probability of a random move")
    gen.add_argument("--max-segment", type=int, help="gridmaze: longest waypoint segment")
    gen.add_argument("--behavior-mix", type=float, help="connect4: share of heuristic moves in the behavior policy")
    gen.add_argument("--opponent-epsilon", type=float, help="connect4: opponent's random-move probability")

    train = sub.add_parser("train", help="learn a model from an offline dataset")
    train.add_argument("--dataset", required=True)
    train.add_argument("--out", default=f"{config.OUTPUT_DIR}/model.pt", help="checkpoint path")
    train.add_argument("--log", default=f"{config.OUTPUT_DIR}/{config.TRAINING_LOG}", help="training log CSV")
    train.add_argument("--config", help="JSON config file")
    train.add_argument("--resume", help="checkpoint to continue from")
    train.add_argument("--seed", type=int)
    train.add_argument("--iterations", type=int)
    train.add_argument("--batch-size", type=int)
    train.add_argument("--lr", type=float, help="learning rate for all three components")
    train.add_argument("--no-pmc", action="store_true", help="fresh Langevin chains every iteration")
    train.add_argument("--langevin-step-size", type=float, help="training Langevin step size s")
    train.add_argument("--langevin-steps", type=int, help="training Langevin steps N")
    train.add_argument("--optimizer", choices=["adam", "sgd"])
    train.add_argument("--checkpoint-every", type=int)
    train.add_argument("--threads", type=int)
    train.add_argument("--latent-dim", type=int)
    train.add_argument("--context-length", type=int)
    train.add_argument("--prior", choices=["unet", "identity", "mlp"])

    ev = sub.add_parser("eval", help="plan and roll out a trained model")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--env", help="defaults to the checkpoint's env")
    ev.add_argument("--target", type=float, help="raw target return (default: dataset maximum)")
    ev.add_argument("--episodes", type=int)
    ev.add_argument("--weights", type=float, nargs="+", help="guidance weights w")
    ev.add_argument("--steps", type=int, help="Langevin steps for planning")
    ev.add_argument("--step-size", type=float, help="Langevin step size for planning")
    ev.add_argument("--stochastic", action="store_true", help="sample actions instead of taking the mode")
    ev.add_argument("--seed", type=int)
    ev.add_argument("--config", help="JSON config file")
    ev.add_argument("--out-dir", default=config.OUTPUT_DIR)

    ver = sub.add_parser("verify", help="run the numerical self-checks")
    ver.add_argument("--suite", choices=SUITES, default="all")
    ver.add_argument("--seed", type=int)
    ver.add_argument("--out", help="write the results as JSON")
    ver.add_argument("--corrupt-op", help=argparse.SUPPRESS)

    exp = sub.add_parser("export-metrics", help="summarize logs and reports, render plots")
    exp.add_argument("--log", help="training log CSV")
    exp.add_argument("--reports", nargs="*", help="evaluation report JSON files")
    exp.add_argument("--out-dir", default=config.OUTPUT_DIR)

    run = sub.add_parser("experiment", help="multi-seed experiment with baseline comparison")
    run.add_argument("name", choices=EXPERIMENTS)
    run.add_argument("--seeds", type=int, default=config.EVAL_SEEDS)
    run.add_argument("--iterations", type=int)
    run.add_argument("--n", type=int, help="dataset size per seed")
    run.add_argument("--episodes", type=int, help="evaluation episodes per seed")
    run.add_argument("--prior", choices=["unet", "identity", "mlp"])
    run.add_argument("--threads", type=int)
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--out-dir", default=config.OUTPUT_DIR)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    console.set_level(args.log_level or config.LOG_LEVEL)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        for problem in e.problems:
            console.error(problem)
        return 2
    except USAGE_ERRORS as e:
        console.error(str(e))
        return 2
    except LPTError as e:
        console.error(str(e))
        return 1
    except Exception as e:
        console.error(f"{type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
