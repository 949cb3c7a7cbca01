"""
Visualization utilities for training logs and evaluation reports
"""
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from lpt import console  # noqa: E402
from lpt.errors import ValidationError  # noqa: E402

LOSS_COLUMNS = ("action_nll", "return_nll")
GRAD_COLUMNS = ("grad_norm_prior", "grad_norm_generator", "grad_norm_return")


def _smooth(values: pd.Series, window: int) -> pd.Series:
    return values.rolling(window, min_periods=1).mean()


def plot_training_curves(log: pd.DataFrame, output_file: str | Path = "training_curves.png", window: int = 50):
    """
    Plot the losses and per-component gradient norms of a training log.

    Args:
        log: Training log with one TrainingRecord per row
        output_file: Path to save the plot
        window: Rolling-mean window applied to every curve
    """
    missing = [c for c in (*LOSS_COLUMNS, *GRAD_COLUMNS, "iteration") if c not in log]
    if missing:
        raise ValidationError(f"training log is missing columns: {', '.join(missing)}")
    if log.empty:
        console.warn("No training records to plot")
        return

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(12, 5))

    for column, color in zip(LOSS_COLUMNS, ("steelblue", "darkorange")):
        ax1.plot(log["iteration"], _smooth(log[column], window), color=color, label=column.replace("_", " "))
    ax1.set_xlabel("Iteration")
    ax1.set_ylabel("Negative log-likelihood")
    ax1.set_title("Training Losses")
    ax1.legend()
    ax1.grid(alpha=0.3)

    for column, color in zip(GRAD_COLUMNS, ("green", "purple", "red")):
        ax2.plot(log["iteration"], _smooth(log[column], window), color=color, label=column.replace("grad_norm_", ""))
    ax2.set_xlabel("Iteration")
    ax2.set_ylabel("Gradient norm")
    ax2.set_yscale("log")
    ax2.set_title("Gradient Norms per Component")
    ax2.legend()
    ax2.grid(alpha=0.3)

    plt.tight_layout()
    Path(output_file).parent.mkdir(parents=True, exist_ok=True)
    plt.savefig(output_file, dpi=150, bbox_inches="tight")
    plt.close(fig)

    console.success(f"Training curves saved to: {output_file}")


def plot_eval_summary(report: dict, output_file: str | Path = "eval_summary.png"):
    """
    Bar chart of success rate and mean return per guidance weight.

    Args:
        report: Evaluation report with a ``weights`` mapping (and optionally ``baseline``)
        output_file: Path to save the plot
    """
    weights = report.get("weights", {})
    if not weights:
        console.warn("No evaluation results to plot")
        return
    labels = [f"w={w}" for w in weights]
    success = [s["success_rate"] for s in weights.values()]
    returns = [s["mean_return"] for s in weights.values()]
    colors = ["steelblue"] * len(labels)
    if report.get("baseline"):
        labels.append("BC")
        success.append(report["baseline"]["success_rate"])
        returns.append(report["baseline"]["mean_return"])
        colors.append("gray")

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(12, 5))
    x = np.arange(len(labels))

    ax1.bar(x, success, color=colors, alpha=0.7, edgecolor="black")
    ax1.set_xticks(x)
    ax1.set_xticklabels(labels)
    ax1.set_ylim(0, 1)
    ax1.set_ylabel("Success rate")
    ax1.set_title(f"Success at target return {report.get('y_target', 'N/A')}")
    ax1.grid(axis="y", alpha=0.3)

    ax2.bar(x, returns, color=colors, alpha=0.7, edgecolor="black")
    ax2.set_xticks(x)
    ax2.set_xticklabels(labels)
    ax2.set_ylabel("Mean episode return")
    ax2.set_title("Mean Return")
    ax2.axhline(y=0, color="black", linestyle="-", linewidth=0.5)
    ax2.grid(axis="y", alpha=0.3)

    plt.tight_layout()
    Path(output_file).parent.mkdir(parents=True, exist_ok=True)
    plt.savefig(output_file, dpi=150, bbox_inches="tight")
    plt.close(fig)

    console.success(f"Evaluation summary saved to: {output_file}")


def summarize_training(log: pd.DataFrame, tail: int = 100) -> dict:
    """Final and best losses plus mean gradient norms over the last ``tail`` iterations."""
    if log.empty:
        return {"iterations": 0}
    last = log.tail(tail)
    summary = {
        "iterations": int(log["iteration"].max()),
        "wall_clock_total": float(log["wall_clock"].sum()),
    }
    for column in LOSS_COLUMNS:
        summary[f"{column}_final"] = float(last[column].mean())
        summary[f"{column}_best"] = float(log[column].min())
    for column in GRAD_COLUMNS:
        summary[f"{column}_final"] = float(last[column].mean())
    return summary


def export_metrics(
    log_path: str | Path | None,
    report_paths: list[str | Path],
    out_dir: str | Path,
) -> dict:
    """
    Summarize a training log and evaluation reports into ``metrics.json`` and render their plots.

    Returns:
        The metrics summary
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics: dict = {}
    if log_path is not None:
        log = pd.read_csv(log_path)
        metrics["training"] = summarize_training(log)
        plot_training_curves(log, out / "training_curves.png")
    evaluations = {}
    for path in report_paths:
        with open(path) as f:
            report = json.load(f)
        name = Path(path).stem
        evaluations[name] = {
            "y_target": report.get("y_target"),
            "weights": report.get("weights", {}),
            "baseline": report.get("baseline"),
        }
        plot_eval_summary(report, out / f"{name}.png")
    if evaluations:
        metrics["evaluations"] = evaluations
    console.save_json(metrics, out / "metrics.json")
    return metrics
