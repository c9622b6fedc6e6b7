"""Figure rendering for search reports.

Figures are written next to the delimited artifacts; they are a convenience
view, never an input to anything downstream.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def pareto_figure(series, baseline, path: str | Path) -> None:
    """Accuracy/cycles fronts per series plus the static baseline square."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, front in series:
        cycles = [p.cycles for p in front]
        accs = [p.accuracy for p in front]
        ax.plot(cycles, accs, marker="o", markersize=4, label=label)
    if baseline is not None:
        ax.plot([baseline[1]], [baseline[0]], marker="s", markersize=9,
                color="black", linestyle="none", label="static baseline")
    ax.set_xscale("log")
    ax.set_xlabel("cycles")
    ax.set_ylabel("proxy accuracy")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def predictor_history_figure(histories: dict, path: str | Path) -> None:
    """Cycle-predictor MAPE versus training-set size over the outer loop."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for seed, history in histories.items():
        sizes = []
        mapes = []
        for rec in history.iterations:
            if rec.predictor_eval and rec.predictor_eval.get("cycles_mape") is not None:
                sizes.append(rec.training_size)
                mapes.append(rec.predictor_eval["cycles_mape"])
        if sizes:
            ax.plot(sizes, mapes, marker="o", label=f"seed {seed}")
    ax.set_xlabel("training examples")
    ax.set_ylabel("cycle-count MAPE (%)")
    ax.grid(True, alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def predictor_curve_figure(curve, path: str | Path) -> None:
    """Fig-2-style MAPE and tau curves over training-set sizes."""
    sizes = [e.n_train for e in curve]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(sizes, [e.mape for e in curve], marker="o")
    ax1.set_xlabel("training examples")
    ax1.set_ylabel("MAPE (%)")
    ax1.grid(True, alpha=0.3)
    ax2.plot(sizes, [e.kendall_tau for e in curve], marker="o", color="tab:green")
    ax2.set_xlabel("training examples")
    ax2.set_ylabel("Kendall tau")
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
