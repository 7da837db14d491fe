"""Static matplotlib figures for reports, training logs and ablation runs.

Everything renders through the Agg backend straight to files; nothing
here opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import BenchReport
from .mppo import MetricsRow


def makespan_figure(report: BenchReport, path) -> None:
    """Grouped bar chart of makespans, one group per instance."""
    instances = sorted({row.instance for row in report.rows})
    policies = list(dict.fromkeys(row.policy for row in report.rows))
    by_key = {(row.instance, row.policy): row.makespan for row in report.rows}
    width = 0.8 / max(len(policies), 1)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.8 * len(instances)), 4.0))
    xs = np.arange(len(instances))
    for k, policy in enumerate(policies):
        heights = [by_key.get((inst, policy), 0) for inst in instances]
        ax.bar(xs + (k - (len(policies) - 1) / 2) * width, heights, width, label=policy)
    ax.set_xticks(xs)
    ax.set_xticklabels(instances, rotation=30, ha="right")
    ax.set_ylabel("makespan")
    ax.legend(fontsize=8, ncols=min(len(policies), 4))
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def training_figure(rows: list[MetricsRow], path) -> None:
    """Episode length/reward and loss diagnostics against decision steps."""
    steps = [r.step for r in rows]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    axes[0, 0].plot(steps, [r.ep_len for r in rows])
    axes[0, 0].set_ylabel("episode length")
    axes[0, 1].plot(steps, [r.ep_rew for r in rows])
    axes[0, 1].set_ylabel("episode reward")
    axes[1, 0].plot(steps, [r.entropy for r in rows], label="entropy")
    axes[1, 0].plot(steps, [r.kl for r in rows], label="approx KL")
    axes[1, 0].set_ylabel("policy stats")
    axes[1, 0].legend(fontsize=8)
    axes[1, 1].plot(steps, [r.loss for r in rows], label="total loss")
    axes[1, 1].plot(steps, [r.vf_loss for r in rows], label="value loss")
    axes[1, 1].set_ylabel("loss")
    axes[1, 1].legend(fontsize=8)
    for ax in axes[1]:
        ax.set_xlabel("decision steps")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def ablation_figure(curves: dict[str, list[MetricsRow]], path) -> None:
    """Episode-length curves of several ablation arms on shared axes."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for mode, rows in curves.items():
        ax.plot([r.step for r in rows], [r.ep_len for r in rows], label=mode)
    ax.set_xlabel("decision steps")
    ax.set_ylabel("mean episode length")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
