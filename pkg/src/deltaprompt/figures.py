"""Matplotlib renderings of run metrics and delta-token embeddings.

Figures are written next to the delimited outputs they visualize.  They are
a convenience for inspection only: nothing downstream reads them, and they
are excluded from the byte-determinism guarantees.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import RunMetrics
from .profiling import ProfilePoints, SilhouetteReport, pca_project

__all__ = ["render_training_figures", "render_profile_figures"]

_DPI = 150


def render_training_figures(metrics: RunMetrics, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trained = [r for r in metrics.records if r.total_loss is not None]
    epochs = [r.epoch for r in trained]
    paths = []

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, [r.total_loss for r in trained], marker="o", label="total")
    ax.plot(epochs, [r.ce_loss for r in trained], marker="s", label="cross entropy")
    ax.plot(epochs, [r.adtriplet_loss for r in trained], marker="^", label="adv. triplet")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean episode loss")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = out / "loss_curves.png"
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    paths.append(path)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot([r.epoch for r in metrics.records],
             [r.silhouette for r in metrics.records], marker="o", color="tab:purple")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("mean silhouette over delta tokens")
    ax1.grid(alpha=0.3)
    last = metrics.records[-1]
    names = [a.value for a in last.per_augmentation]
    vals = list(last.per_augmentation.values())
    ax2.barh(range(len(names)), vals, color="tab:blue")
    ax2.set_yticks(range(len(names)), names, fontsize=7)
    ax2.set_xlabel(f"silhouette at epoch {last.epoch}")
    ax2.grid(alpha=0.3, axis="x")
    fig.tight_layout()
    path = out / "silhouette.png"
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    paths.append(path)
    return paths


def render_profile_figures(report: SilhouetteReport, profile: ProfilePoints,
                           out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = plt.subplots(figsize=(6, 4.5))
    names = [a.value for a in report.per_label]
    vals = list(report.per_label.values())
    ax.barh(range(len(names)), vals, color="tab:blue")
    ax.set_yticks(range(len(names)), names, fontsize=7)
    ax.set_xlabel(f"silhouette by augmentation (overall {report.overall:+.3f})")
    ax.grid(alpha=0.3, axis="x")
    fig.tight_layout()
    path = out / "silhouette_by_augmentation.png"
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    paths.append(path)

    pca = pca_project(profile.points, out_dim=2)
    proj = pca.projected
    if proj.shape[1] < 2:  # rank-deficient cloud: pad so the scatter still renders
        proj = np.hstack([proj, np.zeros((proj.shape[0], 2 - proj.shape[1]))])
    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    augs = list(dict.fromkeys(profile.augmentations))
    cmap = plt.get_cmap("tab20", len(augs))
    for i, aug in enumerate(augs):
        mask = np.array([a == aug for a in profile.augmentations])
        ax.scatter(proj[mask, 0], proj[mask, 1], s=12, color=cmap(i), label=aug.value)
    ratios = pca.explained_variance_ratio
    ax.set_xlabel(f"pc1 ({ratios[0]:.0%})" if ratios.size > 0 else "pc1")
    ax.set_ylabel(f"pc2 ({ratios[1]:.0%})" if ratios.size > 1 else "pc2")
    ax.legend(fontsize=6, ncol=2, framealpha=0.8)
    fig.tight_layout()
    path = out / "delta_embedding_pca.png"
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    paths.append(path)
    return paths
