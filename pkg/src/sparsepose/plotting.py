"""Report figures written next to the CSV / JSON outputs."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "sparsepose",
}

# no timestamps / version strings, so identical inputs give identical bytes
_PNG_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)


def plot_tradeoff(rows: Sequence, path, title: str | None = None) -> None:
    """Coverage versus GFLOPs across the neighbour budget, one point per n."""
    gflops = [r.gflops for r in rows]
    coverage = [r.coverage for r in rows]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.plot(gflops, coverage, "o-", color="tab:blue", ms=4)
        last = None
        for r in rows:
            if (r.gflops, r.coverage) == last:
                continue  # saturated budgets collapse onto one point
            last = (r.gflops, r.coverage)
            ax.annotate(str(r.n), last, textcoords="offset points", xytext=(3, -9), fontsize=7)
        ax.set_xlabel("GFLOPs")
        ax.set_ylabel("guide joint-patch coverage")
        ax.set_ylim(min(0.0, min(coverage)), 1.02)
        ax.grid(alpha=0.3)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_heatmaps(image: np.ndarray, heatmap: np.ndarray, keypoints, path,
                  selection=None, patch_size: int = 16) -> None:
    """Input with decoded keypoints beside the channel-max heatmap."""
    with plt.rc_context(RC):
        fig, (a0, a1) = plt.subplots(1, 2, figsize=(6, 4))
        a0.imshow(np.clip(image, 0, 1))
        if selection is not None:
            mask = np.zeros(image.shape[:2])
            cols = image.shape[1] // patch_size
            for i in selection:
                y, x = divmod(i, cols)
                mask[y * patch_size:(y + 1) * patch_size, x * patch_size:(x + 1) * patch_size] = 1
            a0.imshow(np.ma.masked_where(mask == 0, mask), cmap="autumn", alpha=0.3, vmin=0, vmax=1)
        xy = keypoints.xy()
        a0.scatter(xy[:, 0], xy[:, 1], s=8, c="cyan")
        a0.set_title("input + decoded joints")
        a1.imshow(heatmap.max(axis=0), cmap="magma")
        a1.set_title("heatmap (max over joints)")
        for ax in (a0, a1):
            ax.set_xticks([])
            ax.set_yticks([])
        fig.tight_layout()
        _save(fig, path)
