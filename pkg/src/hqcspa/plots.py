"""Matplotlib figure rendering for traces and confusion matrices.

All functions write image files; nothing is shown interactively.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_trace(samples, peak_indices=None, path="trace.png", title=None,
               xlim=None):
    """Line plot of a power trace with detected peaks marked."""
    samples = np.asarray(samples)
    fig, ax = plt.subplots(figsize=(10, 3.2))
    ax.plot(np.arange(len(samples)), samples, lw=0.6, color="#1f77b4")
    if peak_indices is not None and len(peak_indices):
        peak_indices = np.asarray(peak_indices, dtype=int)
        ax.plot(peak_indices, samples[peak_indices], "x", ms=4, color="#d62728",
                label=f"{len(peak_indices)} peaks")
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("sample")
    ax.set_ylabel("power (a.u.)")
    if title:
        ax.set_title(title, fontsize=10)
    if xlim:
        ax.set_xlim(*xlim)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_confusion(normalized, path="confusion.png", title=None):
    """Heatmap of a row-normalized 16x16 confusion matrix."""
    m = np.asarray(normalized, dtype=float)
    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    im = ax.imshow(m, cmap="Blues", vmin=0.0, vmax=1.0)
    ax.set_xlabel("recovered value")
    ax.set_ylabel("actual value")
    ax.set_xticks(range(16))
    ax.set_yticks(range(16))
    for i in range(16):
        for j in range(16):
            if m[i, j] > 0:
                colour = "white" if m[i, j] > 0.6 else "black"
                ax.text(j, i, f"{m[i, j]:.2f}", ha="center", va="center",
                        fontsize=6, color=colour)
    fig.colorbar(im, ax=ax, shrink=0.85)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
