"""Figure rendering for training logs, sweeps, and emotion confusion.

Every report path that writes delimited output also renders a figure
next to it; these helpers do the rendering.  The Agg backend keeps
everything headless.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import DomainError  # noqa: E402


def _read_log(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def save_training_curves(log, out_png) -> Path:
    """Plot loss components over optimizer steps.

    ``log`` is either a CSV path or an iterable of row dicts with keys
    step, loss, loss_emo, loss_gen, and optionally val_loss.
    """
    rows = _read_log(log) if isinstance(log, (str, Path)) else list(log)
    if not rows:
        raise DomainError("training log is empty, nothing to plot")
    steps = [int(r["step"]) for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for key, label in (("loss", "total"), ("loss_emo", "emotion"),
                       ("loss_gen", "generation")):
        ax.plot(steps, [float(r[key]) for r in rows], label=label)
    val = [(s, float(r["val_loss"])) for s, r in zip(steps, rows)
           if r.get("val_loss") not in (None, "")]
    if val:
        ax.plot([s for s, _ in val], [v for _, v in val],
                "o--", label="validation")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    out_png = Path(out_png)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return out_png


def save_sweep_curve(rows, out_png) -> Path:
    """Plot emotion accuracy against the per-dialogue concept budget."""
    rows = list(rows)
    if not rows:
        raise DomainError("sweep has no rows, nothing to plot")
    caps = [int(cap) for cap, _ in rows]
    accuracies = [float(acc) for _, acc in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(caps, accuracies, "o-")
    ax.set_xlabel("concepts per dialogue")
    ax.set_ylabel("emotion accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    out_png = Path(out_png)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return out_png


def save_emotion_confusion(predicted, gold, labels, out_png) -> Path:
    """Render a gold x predicted count matrix over the label set."""
    predicted = list(predicted)
    gold = list(gold)
    if len(predicted) != len(gold):
        raise DomainError("predicted and gold label counts differ")
    if not predicted:
        raise DomainError("no labels, nothing to plot")
    n = len(labels)
    matrix = np.zeros((n, n), dtype=int)
    for p, g in zip(predicted, gold):
        matrix[g, p] += 1
    size = max(4.0, 0.45 * n)
    fig, ax = plt.subplots(figsize=(size, size))
    ax.imshow(matrix, cmap="Blues")
    ax.set_xticks(range(n), labels, rotation=90, fontsize=7)
    ax.set_yticks(range(n), labels, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    threshold = matrix.max() / 2 if matrix.max() else 0.5
    for i in range(n):
        for j in range(n):
            if matrix[i, j]:
                ax.text(j, i, str(matrix[i, j]), ha="center", va="center",
                        fontsize=6,
                        color="white" if matrix[i, j] > threshold else "black")
    fig.tight_layout()
    out_png = Path(out_png)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return out_png
