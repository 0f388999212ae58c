"""Figure rendering for the CLI reports.

Figures are built directly on matplotlib Figure objects with the Agg
canvas, bypassing the pyplot state machine; combined with a pinned metadata
block this keeps PNG output reproducible across runs.
"""

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

# Strip the creation-date chunk so identical figures give identical bytes.
_PNG_METADATA = {"Software": None}


def _save(figure: Figure, path):
    FigureCanvasAgg(figure)
    figure.savefig(path, format="png", dpi=100, metadata=_PNG_METADATA)


def save_group_count_figure(series, path, truth_series=None):
    """Detected group count per frame, optionally against ground truth."""
    figure = Figure(figsize=(8, 3.2))
    ax = figure.add_subplot(111)
    frames = [frame for frame, _ in series]
    counts = [count for _, count in series]
    ax.step(frames, counts, where="post", label="detected", color="tab:blue")
    if truth_series:
        ax.step(
            [f for f, _ in truth_series],
            [c for _, c in truth_series],
            where="post",
            label="ground truth",
            color="tab:orange",
            linestyle="--",
        )
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("frame")
    ax.set_ylabel("groups")
    ax.set_title("Detected group count over time")
    figure.tight_layout()
    _save(figure, path)


def save_dyad_figure(rows, path):
    """Distance, reciprocal angle, and engagement of one dyad, stacked."""
    figure = Figure(figsize=(8, 6))
    axes = figure.subplots(3, 1, sharex=True)
    frames = [row.frame for row in rows]
    axes[0].plot(frames, [row.distance for row in rows], color="tab:blue")
    axes[0].set_ylabel("distance (px)")
    axes[1].plot(frames, [row.reciprocal for row in rows], color="tab:green")
    axes[1].set_ylabel("reciprocal angle (rad)")
    axes[1].set_ylim(0, 2 * np.pi)
    axes[2].step(frames, [row.engagement for row in rows], where="post", color="tab:red")
    axes[2].set_ylabel("engagement")
    axes[2].set_ylim(-0.05, 1.05)
    axes[2].set_xlabel("frame")
    axes[0].set_title("Dyad measures over time")
    figure.tight_layout()
    _save(figure, path)


def save_history_figure(history, path):
    """Accuracy and loss per training epoch."""
    figure = Figure(figsize=(8, 3.2))
    ax = figure.add_subplot(111)
    epochs = [stats.epoch for stats in history]
    ax.plot(epochs, [stats.train_accuracy for stats in history], label="train accuracy")
    ax.plot(epochs, [stats.val_accuracy for stats in history], label="val accuracy")
    ax.set_xlabel("epoch")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax2 = ax.twinx()
    ax2.plot(
        epochs,
        [stats.train_loss for stats in history],
        label="train loss",
        color="tab:gray",
        linestyle=":",
    )
    ax2.set_ylabel("loss")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="center right", fontsize=8)
    ax.set_title("Training history")
    figure.tight_layout()
    _save(figure, path)


def save_confusion_figure(confusion, class_names, path):
    """Population-normalized confusion matrix as an annotated heat map."""
    confusion = np.asarray(confusion, dtype=float)
    figure = Figure(figsize=(4.8, 4.2))
    ax = figure.add_subplot(111)
    image = ax.imshow(confusion, cmap="Blues", vmin=0.0)
    ax.set_xticks(range(len(class_names)), class_names, rotation=30, ha="right")
    ax.set_yticks(range(len(class_names)), class_names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    threshold = confusion.max() / 2 if confusion.max() > 0 else 0.5
    for i in range(confusion.shape[0]):
        for j in range(confusion.shape[1]):
            ax.text(
                j,
                i,
                f"{confusion[i, j]:.3f}",
                ha="center",
                va="center",
                fontsize=8,
                color="white" if confusion[i, j] > threshold else "black",
            )
    figure.colorbar(image, ax=ax, fraction=0.046)
    ax.set_title("Confusion (share of all samples)")
    figure.tight_layout()
    _save(figure, path)
