"""Bar-chart rendering of experiment summaries."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import MetricsReport  # noqa: E402

METRICS = (("f1", "F1 (higher is better)"), ("nhd", "NHD (lower is better)"),
           ("ratio", "Ratio (lower is better)"))


def plot_summary(summary: dict[tuple[str, str], MetricsReport], path: str | Path) -> Path:
    """One panel per metric, grouped bars: datasets on the x axis, one bar per method."""
    from .experiment import ALL_METHODS, LABELS, _ordered

    path = Path(path)
    methods, datasets = _ordered(summary.keys())
    fig, axes = plt.subplots(1, len(METRICS), figsize=(5 * len(METRICS), 4.5), squeeze=False)
    width = 0.8 / max(len(methods), 1)
    x = np.arange(len(datasets))
    colors = plt.get_cmap("tab10")
    for ax, (key, title) in zip(axes[0], METRICS):
        for k, method in enumerate(methods):
            vals = [getattr(summary[(method, d)], key) if (method, d) in summary else np.nan
                    for d in datasets]
            color_idx = ALL_METHODS.index(method) if method in ALL_METHODS else k
            ax.bar(x + (k - (len(methods) - 1) / 2) * width, vals, width,
                   label=LABELS.get(method, method), color=colors(color_idx % 10))
        ax.set_xticks(x, [d.upper() for d in datasets])
        ax.set_title(title)
        ax.set_ylim(0, 1.05 if key != "nhd" else None)
    axes[0][0].legend(fontsize=7, loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path
