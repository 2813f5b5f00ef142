"""Figure rendering for the report path.

Every run command renders PNG figures next to its CSV artifacts; the Agg
backend keeps this headless-safe. Figures are a convenience view of the
delimited data, never the only place a number lives.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["render_loss", "render_loglog", "render_iterations"]


def render_loss(path, curves, title: str) -> None:
    """Loss-fraction curves over time; ``curves`` is (label, t, L) triples."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, times, fractions in curves:
        ax.step(times, fractions, where="post", label=label, linewidth=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("absorbed fraction L")
    ax.set_title(title)
    if len(curves) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_loglog(path, series, title: str, ylabel: str) -> None:
    """Log2-log2 estimator decay; ``series`` is (label, pairs) with
    ``pairs`` holding (h, value) and zero values skipped as absent."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    import math

    for label, pairs in series:
        xs = [math.log2(h) for h, v in pairs if v != 0.0]
        ys = [math.log2(abs(v)) for h, v in pairs if v != 0.0]
        ax.plot(xs, ys, marker="o", label=label, linewidth=1.0)
    ax.set_xlabel("log2 h")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_iterations(path, rows, title: str) -> None:
    """Average/max iteration counts per level; ``rows`` is
    (label, step_counts, averages, maxima) tuples."""
    fig, (ax_avg, ax_max) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    for label, counts, avgs, maxes in rows:
        ax_avg.semilogx(counts, avgs, marker="o", label=label)
        ax_max.semilogx(counts, maxes, marker="s", label=label)
    ax_avg.set_xlabel("N")
    ax_avg.set_ylabel("average iterations per step")
    ax_max.set_xlabel("N")
    ax_max.set_ylabel("max iterations per step")
    ax_avg.legend(fontsize=8)
    ax_max.legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
