"""Convergence plots from experiment summaries (vector output only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_VECTOR_SUFFIXES = {".svg", ".pdf"}


def emit_plot(summaries, out_path, best_so_far=False, log_scale=False, title=None):
    """Mean exact-loss curve per algorithm with a +/- stderr band.

    The x axis counts function evaluations (initial design included), so
    algorithms with different horizons would still line up.  `best_so_far`
    switches to the running-minimum curves.  The output format follows the
    file suffix; anything that is not .svg or .pdf gets .svg appended.
    """
    if not summaries:
        raise ValueError("nothing to plot: the summary is empty")
    path = Path(out_path)
    if path.suffix.lower() not in _VECTOR_SUFFIXES:
        path = path.with_name(path.name + ".svg")
    path.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for label, summary in summaries.items():
        if best_so_far:
            mean, err = summary.mean_min_f, summary.stderr_min_f
        else:
            mean, err = summary.mean_f, summary.stderr_f
        x = summary.fevals
        ax.plot(x, mean, label=f"{label} (n={summary.trials})", linewidth=1.6)
        ax.fill_between(x, mean - err, mean + err, alpha=0.2, linewidth=0)
    ax.set_xlabel("function evaluations")
    ax.set_ylabel("best exact loss so far" if best_so_far else "exact loss of query")
    if log_scale:
        ax.set_yscale("log")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
