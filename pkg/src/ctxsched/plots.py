"""Figure rendering for replay reports (weights, shares, speedups)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_FIGSIZE = (8.0, 3.2)
_DPI = 110


def _by_module(rows) -> dict[str, tuple[list[float], list[float]]]:
    series: dict[str, tuple[list[float], list[float]]] = {}
    for time_us, module, value in rows:
        xs, ys = series.setdefault(module, ([], []))
        xs.append(time_us / 1e6)
        ys.append(float(value))
    return series


def plot_series(rows, path: str | Path, ylabel: str, title: str) -> Path:
    """Step plot of per-module trace rows (time_us, module, value)."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    for module, (xs, ys) in _by_module(rows).items():
        ax.step(xs, ys, where="post", label=module, linewidth=1.4)
    ax.set_xlabel("time (s)")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if rows:
        ax.legend(loc="upper right", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_speedups(speedups: dict[str, float], path: str | Path) -> Path:
    """Bar chart of per-variant speedup over the baseline."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(4.8, 3.2), dpi=_DPI)
    names = list(speedups)
    values = [speedups[n] for n in names]
    ax.bar(names, values, color=["#888888", "#2b7bba", "#b54d3c"][:len(names)])
    ax.axhline(1.0, color="black", linewidth=0.8)
    ax.set_ylabel("speedup vs baseline")
    for i, v in enumerate(values):
        ax.text(i, v, f"{v:.2f}", ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path
