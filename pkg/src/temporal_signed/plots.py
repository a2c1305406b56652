"""Static figures for compare and benchmark outputs (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_COLORS = {"baseline": "#7f7f7f", "enhanced": "#1f77b4"}


def _save(fig, path: Path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path.name


def compare_plots(res, out: Path) -> dict:
    files = {}
    models = [m for m in ("baseline", "enhanced") if m in res.results[0]["metrics"]]
    metric_names = list(res.results[0]["metrics"][models[0]])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    width = 0.8 / len(models)
    x = np.arange(len(metric_names))
    for i, m in enumerate(models):
        vals = np.array([[r["metrics"][m][k] for k in metric_names] for r in res.results])
        se = vals.std(axis=0, ddof=1) / np.sqrt(len(vals))
        ax.bar(x + i * width, vals.mean(axis=0), width, yerr=se, label=m, color=_COLORS[m], capsize=3)
    ax.set_xticks(x + width * (len(models) - 1) / 2, metric_names)
    ax.set_ylim(0, 1)
    ax.set_ylabel("mean over seeds")
    ax.legend()
    files["metric_plot"] = _save(fig, out / "metrics.png")

    fig, ax = plt.subplots(figsize=(4, 3.5))
    walls = [np.mean([r["wall_clock"][m] for r in res.results]) for m in models]
    ax.bar(models, walls, color=[_COLORS[m] for m in models])
    ax.set_ylabel("training wall-clock per seed (s)")
    files["runtime_plot"] = _save(fig, out / "runtime.png")

    fig, ax = plt.subplots(figsize=(6, 3.5))
    for m in models:
        traces = np.array([r["loss_trace"][m] for r in res.results])
        if traces.size:
            ax.plot(traces.mean(axis=0), label=m, color=_COLORS[m])
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean training loss")
    ax.set_yscale("log")
    ax.legend()
    files["loss_plot"] = _save(fig, out / "loss.png")
    return files


def benchmark_plots(result: dict, out: Path) -> dict:
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.5))
    per_epoch = result["per_epoch_seconds"]
    axes[0].bar(list(per_epoch), list(per_epoch.values()), color=[_COLORS[m] for m in per_epoch])
    axes[0].set_ylabel("seconds per epoch")
    axes[0].set_title(f"overhead {result['overhead_pct']:.1f}%")
    for ax, key, label in ((axes[1], "hcim_forward_seconds_by_n", "n"),
                           (axes[2], "hcim_forward_seconds_by_T", "T")):
        xs = [int(k) for k in result[key]]
        ax.loglog(xs, list(result[key].values()), "o-")
        ax.set_xlabel(label)
        ax.set_ylabel("HCIM forward (s)")
    return {"benchmark_plot": _save(fig, out / "benchmark.png")}
