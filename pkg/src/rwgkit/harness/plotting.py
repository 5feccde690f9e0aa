"""Static SVG figures rendered from a scenario's CSV files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .report import AGG_NAME, TRACE_NAME, read_csv  # noqa: E402

# fixed ids and no timestamp keep the SVG bytes reproducible
matplotlib.rcParams["svg.hashsalt"] = "rwgkit"
SVG_META = {"Date": None, "Creator": "rwgkit"}

SWEEPS = {"bias-sweep": "bias", "violation-sweep": "exemption fraction p"}


def _series(row: dict) -> str:
    name = row["backbone"].upper() + (" +REC" if row["rec"] == "on" else "")
    return f"{row['family']} {name}"


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=SVG_META)
    plt.close(fig)
    return path


def plot_sweep(rows: list[dict], xlabel: str, title: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    series: dict[str, list] = {}
    for r in rows:
        if r["level"] == "":
            continue
        series.setdefault(_series(r), []).append((float(r["level"]), float(r["mean"]), float(r["std"])))
    for name, pts in series.items():
        pts.sort()
        x, m, s = (np.array(v) for v in zip(*pts))
        ax.errorbar(x, 100 * m, yerr=100 * s, marker="o", capsize=3, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("test accuracy (%)")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_bars(rows: list[dict], title: str, path: Path) -> Path:
    conds = list(dict.fromkeys(r["condition"] for r in rows))
    series = list(dict.fromkeys(_series(r) for r in rows))
    width = 0.8 / max(len(series), 1)
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(conds) * max(1, len(series) / 2)), 4))
    lookup = {(r["condition"], _series(r)): r for r in rows}
    for i, name in enumerate(series):
        xs, ms, ss = [], [], []
        for j, c in enumerate(conds):
            r = lookup.get((c, name))
            if r is not None:
                xs.append(j + (i - (len(series) - 1) / 2) * width)
                ms.append(100 * float(r["mean"]))
                ss.append(100 * float(r["std"]))
        ax.bar(xs, ms, width, yerr=ss, capsize=3, label=name)
    ax.set_xticks(range(len(conds)))
    ax.set_xticklabels(conds)
    ax.set_ylabel("test accuracy (%)")
    ax.set_ylim(0, 105)
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_traces(rows: list[dict], title: str, path: Path) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    curves: dict[str, dict[int, list]] = {}
    for r in rows:
        key = f"{r['condition']} {_series(r)}"
        curves.setdefault(key, {}).setdefault(int(r["epoch"]), []).append(
            (float(r["train_loss"]), float(r["test_acc"])))
    for key, by_epoch in curves.items():
        epochs = sorted(by_epoch)
        loss = [np.mean([v[0] for v in by_epoch[e]]) for e in epochs]
        acc = [100 * np.mean([v[1] for v in by_epoch[e]]) for e in epochs]
        ax1.plot(epochs, loss, label=key)
        ax2.plot(epochs, acc, label=key)
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("train loss")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("test accuracy (%)")
    ax1.set_title(title)
    if 0 < len(curves) <= 12:
        ax2.legend(fontsize=7)
    return _save(fig, path)


def render_figures(scenario: str, out_dir) -> list[Path]:
    """Render the scenario figure and the training curves next to the CSVs."""
    out = Path(out_dir)
    agg = read_csv(out / AGG_NAME)
    paths = []
    if scenario in SWEEPS:
        paths.append(plot_sweep(agg, SWEEPS[scenario], scenario, out / f"{scenario}.svg"))
    else:
        paths.append(plot_bars(agg, scenario, out / f"{scenario}.svg"))
    traces = out / TRACE_NAME
    if traces.exists():
        paths.append(plot_traces(read_csv(traces), scenario, out / "training_curves.svg"))
    return paths
