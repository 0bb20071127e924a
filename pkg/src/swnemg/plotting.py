"""SVG charts for run reports (matplotlib, Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .report import RunReport  # noqa: E402

plt.rcParams["svg.hashsalt"] = "swnemg"  # stable element ids across runs
_COLORS = {"SWN": "tab:blue", "None": "tab:orange"}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _group(rows, key, value="accuracy"):
    out = {}
    for r in rows:
        out.setdefault(r[key], []).append(r[value])
    return out


def subject_bars(report: RunReport, path: Path) -> Path:
    groups = _group(report.rows, "config")
    fig, ax = plt.subplots(figsize=(7, 3.5))
    width = 0.8 / max(len(groups), 1)
    for i, (name, _) in enumerate(groups.items()):
        rows = [r for r in report.rows if r["config"] == name]
        subjects = [r["subject"] for r in rows]
        x = np.arange(len(subjects)) + i * width
        ax.bar(x, [r["accuracy"] for r in rows], width, label=name)
    ax.axhline(1 / 3, color="grey", ls="--", lw=0.8, label="chance")
    ax.set_xlabel("subject")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=7)
    return _save(fig, path)


def comparison_bars(report: RunReport, path: Path) -> Path:
    """Mean +/- std per group and feature, with bracketed significance stars."""
    features = list(dict.fromkeys(r["feature"] for r in report.rows))
    order = ["SWN_OWN", "None_OWN", "SWN_OTHER", "None_OTHER"]
    fig, ax = plt.subplots(figsize=(2.2 + 2.2 * len(features), 4))
    width = 0.2
    centres = {}
    for fi, feat in enumerate(features):
        for gi, group in enumerate(order):
            acc = [r["accuracy"] for r in report.rows
                   if r["feature"] == feat and r["group"] == group]
            if not acc:
                continue
            x = fi + (gi - 1.5) * width
            norm = group.split("_")[0]
            ax.bar(x, np.mean(acc), width, yerr=np.std(acc), color=_COLORS[norm],
                   hatch="//" if group.endswith("OTHER") else None, edgecolor="black",
                   lw=0.5, label=group if fi == 0 else None)
            centres[(feat, group)] = (x, np.mean(acc) + np.std(acc))
    for k, comp in enumerate(report.comparisons):
        a, b = (comp["feature"], comp["a"]), (comp["feature"], comp["b"])
        if a not in centres or b not in centres:
            continue
        top = max(centres[a][1], centres[b][1]) + 0.04 + 0.05 * (k % len(order))
        ax.plot([centres[a][0], centres[a][0], centres[b][0], centres[b][0]],
                [top - 0.01, top, top, top - 0.01], color="black", lw=0.6)
        ax.text((centres[a][0] + centres[b][0]) / 2, top, comp["stars"], ha="center",
                va="bottom", fontsize=7)
    ax.set_xticks(range(len(features)), features)
    ax.axhline(1 / 3, color="grey", ls="--", lw=0.8)
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.3)
    ax.legend(fontsize=7, ncol=4, loc="upper left")
    return _save(fig, path)


def sweep_heatmap(report: RunReport, path: Path) -> Path:
    norms = sorted({r["norm_ms"] for r in report.rows})
    feats = sorted({r["feature_ms"] for r in report.rows})
    grid = np.full((len(norms), len(feats)), np.nan)
    for (i, ln) in enumerate(norms):
        for (j, lf) in enumerate(feats):
            acc = [r["accuracy"] for r in report.rows
                   if r["norm_ms"] == ln and r["feature_ms"] == lf]
            grid[i, j] = np.mean(acc)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(grid, origin="lower", cmap="viridis", vmin=0, vmax=1)
    for i in range(len(norms)):
        for j in range(len(feats)):
            ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center", fontsize=7, color="w")
    ax.set_xticks(range(len(feats)), feats)
    ax.set_yticks(range(len(norms)), norms)
    ax.set_xlabel("feature window (ms)")
    ax.set_ylabel("normalisation window (ms)")
    fig.colorbar(im, ax=ax, label="mean accuracy")
    return _save(fig, path)


def window_function_bars(report: RunReport, path: Path) -> Path:
    features = list(dict.fromkeys(r["feature"] for r in report.rows))
    fig, axes = plt.subplots(len(features), 1, figsize=(8, 2.2 * len(features)), squeeze=False)
    for ax, feat in zip(axes[:, 0], features):
        groups = _group([r for r in report.rows if r["feature"] == feat], "config")
        names = list(groups)
        ax.bar(range(len(names)), [np.mean(v) for v in groups.values()],
               yerr=[np.std(v) for v in groups.values()], color="tab:blue")
        ax.set_xticks(range(len(names)),
                      [n.split("-", 4)[-1] if n.count("-") >= 4 else "Flat" for n in names],
                      rotation=60, fontsize=6)
        ax.set_ylim(0, 1)
        ax.set_ylabel(feat)
    return _save(fig, path)


def correlation_bars(report: RunReport, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    channels = sorted({r["channel"] for r in report.rows})
    for k, norm in enumerate(("SWN", "None")):
        means = []
        for ch in channels:
            rs = [r["r"] for r in report.rows if r["channel"] == ch and r["normalization"] == norm]
            means.append(np.mean(rs) if rs else np.nan)
        ax.bar(np.arange(len(channels)) + (k - 0.5) * 0.4, means, 0.4, label=norm,
               color=_COLORS[norm])
    ax.axhline(0, color="black", lw=0.6)
    ax.set_xticks(range(len(channels)), [f"ch{c:02d}" for c in channels], fontsize=7)
    ax.set_ylabel("r (std vs MAV)")
    ax.set_ylim(-1, 1)
    ax.legend(fontsize=7)
    return _save(fig, path)


def latency_bars(report: RunReport, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(4, 3.5))
    modes = ["None", "SWN"]
    pre = [report.timing[m]["pre"]["mean_us"] for m in modes]
    norm = [report.timing[m]["norm"]["mean_us"] for m in modes]
    ax.bar(modes, pre, color="lightgrey", label="preprocessing")
    ax.bar(modes, norm, bottom=pre, color=[_COLORS[m] for m in modes], label="normalisation")
    ax.set_ylabel("mean time per tick (us)")
    ax.legend(fontsize=7)
    return _save(fig, path)


def subject_count_line(report: RunReport, path: Path) -> Path:
    ks = sorted({r["n_train_subjects"] for r in report.rows})
    means = [np.mean([r["accuracy"] for r in report.rows if r["n_train_subjects"] == k]) for k in ks]
    stds = [np.std([r["accuracy"] for r in report.rows if r["n_train_subjects"] == k]) for k in ks]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(ks, means, yerr=stds, marker="o", capsize=3)
    ax.set_xlabel("training subjects")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1)
    return _save(fig, path)


_CHARTS = {
    "own": subject_bars,
    "other": subject_bars,
    "compare": comparison_bars,
    "sweep": sweep_heatmap,
    "window-funcs": window_function_bars,
    "correlate": correlation_bars,
    "bench": latency_bars,
    "subject-count": subject_count_line,
}


def charts_for(report: RunReport, out_dir, stem: str) -> list[Path]:
    draw = _CHARTS.get(report.kind)
    if draw is None or not report.rows:
        return []
    return [draw(report, Path(out_dir) / f"{stem}.svg")]
