"""Delimited/JSON reports and their figures."""

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .scoring import FIELDS, thumbs_score  # noqa: E402


def _clean(x):
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def write_correlation_report(matrix, out_dir, stem="correlations"):
    """CSV (one row per cell), JSON and a heatmap with significance stars."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "column", "rho", "p", "stars"])
        for i, rn in enumerate(matrix.row_names):
            for j, cn in enumerate(matrix.col_names):
                rho, p = matrix.rho[i, j], matrix.p[i, j]
                w.writerow([rn, cn, "" if np.isnan(rho) else f"{rho:.6f}", "" if np.isnan(p) else f"{p:.6g}",
                            matrix.stars[i][j]])
    json_path = out_dir / f"{stem}.json"
    json_path.write_text(json.dumps({
        "n": matrix.n, "rows": list(matrix.row_names), "columns": list(matrix.col_names),
        "rho": [[_clean(float(v)) for v in row] for row in matrix.rho],
        "p": [[_clean(float(v)) for v in row] for row in matrix.p],
        "stars": matrix.stars,
    }, indent=2, sort_keys=True))

    fig, ax = plt.subplots(figsize=(1.0 + 0.9 * len(matrix.col_names), 1.0 + 0.45 * len(matrix.row_names)))
    im = ax.imshow(np.ma.masked_invalid(matrix.rho), cmap="RdBu_r", vmin=-1, vmax=1, aspect="auto")
    ax.set_xticks(range(len(matrix.col_names)), matrix.col_names, rotation=45, ha="right")
    ax.set_yticks(range(len(matrix.row_names)), matrix.row_names)
    for i in range(len(matrix.row_names)):
        for j in range(len(matrix.col_names)):
            if not np.isnan(matrix.rho[i, j]):
                ax.text(j, i, f"{matrix.rho[i, j]:.2f}{matrix.stars[i][j]}", ha="center", va="center", fontsize=7)
    fig.colorbar(im, ax=ax, label="Spearman rho")
    ax.set_title(f"Rank correlation (n = {matrix.n})")
    fig.tight_layout()
    png_path = out_dir / f"{stem}.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return {"csv": csv_path, "json": json_path, "figure": png_path}


def write_score_report(ratings, summary, comparisons, out_dir, stem="thumbs"):
    """Per-group means/stds, test results, and a score box plot per source."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    keys = list(FIELDS) + ["score"]
    csv_path = out_dir / f"{stem}_summary.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "dataset", "n"] + [f"{k}_mean" for k in keys] + [f"{k}_std" for k in keys])
        for (source, dataset), g in summary.items():
            w.writerow([source, dataset, g.n] + [f"{g.mean[k]:.4f}" for k in keys] + [f"{g.std[k]:.4f}" for k in keys])
    tests_path = out_dir / f"{stem}_tests.csv"
    with open(tests_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "field", "test", "statistic", "p", "n"])
        for c in comparisons:
            w.writerow([c.notes.get("dataset") or "all", c.notes["field"], c.test_name, f"{c.statistic:.6g}",
                        f"{c.p_value:.6g}", c.n])
    json_path = out_dir / f"{stem}.json"
    json_path.write_text(json.dumps({
        "groups": [{"source": s, "dataset": d, "n": g.n, "mean": g.mean, "std": g.std, "single": g.single}
                   for (s, d), g in summary.items()],
        "tests": [{"test": c.test_name, "statistic": c.statistic, "p_value": c.p_value, "n": c.n, "notes": c.notes}
                  for c in comparisons],
    }, indent=2, sort_keys=True, default=str))

    sources = sorted({r.source for r in ratings})
    fig, ax = plt.subplots(figsize=(4 + len(sources), 3.5))
    ax.boxplot([[thumbs_score(r) for r in ratings if r.source == s] for s in sources])
    ax.set_xticks(range(1, len(sources) + 1), sources)
    ax.set_ylabel("caption score")
    ax.set_ylim(-5.2, 5.2)
    fig.tight_layout()
    png_path = out_dir / f"{stem}_scores.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return {"summary_csv": csv_path, "tests_csv": tests_path, "json": json_path, "figure": png_path}


def plot_training_curves(history, path):
    """Training total loss and validation ISOP loss per epoch."""
    epochs = [e["epoch"] for e in history["epochs"]]
    fig, ax1 = plt.subplots(figsize=(6, 3.5))
    ax1.plot(epochs, [e["train_total"] for e in history["epochs"]], label="train total (weighted)")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("train total")
    ax2 = ax1.twinx()
    ax2.plot(epochs, [e["val_isop_loss"] for e in history["epochs"]], color="tab:orange", label="val ISOP MSE")
    ax2.set_ylabel("val ISOP MSE")
    if history.get("best_epoch"):
        ax2.axvline(history["best_epoch"], color="grey", ls=":", lw=1)
    handles = ax1.get_lines() + ax2.get_lines()
    ax1.legend(handles, [h.get_label() for h in handles], loc="upper center", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
