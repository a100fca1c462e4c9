"""Benchmark report assembly and rendering.

A report aggregates per-(method, metric) scores as mean and standard
deviation over runs (each run contributes its per-example mean). The
same record set can be rendered as JSON, CSV, an aligned text table
(methods as columns, one Delta(min,max) spread column per metric) or a
PNG gallery of example rows.

Scores and timings are kept in separate files: score reports are
byte-identical across reruns with the same config, wall-clock timings
never are.
"""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from xaibench.methods import METHODS


class ReportError(ValueError):
    pass


def _method_label(method: str) -> str:
    dims = METHODS[method][0] if method in METHODS else "3D"
    return f"{method} ({dims})"


def aggregate(records: list[dict]) -> dict:
    """records: {run, method, example_id, metric, value} dicts.

    Returns {"runs": n, "methods": [...], "metrics": {metric: {method:
    {"mean": m, "std": s, "runs": [...]}}}} with run means as the
    aggregation unit."""
    runs = sorted({r["run"] for r in records})
    methods = sorted({r["method"] for r in records})
    metrics_names = sorted({r["metric"] for r in records})
    by_key: dict[tuple, list] = {}
    for r in records:
        by_key.setdefault((r["metric"], r["method"], r["run"]), []).append(r["value"])

    table: dict[str, dict] = {}
    for metric in metrics_names:
        row = {}
        for method in methods:
            run_means = []
            for run in runs:
                vals = by_key.get((metric, method, run))
                if vals:
                    run_means.append(float(np.mean(vals)))
            if not run_means:
                row[method] = {"skipped": "no records"}
                continue
            row[method] = {
                "mean": float(np.mean(run_means)),
                "std": float(np.std(run_means)),
                "runs": run_means,
            }
        table[metric] = row
    return {"runs": len(runs), "methods": methods, "metrics": table}


def spread(report: dict, metric: str) -> float:
    """Delta(min,max): the spread of a metric's means across methods."""
    cells = [c["mean"] for c in report["metrics"][metric].values()
             if "mean" in c]
    if not cells:
        raise ReportError(f"metric {metric!r} has no scored cells")
    return max(cells) - min(cells)


def dumps_json(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=True) + "\n"


def write_json(report: dict, path) -> None:
    Path(path).write_text(dumps_json(report))


def dumps_csv(report: dict) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric"] + [_method_label(m) for m in report["methods"]]
                    + ["delta"])
    for metric in sorted(report["metrics"]):
        row = [metric]
        for method in report["methods"]:
            cell = report["metrics"][metric][method]
            row.append(f"{cell['mean']:.6f}±{cell['std']:.6f}"
                       if "mean" in cell else "skipped")
        row.append(f"{spread(report, metric):.6f}")
        writer.writerow(row)
    return buf.getvalue()


def write_csv(report: dict, path) -> None:
    Path(path).write_text(dumps_csv(report))


def format_table(report: dict) -> str:
    """Aligned text table: metrics as rows, methods as columns (with
    dimension annotations), a Delta(min,max) column at the right."""
    headers = ["metric"] + [_method_label(m) for m in report["methods"]] \
        + ["Δ(min,max)"]
    rows = []
    for metric in sorted(report["metrics"]):
        row = [metric]
        for method in report["methods"]:
            cell = report["metrics"][metric][method]
            row.append(f"{cell['mean']:.2f}±{cell['std']:.2f}"
                       if "mean" in cell else "—")
        row.append(f"{spread(report, metric):.2f}")
        rows.append(row)
    widths = [max(len(headers[i]), *(len(r[i]) for r in rows))
              for i in range(len(headers))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def write_table(report: dict, path) -> None:
    Path(path).write_text(format_table(report))


def write_timing(timing: dict[str, float], path) -> None:
    """Mean milliseconds per explanation per method, in its own file."""
    Path(path).write_text(json.dumps(timing, indent=1, sort_keys=True) + "\n")


def write_gallery(rows: list[dict], method_names: list[str], path,
                  dpi: int = 110) -> None:
    """One gallery row per example: input, 2D ground truth, then one
    panel per method, on a shared diverging colormap.

    rows: {example_id, image, gt2d, explanations: {method: tensor}}."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not rows:
        raise ReportError("gallery needs at least one example row")
    ncols = 2 + len(method_names)
    nrows = len(rows)
    fig, axes = plt.subplots(nrows, ncols,
                             figsize=(1.4 * ncols, 1.5 * nrows),
                             squeeze=False)
    last_im = None
    for i, row in enumerate(rows):
        axes[i][0].imshow(np.clip(row["image"], 0.0, 1.0))
        axes[i][0].set_ylabel(row["example_id"], fontsize=6)
        panels = [("GT", row["gt2d"])] + \
            [(m, row["explanations"][m]) for m in method_names]
        for j, (title, tensor) in enumerate(panels, start=1):
            view = tensor[:, :, 0] if tensor.shape[2] == 1 \
                else np.take_along_axis(
                    tensor, np.argmax(np.abs(tensor), axis=2)[:, :, None],
                    axis=2)[:, :, 0]
            last_im = axes[i][j].imshow(view, cmap="seismic", vmin=-1, vmax=1)
            if i == 0:
                axes[i][j].set_title(title, fontsize=6)
        if i == 0:
            axes[i][0].set_title("input", fontsize=6)
    for ax_row in axes:
        for ax in ax_row:
            ax.set_xticks([])
            ax.set_yticks([])
    fig.colorbar(last_im, ax=axes[:, -1], fraction=0.05)
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    plt.close(fig)
