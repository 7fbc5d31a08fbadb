"""Figure-panel series: one CSV per panel plus a minimal SVG rendering.

CSV files start with ``#`` comment lines naming the panel, the units and
the provenance of each column family (``actual`` = bundled observations,
``modelled`` = fitted model or historical-stringency replay, ``rl`` =
trained agent), followed by the run manifest.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "epipolicy"
matplotlib.rcParams["svg.fonttype"] = "none"

PROVENANCE = {
    "actual": "bundled observations",
    "modelled": "fitted model driven by historical stringency",
    "rl": "greedy trained policy",
    "rl_filtered": "median-filtered greedy policy, replayed",
}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_panel_csv(path, panel, units, provenance, columns, rows, manifest):
    """Write a panel CSV; ``provenance`` lists the PROVENANCE keys used by the columns."""
    buf = io.StringIO()
    buf.write(f"# panel: {panel}\n")
    buf.write(f"# units: {units}\n")
    for key in provenance:
        buf.write(f"# provenance: {key} = {PROVENANCE[key]}\n")
    buf.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def line_panel(path, title, ylabel, x, series, xlabel="day"):
    """SVG line chart; ``series`` is ``[(label, values), ...]``."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for label, values in series:
        ax.plot(x, values, label=label, linewidth=1.2)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def scatter_fit_panel(path, title, x, y, curve_x, curve_y, xlabel, ylabel):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(x, y, s=14, label="actual")
    ax.plot(curve_x, curve_y, color="black", linewidth=1.2, label="cubic fit")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
