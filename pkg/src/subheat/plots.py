"""SVG rendering of the decay-fit and equivalence-ratio tables.

Rendering is data-driven and byte-reproducible: the SVG id salt is fixed
and the date stamp is dropped.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

log = logging.getLogger(__name__)

_RC = {"svg.hashsalt": "subheat", "svg.fonttype": "path", "figure.figsize": (5.0, 3.6), "font.size": 9}


def _read(path: Path) -> tuple:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return (rows[0], rows[1:]) if rows else ([], [])


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_decay(csv_path: Path, svg_path: Path) -> Path:
    header, rows = _read(csv_path)
    x = [float(r[header.index("log_distance")]) for r in rows]
    y = [float(r[header.index("log_value")]) for r in rows]
    env = [float(r[header.index("envelope")]) for r in rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.scatter(x, y, s=6, color="0.35", label="kernel")
        ax.plot(x, env, color="C3", lw=1.2, label="fitted line")
        ax.set_xlabel("log |x - y|")
        ax.set_ylabel("log |kernel|")
        ax.set_title(csv_path.stem.replace("decay_", ""))
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, svg_path)


def plot_equivalence(csv_path: Path, svg_path: Path, band=(0.1, 10.0)) -> Path:
    header, rows = _read(csv_path)
    ratio_cols = [i for i, h in enumerate(header) if "/" in h]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for k, i in enumerate(ratio_cols):
            vals = [float(r[i]) for r in rows]
            ax.scatter(range(len(rows)), vals, s=14, label=header[i], color=f"C{k % 10}")
        for b in band:
            ax.axhline(b, color="0.5", lw=0.8, ls="--")
        ax.set_yscale("log")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels([r[0] for r in rows], rotation=20, fontsize=7)
        ax.set_ylabel("ratio")
        ax.set_title(csv_path.stem)
        ax.legend(frameon=False, fontsize=6)
        fig.tight_layout()
        return _save(fig, svg_path)


def emit_plots(report_dir) -> list:
    """One SVG per decay-fit table and per equivalence table found under ``report_dir/tables``."""
    report_dir = Path(report_dir)
    tables = report_dir / "tables"
    out = []
    decay = sorted(p for p in tables.glob("decay_*.csv") if p.stem != "decay_slopes") if tables.is_dir() else []
    equiv = sorted(tables.glob("equivalence_*.csv")) if tables.is_dir() else []
    if not decay and not equiv:
        log.warning("no decay or equivalence tables under %s; nothing to plot", report_dir)
        return out
    for p in decay:
        out.append(plot_decay(p, report_dir / "plots" / f"{p.stem}.svg"))
    for p in equiv:
        out.append(plot_equivalence(p, report_dir / "plots" / f"{p.stem}.svg"))
    return out
