from __future__ import annotations

import numpy as np

from subheat.plots import emit_plots, plot_decay
from subheat.reports import write_csv


def _decay_table(root):
    r = np.linspace(-3.0, -0.7, 25)
    rows = [(x, -4.0 * x + 0.05 * np.sin(7 * x), -4.0 * x) for x in r]
    path = root / "tables" / "decay_frac_heat.csv"
    path.parent.mkdir(parents=True)
    write_csv(path, ["log_distance", "log_value", "envelope"], rows)
    return path


def test_decay_plot_is_svg(tmp_path):
    csv_path = _decay_table(tmp_path)
    svg = plot_decay(csv_path, tmp_path / "a.svg")
    text = svg.read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text


def test_rendering_is_byte_reproducible(tmp_path):
    csv_path = _decay_table(tmp_path)
    a = plot_decay(csv_path, tmp_path / "a.svg").read_bytes()
    b = plot_decay(csv_path, tmp_path / "b.svg").read_bytes()
    assert a == b


def test_emit_plots_finds_tables(tmp_path):
    _decay_table(tmp_path)
    write_csv(tmp_path / "tables" / "decay_slopes.csv", ["kind", "slope"], [("frac_heat", -4.0)])
    out = emit_plots(tmp_path)
    assert [p.name for p in out] == ["decay_frac_heat.svg"]


def test_emit_plots_empty(tmp_path):
    assert emit_plots(tmp_path) == []
