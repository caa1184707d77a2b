"""CSV tables and gnuplot scripts.

Reals are written with 17 significant digits, so every value read back with
``float()`` has the bits that were written.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field


@dataclass
class Table:
    columns: tuple
    rows: list = field(default_factory=list)
    key: tuple = ()

    def sorted_rows(self):
        key = self.key or self.columns
        return sorted(self.rows, key=lambda r: tuple(_sort_key(r[k]) for k in key))


def _sort_key(v):
    # bools before numbers before strings; nan sorts last among numbers
    if isinstance(v, bool):
        return (0, int(v), "")
    if isinstance(v, (int, float)):
        v = float(v)
        return (1, float("inf") if v != v else v, "")
    return (2, 0.0, str(v))


def format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if v != v:
            return "nan"
        if v in (float("inf"), float("-inf")):
            return "inf" if v > 0 else "-inf"
        return "%.16e" % v
    text = str(v)
    if any(ch in text for ch in ',"\n'):
        raise ValueError(f"CSV field needs quoting: {text!r}")
    return text


def emit_csv(table: Table, path):
    lines = [",".join(table.columns)]
    for row in table.sorted_rows():
        lines.append(",".join(format_value(row[c]) for c in table.columns))
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    """Rows of a file written by :func:`emit_csv` as dicts of strings."""
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


def emit_plot_script(csv_path, path, series, x_column, y_column="error", title=""):
    """gnuplot script drawing ``y_column`` against ``x_column`` on log-log axes.

    One series per entry of ``series`` (values of the ``scheme`` column).  The
    CSV is referenced relative to the script's directory.
    """
    with open(csv_path, encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
    col = {name: i + 1 for i, name in enumerate(header)}
    for name in ("scheme", x_column, y_column):
        if name not in col:
            raise ValueError(f"{csv_path} has no column {name!r}")
    rel = os.path.relpath(csv_path, os.path.dirname(os.path.abspath(path)))
    stem = os.path.splitext(os.path.basename(path))[0]
    xlabel = {"tau": "tau", "matvecs": "matvecs"}.get(x_column, x_column)
    out = [
        "# gnuplot script; run from this directory: gnuplot " + os.path.basename(path),
        "set datafile separator ','",
        "set logscale xy",
        "set format xy '%.0e'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{y_column}'",
        "set key outside right",
        "set terminal pngcairo size 800,600",
        f"set output '{stem}.png'",
    ]
    if title:
        out.append(f"set title '{title}'")
    plots = [
        f"'{rel}' using (strcol({col['scheme']}) eq '{s}' ? ${col[x_column]} : NaN):{col[y_column]}"
        f" with linespoints title '{s}'"
        for s in series
    ]
    out.append("plot " + ", \\\n     ".join(plots) if plots else "# no series")
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("\n".join(out) + "\n")
