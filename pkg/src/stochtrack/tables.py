"""Locale-independent CSV and plain-text table output."""

import csv
import io

import numpy as np


def fmt(x):
    """Format a cell: 17 significant digits, complex as ``re+imj``."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (complex, np.complexfloating)):
        return f"{x.real:.17g}{x.imag:+.17g}j"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return "" if x is None else str(x)


def to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(c) for c in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    text = to_csv(header, rows)
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(text)
    return text


def to_text(header, rows, floatfmt="{:.6g}"):
    """Aligned plain-text table for terminals."""

    def cell(x):
        if isinstance(x, (float, np.floating)):
            return floatfmt.format(float(x))
        return fmt(x)

    body = [[str(h) for h in header]] + [[cell(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in body) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in body]
    return "\n".join(lines) + "\n"
