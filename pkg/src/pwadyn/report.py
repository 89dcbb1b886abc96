"""Locale-independent record and table output."""
from __future__ import annotations

import math
import re

from gmpy2 import mpq

from .geom import fmt_rat

_WS = re.compile(r"\s+")


def fmt_value(v) -> str:
    """Rationals as p/q, floats with 12 significant digits, booleans as
    true/false, sequences comma-joined; whitespace in strings becomes ';'."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, int):
        return str(v)
    if type(v) is type(mpq(0)):
        return fmt_rat(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".12g")
    if isinstance(v, (tuple, list)):
        if len(v) == 2 and all(type(x) is type(mpq(0)) for x in v):
            return f"({fmt_rat(v[0])},{fmt_rat(v[1])})"
        return ",".join(fmt_value(x) for x in v)
    return _WS.sub(";", str(v).strip())


def record_line(rec: dict) -> str:
    return " ".join(f"{k}={fmt_value(v)}" for k, v in rec.items())


def format_records(records) -> str:
    return "".join(record_line(r) + "\n" for r in records)


def format_table(records) -> str:
    """Aligned columns; a new header starts whenever the key set changes."""
    out = []
    group, keys = [], None

    def flush():
        if not group:
            return
        rows = [[fmt_value(r.get(k, "")) for k in keys] for r in group]
        widths = [max(len(k), *(len(row[i]) for row in rows)) for i, k in enumerate(keys)]
        out.append("  ".join(k.ljust(w) for k, w in zip(keys, widths)).rstrip())
        for row in rows:
            out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())

    for r in records:
        ks = list(r.keys())
        if ks != keys:
            flush()
            if out:
                out.append("")
            group, keys = [], ks
        group.append(r)
    flush()
    return "".join(line + "\n" for line in out)


def render(records, mode: str = "records") -> str:
    records = list(records)
    if mode == "table":
        return format_table(records)
    return format_records(records)


def parse_record_line(line: str) -> dict:
    """Inverse of record_line for values without whitespace."""
    out = {}
    for tok in line.split():
        k, sep, v = tok.partition("=")
        if sep:
            out[k] = v
    return out
