"""Trace CSV persistence."""

import csv
import math
from pathlib import Path

from .runner import TraceRecord

HEADER = ("run_id", "algorithm", "seed", "pass", "elbo", "elbo_se", "test_logloss", "wall_ms")


def _fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def format_trace_csv(records):
    lines = [",".join(HEADER)]
    for r in records:
        for text in (r.run_id, r.algorithm):
            if any(ch in text for ch in ',"\n\r'):
                raise ValueError(f"field {text!r} cannot be written unquoted")
        lines.append(
            ",".join(
                (
                    r.run_id,
                    r.algorithm,
                    str(int(r.seed)),
                    str(int(r.pass_index)),
                    _fmt(r.elbo),
                    _fmt(r.elbo_se),
                    _fmt(r.test_logloss),
                    _fmt(r.wall_ms),
                )
            )
        )
    return "\n".join(lines) + "\n"


def write_trace_csv(records, path):
    """Write records with the fixed header; refuses to create a file for no records."""
    records = list(records)
    if not records:
        raise ValueError("no trace records to write")
    text = format_trace_csv(records)
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def read_trace_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != HEADER:
            raise ValueError(f"{path}: unexpected trace header {header!r}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(HEADER):
                raise ValueError(f"{path}: line {lineno}: expected {len(HEADER)} fields, got {len(row)}")
            out.append(
                TraceRecord(
                    row[0], row[1], int(row[2]), int(row[3]),
                    float(row[4]), float(row[5]), float(row[6]), float(row[7]),
                )
            )
    return out
