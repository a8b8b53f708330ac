"""Per-time diagnostics records and their CSV form.

CSV files are written with a fixed header and every float as ``%.17g`` so a
re-parse gives back the exact binary64 value; missing values are empty fields.
"""

import csv
import io
import math
from dataclasses import astuple, dataclass, fields


@dataclass(frozen=True)
class DiagnosticsReport:
    time: float
    entropy: float
    fisher: float = None
    m1: float = None
    w1_to_reference: float = None
    s_stat: float = None
    min_dist: float = None
    interaction: float = None
    n: int = None
    seed: int = None

    def __post_init__(self):
        for name in ("fisher", "m1", "w1_to_reference"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0, got {v!r}")
        if self.interaction is not None and not self.interaction > 0:
            raise ValueError("interaction must be > 0")


REPORT_COLUMNS = ("time", "n", "seed", "entropy", "fisher", "m1", "w1_to_reference", "s_stat", "min_dist", "interaction")


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return "%.17g" % v
    return str(v)


def csv_text(columns, rows):
    """rows: iterables of values aligned with columns, or dicts keyed by column."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        if isinstance(r, dict):
            r = [r.get(c) for c in columns]
        w.writerow([format_value(_py(v)) for v in r])
    return buf.getvalue()


def _py(v):
    # numpy scalars -> python
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        return v.item()
    return v


def report_rows(reports):
    names = [f.name for f in fields(DiagnosticsReport)]
    for r in reports:
        d = dict(zip(names, astuple(r)))
        yield [d[c] for c in REPORT_COLUMNS]


def reports_csv(reports):
    return csv_text(REPORT_COLUMNS, report_rows(reports))


def parse_value(s):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_csv(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        return header, [[parse_value(s) for s in row] for row in rd]
