"""Per-iteration trace records and their CSV serialization."""

import csv
import io
from dataclasses import dataclass
from typing import Iterable, List, Optional

HEADER = "iter,res_base,res_rre,event,shift,step_seconds"
EVENTS = ("none", "restart", "skipped_degenerate")


@dataclass(frozen=True)
class TraceRow:
    iter: int
    res_base: float
    res_rre: Optional[float] = None
    event: str = "none"
    shift: Optional[float] = None
    step_seconds: float = 0.0

    def __post_init__(self):
        if self.event not in EVENTS:
            raise ValueError(f"unknown event tag {self.event!r}")
        if self.res_base < 0 or (self.res_rre is not None and self.res_rre < 0):
            raise ValueError("residual norms must be nonnegative")


def _fmt(value):
    # repr() gives the shortest string that round-trips a float exactly
    return "" if value is None else repr(float(value))


def _parse_opt(text):
    return None if text == "" else float(text)


def format_rows(rows: Iterable[TraceRow]) -> str:
    lines = [HEADER]
    for row in rows:
        lines.append(",".join([
            str(row.iter), _fmt(row.res_base), _fmt(row.res_rre), row.event,
            _fmt(row.shift), _fmt(row.step_seconds),
        ]))
    return "\n".join(lines) + "\n"


def write_csv(path, rows: Iterable[TraceRow]) -> None:
    rows = list(rows)
    check_rows(rows)
    with open(path, "w", newline="") as fh:
        fh.write(format_rows(rows))


def parse_csv(text: str) -> List[TraceRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or ",".join(header) != HEADER:
        raise ValueError(f"bad trace header: {header!r}")
    rows = []
    for rec in reader:
        if not rec:
            continue
        it, base, rre, event, shift, secs = rec
        rows.append(TraceRow(int(it), float(base), _parse_opt(rre), event,
                             _parse_opt(shift), float(secs)))
    check_rows(rows)
    return rows


def read_csv(path) -> List[TraceRow]:
    with open(path, newline="") as fh:
        return parse_csv(fh.read())


def check_rows(rows):
    """Iteration indices must start at 1 and strictly increase."""
    last = 0
    for row in rows:
        if row.iter <= last:
            raise ValueError(f"iteration index {row.iter} does not increase")
        last = row.iter
    if rows and rows[0].iter != 1:
        raise ValueError("trace must start at iteration 1")
