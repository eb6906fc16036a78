"""Report records and their CSV / JSON-lines emission."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction

from .errors import MalformedInput


@dataclass
class ReportRecord:
    mechanism: str
    instance: str
    seed: int
    m: int
    n: int
    k: int
    welfare: int
    denominator: int = 1
    opt: int | None = None
    ratio: float | None = None
    payments: list = field(default_factory=list)
    queries: list = field(default_factory=list)
    z: int | None = None
    kind: str | None = None
    wall_time: float | None = None
    error: str | None = None

    def __post_init__(self):
        if self.ratio is None and self.opt is not None:
            self.ratio = ratio_of(self.opt, self.welfare)


COLUMNS = [f.name for f in fields(ReportRecord)]
_INT = {"seed", "m", "n", "k", "welfare", "denominator", "opt", "z"}
_LIST = {"payments", "queries"}
_FLOAT = {"ratio", "wall_time"}


def ratio_of(opt: int, welfare: int) -> float | None:
    """opt / welfare; 1 when both are zero, None when only welfare is zero."""
    if welfare == 0:
        return 1.0 if opt == 0 else None
    return float(Fraction(opt, welfare))


def _csv_cell(name, val):
    if val is None:
        return ""
    if name in _LIST:
        return ";".join(str(x) for x in val)
    return repr(val) if isinstance(val, float) else str(val)


def _parse_cell(name, text):
    if text == "":
        return [] if name in _LIST else None
    if name in _LIST:
        return [int(x) for x in text.split(";")]
    if name in _INT:
        return int(text)
    if name in _FLOAT:
        return float(text)
    return text


def emit(records, fmt: str = "jsonl") -> str:
    """Serialize records with a fixed column order; empty input gives a header-only CSV."""
    if fmt == "jsonl":
        return "".join(json.dumps({c: asdict(r)[c] for c in COLUMNS}, separators=(",", ":")) + "\n"
                       for r in records)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([_csv_cell(c, getattr(r, c)) for c in COLUMNS])
        return buf.getvalue()
    raise MalformedInput(f"unknown report format {fmt!r}")


def report_emit(records, fmt: str, path=None) -> str:
    text = emit(records, fmt)
    if path is not None:
        with open(path, "w", newline="") as f:
            f.write(text)
    return text


def parse(text: str, fmt: str | None = None) -> list[ReportRecord]:
    if fmt is None:
        fmt = "jsonl" if text.lstrip().startswith("{") or not text.strip() else "csv"
    if fmt == "jsonl":
        return [ReportRecord(**json.loads(ln)) for ln in text.splitlines() if ln.strip()]
    if fmt == "csv":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            return []
        head = rows[0]
        if head != COLUMNS:
            raise MalformedInput("report CSV header does not match the record columns")
        return [ReportRecord(**{c: _parse_cell(c, v) for c, v in zip(head, row)}) for row in rows[1:]]
    raise MalformedInput(f"unknown report format {fmt!r}")


def read_records(path) -> list[ReportRecord]:
    with open(path, newline="") as f:
        text = f.read()
    return parse(text, "csv" if str(path).endswith(".csv") else None)


@dataclass
class CellSummary:
    mechanism: str
    kind: str | None
    m: int
    n: int
    k: int
    trials: int
    errors: int
    worst_ratio: float | None
    mean_ratio: float | None
    bound: float | None = None  # m/k for chunking
    empirical_constant: float | None = None  # worst ratio / sqrt(m/k) for the bucket mechanisms


SUMMARY_COLUMNS = [f.name for f in fields(CellSummary)]


def summarize(records) -> list[CellSummary]:
    """Worst and mean ratio per (mechanism, kind, m, n, k) cell, in first-seen order."""
    cells: dict = {}
    for r in records:
        cells.setdefault((r.mechanism, r.kind, r.m, r.n, r.k), []).append(r)
    out = []
    for (mech, kind, m, n, k), rs in cells.items():
        ratios = [r.ratio for r in rs if r.error is None and r.ratio is not None]
        unbounded = any(r.error is None and r.opt is not None and r.ratio is None for r in rs)
        worst = float("inf") if unbounded else (max(ratios) if ratios else None)
        mean = sum(ratios) / len(ratios) if ratios and not unbounded else worst
        const = None
        if mech != "chunking" and worst is not None and worst != float("inf"):
            const = worst / (m / k) ** 0.5
        out.append(CellSummary(mech, kind, m, n, k, len(rs), sum(r.error is not None for r in rs),
                               worst, mean, m / k if mech == "chunking" else None, const))
    return out


def emit_summary(cells, fmt: str = "csv") -> str:
    if fmt == "jsonl":
        return "".join(json.dumps(asdict(c), separators=(",", ":")) + "\n" for c in cells)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for c in cells:
        w.writerow(["" if getattr(c, k) is None else getattr(c, k) for k in SUMMARY_COLUMNS])
    return buf.getvalue()


__all__ = ["ReportRecord", "COLUMNS", "ratio_of", "emit", "report_emit", "parse", "read_records",
           "CellSummary", "summarize", "emit_summary"]
