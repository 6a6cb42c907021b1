"""Sweep result tables: CSV / JSONL serialization, metadata sidecar and merging."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

__all__ = ["SweepRow", "SweepResult", "SchemaError", "write_result", "read_result", "merge_results"]

FORMATS = ("csv", "jsonl")


class SchemaError(ValueError):
    """Result files that cannot be joined."""


def _fmt(x: float) -> str:
    return f"{x:.17e}"


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    mode: str
    csi: str
    trials: int
    mean_sum_rate: float
    std_err: float
    user_rates: tuple = ()
    overhead: int = 0
    failures: int = 0
    empirical_sum_rate: float = float("nan")
    errors: tuple = ()

    @property
    def label(self) -> str:
        return f"{self.mode}/{self.csi}"

    def __eq__(self, other):
        if not isinstance(other, SweepRow):
            return NotImplemented
        return _canonical(self) == _canonical(other)

    def __hash__(self):
        return hash(_canonical(self))


def _canonical(row: SweepRow) -> tuple:
    # NaN-aware identity via the exact text encoding
    return tuple(_encode(getattr(row, f.name)) for f in fields(row))


def _encode(value):
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return _fmt(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, tuple):
        if all(isinstance(v, float) for v in value):
            return ";".join(_fmt(v) for v in value)
        return " | ".join(str(v) for v in value)
    return str(value)


_FLOAT = {"value", "mean_sum_rate", "std_err", "empirical_sum_rate"}
_INT = {"trials", "overhead", "failures"}


def _decode(name: str, text: str):
    if name in _FLOAT:
        return float(text)
    if name in _INT:
        return int(text)
    if name == "user_rates":
        return tuple(float(t) for t in text.split(";")) if text else ()
    if name == "errors":
        return tuple(text.split(" | ")) if text else ()
    return text


COLUMNS = tuple(f.name for f in fields(SweepRow))


@dataclass
class SweepResult:
    """Rows sorted by axis value plus free-form metadata (config digest, seed)."""

    rows: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r.value)

    @property
    def axis(self) -> str | None:
        return self.rows[0].axis if self.rows else None

    def series(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r.label not in seen:
                seen.append(r.label)
        return seen

    def select(self, mode: str | None = None, csi: str | None = None) -> list:
        return [r for r in self.rows if (mode is None or r.mode == mode) and (csi is None or r.csi == csi)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([_encode(getattr(r, c)) for c in COLUMNS])
        return buf.getvalue()

    def to_jsonl(self) -> str:
        lines = []
        for r in self.rows:
            lines.append(json.dumps({c: _encode(getattr(r, c)) for c in COLUMNS}, sort_keys=False))
        return "".join(line + "\n" for line in lines)

    @classmethod
    def from_text(cls, text: str, fmt: str, metadata: dict | None = None) -> "SweepResult":
        if fmt == "csv":
            reader = csv.DictReader(io.StringIO(text))
            if tuple(reader.fieldnames or ()) != COLUMNS:
                raise SchemaError(f"unexpected columns {reader.fieldnames}")
            records = list(reader)
        elif fmt == "jsonl":
            records = [json.loads(line) for line in text.splitlines() if line.strip()]
            for rec in records:
                if tuple(rec) != COLUMNS:
                    raise SchemaError(f"unexpected keys {list(rec)}")
        else:
            raise ValueError(f"unknown format {fmt!r}")
        rows = [SweepRow(**{c: _decode(c, rec[c]) for c in COLUMNS}) for rec in records]
        return cls(rows, dict(metadata or {}))

    def __eq__(self, other):
        if not isinstance(other, SweepResult):
            return NotImplemented
        return self.rows == other.rows and self.metadata == other.metadata


def metadata_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def _infer_format(path) -> str:
    return "jsonl" if Path(path).suffix == ".jsonl" else "csv"


def write_result(result: SweepResult, path, fmt: str | None = None) -> Path:
    """Write the table and its ``<path>.meta.json`` sidecar."""
    fmt = fmt or _infer_format(path)
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    text = result.to_csv() if fmt == "csv" else result.to_jsonl()
    path.write_text(text)
    meta = dict(result.metadata, format=fmt)
    metadata_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_result(path, fmt: str | None = None) -> SweepResult:
    path = Path(path)
    meta_file = metadata_path(path)
    meta = json.loads(meta_file.read_text()) if meta_file.exists() else {}
    fmt = fmt or meta.get("format") or _infer_format(path)
    meta.pop("format", None)
    return SweepResult.from_text(path.read_text(), fmt, meta)


def merge_results(results: list, names: list | None = None) -> tuple[list[str], list[list]]:
    """Join results on the sweep axis into one wide table.

    Returns ``(header, rows)``; the header is ``[axis, <series>...]`` with one
    mean-sum-rate column and one standard-error column per series. Series that
    appear in more than one input are prefixed with the input name.
    """
    if not results:
        raise SchemaError("no result files given")
    axes = {r.axis for r in results if r.rows}
    if len(axes) != 1:
        raise SchemaError(f"inputs sweep different axes: {sorted(map(str, axes))}")
    axis = axes.pop()
    names = names or [f"run{i}" for i in range(len(results))]
    labels = [lab for res in results for lab in res.series()]
    columns = []
    for res, name in zip(results, names):
        for lab in res.series():
            columns.append((res, lab, f"{name}:{lab}" if labels.count(lab) > 1 else lab))
    values = sorted({r.value for res in results for r in res.rows})
    header = [axis]
    for _, _, col in columns:
        header += [col, f"{col}:std_err"]
    table = []
    for v in values:
        line = [v]
        for res, lab, _ in columns:
            match = [r for r in res.rows if r.value == v and r.label == lab]
            line += [match[0].mean_sum_rate, match[0].std_err] if match else [math.nan, math.nan]
        table.append(line)
    return header, table


def format_table(header: list[str], table: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for line in table:
        w.writerow([_fmt(float(x)) for x in line])
    return buf.getvalue()


def row_dict(row: SweepRow) -> dict:
    return asdict(row)
