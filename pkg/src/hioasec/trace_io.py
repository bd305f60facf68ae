"""CSV trace export and import.

One row per (step, module, variable) with header
``step,time,module,mode,variable,value``. Vectors are split into
``name[i]`` rows, floats use the shortest repr that round-trips, booleans
are ``true``/``false``.
"""

from __future__ import annotations

import csv
import io
import re
from collections.abc import Iterable
from pathlib import Path
from typing import Any

from .engine import TraceRecord
from .errors import HioasecError, ParseError

HEADER = ("step", "time", "module", "mode", "variable", "value")
_INDEXED = re.compile(r"^(?P<name>.+)\[(?P<i>\d+)\]$")


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def parse_value(text: str) -> Any:
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        return float(text)


def _rows(trace: Iterable[TraceRecord]):
    for r in trace:
        head = (str(r.step), format_value(float(r.time)), r.module, r.mode)
        for name, value in r.values:
            if isinstance(value, tuple):
                for i, item in enumerate(value):
                    yield head + (f"{name}[{i}]", format_value(item))
                if not value:
                    yield head + (f"{name}[]", "")
            else:
                yield head + (name, format_value(value))


def dumps_trace(trace: Iterable[TraceRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    writer.writerows(_rows(trace))
    return buf.getvalue()


def export_trace(trace: Iterable[TraceRecord], path: str | Path, format: str = "csv") -> None:
    if format != "csv":
        raise ValueError(f"unsupported trace format {format!r}")
    text = dumps_trace(trace)
    try:
        Path(path).write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise HioasecError(f"cannot write trace to {path}: {exc}") from exc


def loads_trace(text: str) -> list[TraceRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty trace file", line=1) from None
    if tuple(header) != HEADER:
        raise ParseError(f"unexpected header {header}", line=1)

    records: list[TraceRecord] = []
    key = None
    values: list[tuple[str, Any]] = []
    meta = None

    def flush():
        if key is not None:
            records.append(TraceRecord(meta[0], meta[1], meta[2], meta[3], tuple(values)))

    for lineno, row in enumerate(reader, start=2):
        if len(row) != 6:
            raise ParseError(f"expected 6 columns, got {len(row)}", line=lineno)
        step, time, module, mode, name, raw = row
        this = (int(step), module)
        if this != key:
            flush()
            key = this
            meta = (int(step), float(time), module, mode)
            values = []
        m = _INDEXED.match(name)
        if name.endswith("[]"):
            values.append((name[:-2], ()))
        elif m:
            base = m.group("name")
            item = parse_value(raw)
            if values and values[-1][0] == base and isinstance(values[-1][1], tuple):
                values[-1] = (base, values[-1][1] + (item,))
            else:
                values.append((base, (item,)))
        else:
            values.append((name, parse_value(raw)))
    flush()
    return records


def import_trace(path: str | Path) -> list[TraceRecord]:
    return loads_trace(Path(path).read_text(encoding="utf-8"))
