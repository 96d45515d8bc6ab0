"""Report rows and their CSV/JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import NumericIntegrityError

FIELDS = ("suite", "label", "n", "k", "theta", "t", "value", "limit", "gap", "tolerance", "passed", "seed")
_FLOAT_FIELDS = ("theta", "t", "value", "limit", "gap", "tolerance")
_INT_FIELDS = ("n", "k", "seed")


@dataclass(frozen=True)
class Row:
    """One report line.  Optional numeric fields are None when not applicable.

    The checked statistic is ``gap`` when the row has one (profile points
    compare an exact value with a limit) and ``value`` otherwise.  A row
    without a tolerance is informational and always passes.
    """

    suite: str
    label: str
    n: int | None
    k: int | None
    theta: float | None
    t: float | None
    value: float
    limit: float | None
    gap: float | None
    tolerance: float | None
    passed: bool
    seed: int

    @classmethod
    def check(cls, suite, label, value, tolerance=None, *, n=None, k=None, theta=None, t=None,
              limit=None, gap=None, seed=0) -> "Row":
        value = float(value)
        stat = value if gap is None else gap
        passed = True if tolerance is None else bool(stat <= tolerance)
        return cls(suite, label, n, k, theta, t, value, limit, gap, tolerance, passed, int(seed))

    def sort_key(self):
        return (self.suite, self.n if self.n is not None else -1,
                self.theta if self.theta is not None else -math.inf, self.label,
                self.k if self.k is not None else -1, self.t if self.t is not None else -math.inf)


def _num(x) -> str:
    return format(float(x), ".17g")


def validate(row: Row) -> None:
    for name in _FLOAT_FIELDS:
        v = getattr(row, name)
        if v is not None and not math.isfinite(v):
            raise NumericIntegrityError(f"{row.suite}/{row.label}: field {name} is {v}")


def _cells(row: Row) -> list[str]:
    validate(row)
    out = []
    for name in FIELDS:
        v = getattr(row, name)
        if v is None:
            out.append("")
        elif name in _FLOAT_FIELDS:
            out.append(_num(v))
        elif name == "passed":
            out.append("true" if v else "false")
        else:
            out.append(str(v))
    return out


def to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELDS)
    for row in rows:
        writer.writerow(_cells(row))
    return buf.getvalue()


def to_json(rows) -> str:
    items = []
    for row in rows:
        validate(row)
        parts = []
        for name in FIELDS:
            v = getattr(row, name)
            if v is None:
                tok = "null"
            elif name in _FLOAT_FIELDS:
                tok = _num(v)
            elif name == "passed":
                tok = "true" if v else "false"
            elif name in _INT_FIELDS:
                tok = str(int(v))
            else:
                tok = json.dumps(v)
            parts.append(f"{json.dumps(name)}: {tok}")
        items.append("  {" + ", ".join(parts) + "}")
    if not items:
        return "[]\n"
    return "[\n" + ",\n".join(items) + "\n]\n"


def _coerce(name, v):
    if v is None or v == "":
        return None
    if name in _FLOAT_FIELDS:
        return float(v)
    if name in _INT_FIELDS:
        return int(v)
    if name == "passed":
        return v if isinstance(v, bool) else v == "true"
    return v


def parse_json(text: str) -> list[Row]:
    return [Row(**{f: _coerce(f, obj.get(f)) for f in FIELDS}) for obj in json.loads(text)]


def parse_csv(text: str) -> list[Row]:
    reader = csv.DictReader(io.StringIO(text))
    return [Row(**{f: _coerce(f, rec[f]) for f in FIELDS}) for rec in reader]


def render(rows, fmt: str) -> str:
    if fmt == "csv":
        return to_csv(rows)
    if fmt == "json":
        return to_json(rows)
    raise ValueError(f"unknown report format {fmt!r}")


def atomic_write(path, text: str) -> None:
    """Write via a temporary sibling and rename, so failures leave no partial file."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        if isinstance(exc, OSError):
            raise OSError(f"cannot write report to {path}: {exc}") from exc
        raise


def emit_report(rows, fmt: str, path) -> None:
    """Serialise ``rows`` (fully validated first) and write them to ``path``."""
    atomic_write(path, render(list(rows), fmt))


def row_dict(row: Row) -> dict:
    return asdict(row)


assert tuple(f.name for f in fields(Row)) == FIELDS
