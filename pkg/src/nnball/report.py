"""Verifier reports and their CSV / JSON serialization."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Optional

CSV_COLUMNS = ("experiment", "model", "n", "y", "estimate", "reference", "stderr", "margin", "pass")


@dataclass
class ReportRow:
    experiment: str
    model: str
    n: Optional[float]
    y: Optional[float]
    estimate: float
    reference: float
    stderr: float = math.nan
    margin: float = math.nan
    passed: Optional[bool] = None  # None: reported, not asserted

    def as_csv(self) -> list[str]:
        return [
            self.experiment,
            self.model,
            _fmt(self.n),
            _fmt(self.y),
            _fmt(self.estimate),
            _fmt(self.reference),
            _fmt(self.stderr),
            _fmt(self.margin),
            "" if self.passed is None else ("true" if self.passed else "false"),
        ]


@dataclass
class VerifierReport:
    experiment: str
    model: str
    rows: list[ReportRow] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    force_fail: bool = False

    @property
    def passed(self) -> bool:
        if self.force_fail:
            return False
        return all(r.passed is not False for r in self.rows)

    def add(self, **kw) -> ReportRow:
        row = ReportRow(model=self.model, **kw)
        self.rows.append(row)
        return row

    def summary(self) -> dict:
        out = {
            "experiment": self.experiment,
            "model": self.model,
            "pass": self.passed,
            "rows": len(self.rows),
            "asserted": sum(r.passed is not None for r in self.rows),
            "failed": sum(r.passed is False for r in self.rows),
            "notes": list(self.notes),
        }
        if self.extra:
            out["details"] = _jsonable(self.extra)
        return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        for row in rep.rows:
            w.writerow(row.as_csv())
    return buf.getvalue()


def reports_to_summary(reports) -> dict:
    return {
        "pass": all(r.passed for r in reports),
        "experiments": [r.summary() for r in reports],
    }


def atomic_write(path: str, text: str) -> None:
    """Write through a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
