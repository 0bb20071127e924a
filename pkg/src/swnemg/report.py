"""Run reports: in-memory form, JSON/CSV serialisation and chart emission."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

@dataclass
class RunReport:
    """Outcome of one harness command.

    ``rows`` holds one flat record per (subject, configuration) and is what
    the CSV table contains. ``summary`` aggregates over subjects,
    ``comparisons`` holds significance tests, ``timing`` any wall-clock
    measurements, and ``provenance`` identifies config, seed and version.
    """

    kind: str
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    comparisons: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        if "kind" not in known:
            raise DataError("report JSON lacks a 'kind' field")
        return cls(**known)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        columns = []
        for row in self.rows:
            columns += [k for k in row if k not in columns]
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _cell(row.get(k, "")) for k in columns})
        return buf.getvalue()

    def accuracies(self, **match) -> list[float]:
        return [r["accuracy"] for r in self.rows
                if all(r.get(k) == v for k, v in match.items())]

def _plain(obj):
    """Recursively convert numpy scalars/arrays and tuples to JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj

def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(_plain(v))
    return v

def summarize(values) -> dict:
    """Mean, sample standard deviation, min, max and count of accuracies."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"mean": float("nan"), "std": float("nan"), "min": float("nan"),
                "max": float("nan"), "n": 0}
    return {"mean": float(v.mean()), "std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
            "min": float(v.min()), "max": float(v.max()), "n": int(v.size)}

def config_digest(config: dict) -> str:
    text = json.dumps(_plain(config), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]

def emit_report(report: RunReport, out_dir, stem: str | None = None,
                charts: bool = True) -> list[Path]:
    """Write ``<stem>.csv``, ``<stem>.json`` and the report's SVG charts.

    Raises
    ------
    DataError
        If the output directory cannot be written.
    """
    out = Path(out_dir)
    stem = stem or report.kind
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        csv_path = out / f"{stem}.csv"
        csv_path.write_text(report.to_csv())
        written.append(csv_path)
        json_path = out / f"{stem}.json"
        json_path.write_text(report.to_json())
        written.append(json_path)
        if charts:
            from .plotting import charts_for
            written += charts_for(report, out, stem)
    except OSError as exc:
        raise DataError(f"cannot write report to {out}: {exc}") from exc
    return written

def load_report(path) -> RunReport:
    try:
        return RunReport.from_json(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc
