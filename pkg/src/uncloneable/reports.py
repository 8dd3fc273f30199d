"""Tabular reports with provenance, written as CSV or JSON.

The timestamp sits on a line of its own (the first line of a CSV file), so
two runs with the same configuration differ only in that line.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__


def _clean(v):
    if isinstance(v, bool) or v is None or isinstance(v, (int, str)):
        return v
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float):
        return v if math.isfinite(v) else str(v)
    return str(v)


@dataclass
class Report:
    command: str
    config: dict
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def add(self, row: dict) -> None:
        self.rows.append([_clean(row.get(c)) for c in self.columns])

    def body(self) -> dict:
        return {
            "command": self.command,
            "version": __version__,
            "config": self.config,
            "summary": {k: _clean(v) for k, v in self.summary.items()},
            "columns": self.columns,
            "rows": self.rows,
        }

    def to_csv(self, timestamp: str) -> str:
        out = io.StringIO()
        out.write(f"# timestamp: {timestamp}\n")
        b = self.body()
        for key in ("command", "version", "config", "summary"):
            out.write(f"# {key}: {json.dumps(b[key], sort_keys=True)}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
        return out.getvalue()

    def to_json(self, timestamp: str) -> str:
        # indented output puts the timestamp on a line of its own
        return json.dumps({"timestamp": timestamp, "report": self.body()}, sort_keys=True, indent=1) + "\n"

    def write(self, path: str | Path | None, fmt: str = "csv", timestamp: str | None = None) -> str:
        ts = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
        text = self.to_csv(ts) if fmt == "csv" else self.to_json(ts)
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def strip_timestamp(text: str) -> str:
    """Report body: the file minus its timestamp line."""
    lines = text.splitlines(keepends=True)
    return "".join(l for l in lines if not (l.startswith("# timestamp:") or l.startswith(' "timestamp":')))


def read_csv(text: str) -> tuple[dict, list[dict]]:
    """Parse a CSV report into its provenance header and rows (values left as strings)."""
    meta, lines = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            meta[key] = val if key == "timestamp" else json.loads(val)
        else:
            lines.append(line)
    return meta, list(csv.DictReader(lines))
