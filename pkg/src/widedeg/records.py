"""Output files: JSON-lines records, CSV tables, summaries and manifests.

Everything except ``manifest.json`` is a pure function of the resolved
configuration, so repeated runs give byte-identical files.  Wall-clock
times live in the manifest only.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["FORMAT_VERSION", "sanitize", "RunWriter", "read_records"]

FORMAT_VERSION = 1


def sanitize(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _dumps(obj):
    return json.dumps(sanitize(obj), sort_keys=True, separators=(",", ":"))


class RunWriter:
    """Collects the files of one run under ``out``."""

    def __init__(self, out):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []

    def _track(self, name):
        if name not in self.files:
            self.files.append(name)
        return self.out / name

    def records(self, recs, name="records.jsonl"):
        path = self._track(name)
        with open(path, "w", newline="\n") as fh:
            for r in recs:
                fh.write(_dumps({"format_version": FORMAT_VERSION, **r}) + "\n")
        return path

    def table(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["# format_version", FORMAT_VERSION])
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        path = self._track(name)
        path.write_text(buf.getvalue())
        return path

    def summary(self, text, name="summary.txt"):
        path = self._track(name)
        path.write_text(f"format_version={FORMAT_VERSION}\n" + text.rstrip("\n") + "\n")
        return path

    def manifest(self, command, config, exit_code, started, finished, argv=None):
        data = {
            "format_version": FORMAT_VERSION,
            "command": command,
            "config": config,
            "exit_code": exit_code,
            "started": started,
            "finished": finished,
            "argv": list(argv or []),
            "files": sorted(self.files),
        }
        path = self.out / "manifest.json"
        path.write_text(json.dumps(sanitize(data), sort_keys=True, indent=2) + "\n")
        return path


def _cell(v):
    v = sanitize(v)
    if isinstance(v, float):
        return repr(v)
    return v


def read_records(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
