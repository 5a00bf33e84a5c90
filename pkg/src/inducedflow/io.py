"""Deterministic CSV/JSON emission with all-or-nothing output directories."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["format_float", "csv_text", "json_text", "AtomicOutput", "jsonable"]


def format_float(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    return "%.17g" % (float(x) + 0.0)  # no negative zero


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return " ".join(str(i) for i in v)
    return str(v)


def csv_text(header, rows) -> str:
    """RFC 4180 CSV (CRLF line ends, minimal quoting)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        if isinstance(row, dict):
            row = [row[h] for h in header]
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats (to ``None``)."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def json_text(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


class AtomicOutput:
    """Collect files in a temporary directory and publish them together.

    Files are staged next to the target directory and moved in only when the
    ``with`` block exits cleanly; on error nothing is published.
    """

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self._tmp = None

    def __enter__(self):
        parent = self.out_dir.resolve().parent
        parent.mkdir(parents=True, exist_ok=True)
        self._tmp = Path(tempfile.mkdtemp(prefix=".inducedflow-", dir=parent))
        os.chmod(self._tmp, 0o755)
        return self

    def write(self, name, text):
        (self._tmp / name).write_text(text, encoding="utf-8", newline="")

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None and not self.out_dir.exists():
                # whole directory appears in one rename
                os.rename(self._tmp, self.out_dir)
            elif exc_type is None:
                for f in sorted(self._tmp.iterdir()):
                    os.replace(f, self.out_dir / f.name)
        finally:
            shutil.rmtree(self._tmp, ignore_errors=True)
        return False
