"""CSV/JSON emission with deterministic formatting."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def round_sig(x, digits: int = 12):
    """Round floats to ``digits`` significant digits, recursively.

    Non-finite floats become ``None`` so the output stays valid JSON.
    """
    if isinstance(x, dict):
        return {str(k): round_sig(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [round_sig(v, digits) for v in x]
    if isinstance(x, np.ndarray):
        return [round_sig(v, digits) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{digits}g}")
    return x


def header_line(command: str, params: dict) -> str:
    items = " ".join(f"{k}={params[k]}" for k in sorted(params))
    return f"# fraclab {__version__} {command} {items}".rstrip()


def write_csv(path: Path, command: str, params: dict, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(header_line(command, params) + "\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(f"{float(v):.12g}")) if math.isfinite(v) else "nan"
    return v


def document(command: str, params: dict, results: dict) -> dict:
    return {
        "tool": "fraclab",
        "version": __version__,
        "command": command,
        "params": params,
        "results": results,
    }


def write_json(path: Path, command: str, params: dict, results: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = round_sig(document(command, params, results))
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path
