"""Canonical machine-readable reports.

Emission is byte-deterministic: keys sorted, floats at 17 significant
digits, two-space indentation.  Extended reals use the reserved sentinel
strings "+inf", "-inf" and "nan", which the loader converts back, so
infinite curvature values round-trip.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from ._version import __version__

_SENTINELS = {"+inf": float("inf"), "-inf": float("-inf")}


def to_jsonable(obj):
    """Recursively convert report objects to plain JSON values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _fmt_float(x: float) -> str:
    if np.isnan(x):
        return '"nan"'
    if np.isinf(x):
        return '"+inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _write(obj, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad + "  ")
            _write(v, indent + 1, out)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(pad + "]")
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj)
        for i, k in enumerate(keys):
            out.append(pad + "  " + json.dumps(str(k)) + ": ")
            _write(obj[k], indent + 1, out)
            out.append(",\n" if i + 1 < len(keys) else "\n")
        out.append(pad + "}")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} canonically")


def dumps_report(payload, kind: str, seed: int | None = None,
                 tolerances: dict | None = None) -> str:
    doc = {
        "tool": "kktstab",
        "version": __version__,
        "kind": kind,
        "seed": seed,
        "tolerances": to_jsonable(tolerances or {}),
        "payload": to_jsonable(payload),
    }
    out: list[str] = []
    _write(doc, 0, out)
    out.append("\n")
    return "".join(out)


def emit_report(payload, path, kind: str, seed: int | None = None,
                tolerances: dict | None = None) -> None:
    text = dumps_report(payload, kind, seed, tolerances)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def _decode(obj):
    if isinstance(obj, str):
        if obj in _SENTINELS:
            return _SENTINELS[obj]
        if obj == "nan":
            return float("nan")
        return obj
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _decode(v) for k, v in obj.items()}
    return obj


def load_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return _decode(json.load(fh))
