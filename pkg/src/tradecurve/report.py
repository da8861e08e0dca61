"""Deterministic serialization of results: JSON, CSV/TSV, atomic file writes."""

from __future__ import annotations

import json
import math
import os
import tempfile
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from tradecurve.dynamics import PowerLawEntry, YearlyResult
from tradecurve.stages import StageCounts


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _num(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    # JSON has no inf/nan
    return fmt_float(x) if math.isfinite(x) else "null"


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits.

    The stdlib encoder always uses the shortest repr, hence this small emitter.
    """
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, (bool, int, float, np.bool_, np.integer, np.floating)):
        return _num(obj)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (Sequence, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_num(v) for v in obj) + "]"
        items = [inner + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def delimited(header: Sequence[str], rows: Iterable[Sequence[Any]], sep: str) -> str:
    def cell(v: Any) -> str:
        if isinstance(v, (float, np.floating)):
            return fmt_float(v) if math.isfinite(v) else ""
        return str(v)

    lines = [sep.join(header)]
    lines.extend(sep.join(cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def write_all(outputs: Mapping[str | os.PathLike, str]) -> None:
    for path, text in outputs.items():
        atomic_write(path, text)


def yearly_record(r: YearlyResult) -> dict[str, Any]:
    p, cp = r.fit.params, r.cp
    return {
        "year": r.year,
        "variable": r.variable.value,
        "A": p.A,
        "k": p.k,
        "XM": p.xm,
        "XL": cp.x_left,
        "XR": cp.x_right,
        "YL": cp.y_left,
        "YM": cp.y_mid,
        "YR": cp.y_right,
        "r2": r.fit.r_squared,
        "f": r.fit.f_value,
        "proportions": list(r.proportions),
        "normalized": r.normalized,
        "y_min": r.y_min,
        "y_max": r.y_max,
    }


def stage_csv(year: int, counts: StageCounts) -> str:
    return delimited(
        ["country", "year", "x", "stage"],
        ((c, year, x, str(s)) for c, x, s in counts.labels),
        ",",
    )


def power_law_record(e: PowerLawEntry) -> dict[str, Any]:
    rec: dict[str, Any] = {"X": e.x.value, "Y": e.y.value}
    if e.fit is None:
        rec["error"] = e.error.to_dict() if e.error else {"error": "InsufficientData"}
        return rec
    rec.update(
        c=e.fit.c,
        gamma=e.fit.gamma,
        r2=e.fit.r_squared,
        n_points=e.fit.n_points,
        n_excluded=e.fit.n_excluded,
        regime=e.fit.regime,
    )
    return rec
