"""Series file reading/writing: CSV for plotting, JSON for programs.

Every file carries the schema version and a flattened provenance block.
Floats are rendered with ``repr`` (shortest round-trip form), so identical
runs produce identical bytes.  Writes go to a temporary file in the target
directory followed by an atomic rename; a failed run leaves nothing behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .model import Basis, DriveParameters, epsilon_at
from .propagator import Trajectory

SCHEMA_VERSION = 1


def _flatten(prefix: str, obj, out: dict) -> None:
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], out)
    elif isinstance(obj, (list, tuple)):
        out[prefix] = ",".join(_scalar_str(x) for x in obj)
    else:
        out[prefix] = _scalar_str(obj)


def _scalar_str(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def atomic_write_text(path: Path, text: str) -> None:
    """Write text via a same-directory temp file and atomic rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def series_table(
    traj: Trajectory,
    drive: DriveParameters | None = None,
    adiabatic: Trajectory | None = None,
) -> tuple[list[str], list[list[float | None]]]:
    """Column names and row values for a trajectory.

    Optional columns: the instantaneous detuning (needs the drive) and
    adiabatic-basis populations, populated only at the sample times the
    masked adiabatic trajectory kept (None elsewhere).
    """
    columns = ["t_ns", "P0", "P1"]
    cols: list[np.ndarray] = [traj.times, traj.p0, traj.p1]
    optional: list[np.ndarray] = []
    if drive is not None:
        columns.append("epsilon_MHz")
        cols.append(np.asarray(epsilon_at(drive, traj.times)))
    if adiabatic is not None:
        if adiabatic.basis is not Basis.ADIABATIC:
            raise ValueError("overlay trajectory must be adiabatic-basis")
        columns += ["P_adiab_g", "P_adiab_e"]
        g = np.full(traj.times.size, np.nan)
        e = np.full(traj.times.size, np.nan)
        idx = np.searchsorted(traj.times, adiabatic.times)
        ok = (idx < traj.times.size) & np.isclose(
            traj.times[np.minimum(idx, traj.times.size - 1)], adiabatic.times
        )
        if not np.all(ok):
            raise ValueError("adiabatic overlay samples are not a subset of the base grid")
        g[idx] = adiabatic.p0
        e[idx] = adiabatic.p1
        optional = [g, e]
    data = np.column_stack(cols + optional)
    rows: list[list[float | None]] = []
    for row in data:
        rows.append([None if isinstance(x, float) and np.isnan(x) else float(x) for x in row])
    # probabilities must sit in [0, 1]; clamp defensible float dust only
    for row in rows:
        for j, name in enumerate(columns):
            if name.startswith("P") and row[j] is not None:
                if row[j] < -1e-9 or row[j] > 1 + 1e-9:
                    raise ValueError(f"column {name} out of [0, 1]: {row[j]}")
                row[j] = min(1.0, max(0.0, row[j]))
    return columns, rows


def render_series_csv(columns, rows, provenance: dict) -> str:
    flat: dict[str, str] = {}
    _flatten("", provenance, flat)
    lines = [f"# lzsim-series schema={SCHEMA_VERSION}"]
    lines += [f"# {k} = {v}" for k, v in sorted(flat.items())]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join("" if x is None else repr(x) for x in row))
    return "\n".join(lines) + "\n"


def render_series_json(columns, rows, provenance: dict) -> str:
    doc = {
        "schema": SCHEMA_VERSION,
        "provenance": provenance,
        "columns": list(columns),
        "rows": rows,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def write_series(
    path: Path,
    traj: Trajectory,
    provenance: dict,
    fmt: str = "csv",
    drive: DriveParameters | None = None,
    adiabatic: Trajectory | None = None,
) -> None:
    columns, rows = series_table(traj, drive=drive, adiabatic=adiabatic)
    if fmt == "csv":
        text = render_series_csv(columns, rows, provenance)
    elif fmt == "json":
        text = render_series_json(columns, rows, provenance)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    atomic_write_text(Path(path), text)


def read_series(path: Path) -> tuple[dict, list[str], np.ndarray]:
    """Parse a series file (either format) into (meta, columns, data).

    Missing values come back as NaN.  CSV meta is the flattened provenance;
    JSON meta is the nested provenance dict.
    """
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        rows = [[np.nan if x is None else float(x) for x in row] for row in doc["rows"]]
        return doc["provenance"], list(doc["columns"]), np.array(rows, dtype=float)
    meta: dict[str, str] = {}
    columns: list[str] = []
    rows = []
    for line in text.splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body and not body.startswith("lzsim-series"):
                k, _, v = body.partition("=")
                meta[k.strip()] = v.strip()
            continue
        if not line.strip():
            continue
        if not columns:
            columns = line.split(",")
            continue
        rows.append([np.nan if tok == "" else float(tok) for tok in line.split(",")])
    if not columns:
        raise ValueError(f"{path}: no column header found")
    return meta, columns, np.array(rows, dtype=float)


def render_table_csv(columns, rows, provenance: dict) -> str:
    """Plain table (sweep output): same header discipline as series files."""
    return render_series_csv(columns, [list(r) for r in rows], provenance)
