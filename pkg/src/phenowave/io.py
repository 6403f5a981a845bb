"""CSV snapshot files and the NDJSON run log."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .continuum import Snapshot
from .wave import extract_ybar

FLOAT_FMT = "%.17e"

FULL_1D = ("t", "x", "y", "n")
FULL_2D = ("t", "x", "x2", "y", "n")
SUMMARY_1D = ("t", "x", "rho", "M", "E", "ybar")
SUMMARY_2D = ("t", "x", "x2", "rho", "M", "E", "ybar")
ORACLE_COLUMNS = ("t", "x", "ybar", "rho", "rho_oracle", "M", "M_oracle", "E", "E_oracle")


def header(schema: str, dim: int = 1) -> tuple[str, ...]:
    table = {("full", 1): FULL_1D, ("full", 2): FULL_2D, ("summary", 1): SUMMARY_1D, ("summary", 2): SUMMARY_2D}
    try:
        return table[(schema, dim)]
    except KeyError:
        raise ValueError(f"unknown schema {schema!r} for dim {dim}") from None


def _snapshot_dim(s: Snapshot) -> int:
    return np.ndim(s.rho) if s.rho is not None else np.ndim(s.n) - 1


def snapshot_rows(s: Snapshot, schema: str) -> np.ndarray:
    x = np.asarray(s.x, float)
    y = np.asarray(s.y, float)
    dim = _snapshot_dim(s)
    if schema == "full":
        n = np.asarray(s.n, float)
        grids = np.meshgrid(*([x] * dim), y, indexing="ij")
        cols = [np.full(n.size, s.t)] + [g.ravel() for g in grids] + [n.ravel()]
    elif schema == "summary":
        ybar = extract_ybar(s.n, y) if s.n is not None else np.full(np.shape(s.rho), np.nan)
        grids = np.meshgrid(*([x] * dim), indexing="ij")
        cols = [np.full(np.size(s.rho), s.t)] + [g.ravel() for g in grids] + \
               [np.ravel(s.rho), np.ravel(s.M), np.ravel(s.E), np.ravel(ybar)]
    else:
        raise ValueError(f"unknown schema {schema!r}")
    return np.column_stack(cols)


def emit_snapshot(snaps, schema: str, path, dim: int | None = None) -> Path:
    """Write snapshots to ``path`` as CSV with a fixed header row.

    ``snaps`` is a snapshot or a list of them; an empty list writes the header
    only (pass ``dim`` then, default 1).
    """
    if isinstance(snaps, Snapshot):
        snaps = [snaps]
    snaps = list(snaps)
    if dim is None:
        dim = _snapshot_dim(snaps[0]) if snaps else 1
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header(schema, dim)) + "\n")
        for s in snaps:
            np.savetxt(fh, snapshot_rows(s, schema), fmt=FLOAT_FMT, delimiter=",")
    return path


def write_table(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        arr = np.asarray(rows, float).reshape(-1, len(columns))
        if arr.size:
            np.savetxt(fh, arr, fmt=FLOAT_FMT, delimiter=",")
    return path


def read_table(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        cols = fh.readline().strip().split(",")
        body = fh.read()
    if not body.strip():
        return cols, np.empty((0, len(cols)))
    return cols, np.loadtxt(body.splitlines(), delimiter=",", ndmin=2)


def _axis(values):
    return np.unique(values)


def read_snapshots(path) -> list[Snapshot]:
    """Inverse of :func:`emit_snapshot` for either schema; fields come back bit-exact."""
    cols, data = read_table(path)
    dim = 2 if "x2" in cols else 1
    c = {name: i for i, name in enumerate(cols)}
    out = []
    for t in _axis(data[:, c["t"]]) if len(data) else []:
        block = data[data[:, c["t"]] == t]
        x = _axis(block[:, c["x"]])
        shape = (x.size,) * dim
        if "n" in c:
            y = _axis(block[:, c["y"]])
            n = block[:, c["n"]].reshape(shape + (y.size,))
            out.append(Snapshot(float(t), x, y, n, None, None, None, {"schema": "full"}))
        else:
            get = lambda k: block[:, c[k]].reshape(shape)
            out.append(Snapshot(float(t), x, None, None, get("rho"), get("M"), get("E"),
                                {"schema": "summary", "ybar": get("ybar")}))
    return out


def read_fields(full_path, summary_path) -> list[Snapshot]:
    """Join a full and a summary file into complete snapshots."""
    full = read_snapshots(full_path)
    summ = {s.t: s for s in read_snapshots(summary_path)}
    out = []
    for f in full:
        s = summ[f.t]
        out.append(Snapshot(f.t, f.x, f.y, f.n, s.rho, s.M, s.E, {}))
    return out


def append_ndjson(path, record: dict) -> None:
    """Append one JSON record per line; each record goes out in a single write."""
    line = json.dumps(record, sort_keys=True, default=_json_default) + "\n"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as fh:
        fh.write(line)


def read_ndjson(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.random.SeedSequence):
        return {"entropy": obj.entropy, "spawn_key": list(obj.spawn_key)}
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
