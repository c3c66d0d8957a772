"""On-disk formats: PRSPAR01 array files, CSV data, run manifests and training logs."""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .core import DataError, DataSet, is_count_data

MAGIC = b"PRSPAR01"
_HEADER = struct.Struct("<8sQQ")


def save_array(path, a):
    """Write a 2-D float64 array (vectors become columns, scalars 1x1)."""
    a = np.asarray(a, dtype="<f8")
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a[:, None]
    elif a.ndim != 2:
        raise ValueError("ArrayFile holds 2-D arrays only")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, a.shape[0], a.shape[1]))
        f.write(np.ascontiguousarray(a).tobytes())


def load_array(path):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size or raw[:8] != MAGIC:
        raise DataError(f"{path}: not a PRSPAR01 file")
    _, rows, cols = _HEADER.unpack_from(raw)
    payload = raw[_HEADER.size:]
    if len(payload) != rows * cols * 8:
        raise DataError(f"{path}: payload holds {len(payload)} bytes, header promises {rows * cols * 8}")
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)


def load_csv(path):
    rows = []
    width = None
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(x) for x in line.split(",")]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def load_dataset(path, count=False):
    """Read an ArrayFile or CSV; ``count=True`` requests non-negative integer data."""
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(8)
    y = load_array(path) if head == MAGIC else load_csv(path)
    if count:
        if not is_count_data(y):
            raise DataError(f"{path}: count data must hold non-negative whole numbers")
        return DataSet(y, "count")
    return DataSet(y, "real")


def save_csv(path, y):
    with open(path, "w") as f:
        for row in np.atleast_2d(np.asarray(y, dtype=np.float64)):
            f.write(",".join(repr(float(x)) for x in row) + "\n")


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def save_params(directory, params):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = {}
    for key, value in params.items():
        name = f"{key}.prsp"
        save_array(directory / name, value)
        names[key] = name
    return names


def load_params(directory, shapes):
    """Load parameters saved by :func:`save_params`; ``shapes`` maps key -> "matrix"|"vector"|"scalar"."""
    directory = Path(directory)
    out = {}
    for key, kind in shapes.items():
        a = load_array(directory / f"{key}.prsp")
        out[key] = float(a[0, 0]) if kind == "scalar" else a[:, 0].copy() if kind == "vector" else a
    return out


def param_shapes(params):
    return {k: "scalar" if np.ndim(v) == 0 else "vector" if np.ndim(v) == 1 else "matrix" for k, v in params.items()}


def write_manifest(path, manifest):
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def read_manifest(path):
    with open(path) as f:
        return json.load(f)


class RunLogger:
    """Writes ``free_energy.csv`` and parameter checkpoints into a run directory.

    Checkpoints go to ``checkpoint/`` every iteration, or every 10th when
    the parameters hold 10**6 floats or more.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.csv_path = self.directory / "free_energy.csv"
        with open(self.csv_path, "w") as f:
            f.write("iteration,free_energy,seconds\n")

    def log(self, iteration, free_energy, seconds, params):
        with open(self.csv_path, "a") as f:
            f.write(f"{iteration},{free_energy!r},{seconds!r}\n")
        size = sum(np.size(v) for v in params.values())
        if size < 10**6 or iteration % 10 == 0:
            self.checkpoint(iteration, params, "checkpoint")

    def checkpoint(self, iteration, params, name):
        save_params(self.directory / name, params)
        with open(self.directory / name / "iteration.txt", "w") as f:
            f.write(f"{iteration}\n")

    def abort(self, iteration, free_energy, params):
        self.checkpoint(iteration, params, "diagnostic")
        with open(self.directory / "diagnostic" / "reason.txt", "w") as f:
            f.write(f"non-finite free energy {free_energy!r} at iteration {iteration}\n")


def read_trace(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    return np.atleast_1d(data["free_energy"])


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)
