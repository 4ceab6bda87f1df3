"""File formats: dense CSV matrices, JSON sidecars, tidy CSV tables and a checksum manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ArgumentError
from .forward import MeasuredDtn

__all__ = [
    "format_number",
    "matrix_to_csv",
    "matrix_from_csv",
    "write_dtn",
    "read_dtn",
    "table_to_csv",
    "dumps_json",
    "Manifest",
]


def format_number(x) -> str:
    """Shortest round-trip representation of a float."""
    return repr(float(x))


def matrix_to_csv(M) -> str:
    """Dense row-major CSV, full matrix, no header."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return "".join(",".join(format_number(v) for v in row) + "\n" for row in M)


def matrix_from_csv(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    try:
        M = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ArgumentError(f"matrix CSV holds a non-numeric entry: {exc}") from exc
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ArgumentError(f"matrix CSV must be square, got shape {M.shape}")
    return M


def dumps_json(obj) -> str:
    """Deterministic JSON text (sorted keys, trailing newline)."""
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def write_dtn(path, meas: MeasuredDtn | np.ndarray, provenance: dict | None = None) -> list[Path]:
    """Write a DtN matrix as CSV plus a sidecar JSON holding its provenance."""
    path = Path(path)
    if isinstance(meas, MeasuredDtn):
        M, prov = meas.matrix, dict(meas.provenance)
    else:
        M, prov = np.asarray(meas, dtype=float), {}
    prov.update(provenance or {})
    path.write_text(matrix_to_csv(M))
    side = _sidecar(path)
    side.write_text(dumps_json(prov))
    return [path, side]


def read_dtn(path) -> MeasuredDtn:
    """Read a DtN CSV and its sidecar (empty provenance when the sidecar is absent)."""
    path = Path(path)
    M = matrix_from_csv(path.read_text())
    side = _sidecar(path)
    prov = json.loads(side.read_text()) if side.exists() else {}
    return MeasuredDtn(M, prov)


def table_to_csv(header, rows) -> str:
    """Tidy CSV with floats in round-trip form."""
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(format_number(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(out) + "\n"


class Manifest:
    """Output bundle index: every written file with its SHA-256 and size."""

    def __init__(self, root, config: dict | None = None):
        self.root = Path(root)
        self.config = config or {}
        self.files: dict[str, dict] = {}

    def write_text(self, name: str, text: str) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.add(path)
        return path

    def add(self, path) -> None:
        path = Path(path)
        data = path.read_bytes()
        rel = path.relative_to(self.root).as_posix()
        self.files[rel] = {"sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}

    def to_dict(self) -> dict:
        return {
            "package": "eitnet",
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "config": self.config,
            "files": dict(sorted(self.files.items())),
        }

    def write(self) -> Path:
        path = self.root / "manifest.json"
        path.write_text(dumps_json(self.to_dict()))
        return path

    @staticmethod
    def verify(root) -> list[str]:
        """Files whose checksum differs from the manifest (missing files included)."""
        root = Path(root)
        data = json.loads((root / "manifest.json").read_text())
        bad = []
        for rel, info in data["files"].items():
            p = root / rel
            if not p.exists() or hashlib.sha256(p.read_bytes()).hexdigest() != info["sha256"]:
                bad.append(rel)
        return bad
