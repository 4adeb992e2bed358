"""Small file helpers shared by the modules: TOML, CSV, data lookup, provenance."""
from __future__ import annotations

import csv
import hashlib
import os
import sys
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import DataFileError

DATA_ENV = "CAMSIM_DATA"


def data_dir() -> Path:
    """Bundled data directory, overridable with the ``CAMSIM_DATA`` env var."""
    override = os.environ.get(DATA_ENV)
    if override:
        return Path(override)
    return Path(__file__).resolve().parent / "data"


def data_path(*parts: str) -> Path:
    path = data_dir().joinpath(*parts)
    if not path.exists():
        raise DataFileError(f"bundled data file not found: {path}")
    return path


def load_toml(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise DataFileError(f"no such file: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise DataFileError(f"{path}: {exc}") from exc


def dump_toml(doc: dict, path) -> None:
    Path(path).write_text(tomli_w.dumps(_plain(doc)))


def _plain(obj):
    # numpy scalars/arrays -> builtin types tomli_w understands
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _plain(obj.tolist())
    return obj


def write_xy_csv(path, x, y, header=("x", "y")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for a, b in zip(x, y):
            w.writerow([repr(float(a)), repr(float(b))])


def read_xy_csv(path):
    import numpy as np

    try:
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataFileError(f"cannot read CSV {path}: {exc}") from exc
    return arr[:, 0], arr[:, 1]


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def provenance(config_hash: str | None = None, seed: int | None = None, **extra) -> dict:
    from . import __version__

    doc = {"tool": "camsim", "version": __version__}
    if config_hash is not None:
        doc["config_hash"] = config_hash
    if seed is not None:
        doc["seed"] = int(seed)
    doc.update(extra)
    return doc
