"""CSV, snapshot-matrix and manifest formats, plus config-file loading."""
from __future__ import annotations

import csv
import json
import subprocess
from pathlib import Path

import re

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError

SCHEMA_VERSION = 1
TIMESERIES_COLUMNS = ("t", "norm", "mean_n", "sigma_n", "v_g", "k_c")


def fmt(x) -> str:
    return f"{float(x) + 0.0:.17g}"


def write_table(path, header, columns) -> None:
    """Header row plus one row per index of the (equal-length) columns."""
    columns = [np.asarray(c) for c in columns]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([fmt(v) for v in row])


def read_table(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader if r]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_timeseries(path, result) -> None:
    cols = result.columns()
    write_table(path, TIMESERIES_COLUMNS, [cols[c] for c in TIMESERIES_COLUMNS])


def write_snapshot_matrix(path, times, axis_values, matrix, axis_format=fmt) -> None:
    """One row per snapshot: t, then the density on each axis point (sites or k)."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [axis_format(a) for a in axis_values])
        for t, row in zip(times, matrix):
            w.writerow([fmt(t)] + [fmt(v) for v in row])


def read_snapshot_matrix(path):
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in r] for r in reader if r], dtype=float)
    axis = np.array([float(h) for h in header[1:]])
    rows = rows.reshape(-1, len(header))
    return rows[:, 0], axis, rows[:, 1:]


def version_string() -> str:
    """Package version, with ``git describe`` appended when run from a checkout."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_manifest(path, payload: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "version": version_string()}
    doc.update(payload)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads floats like 1e-5 (YAML 1.1 requires a dot)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*(?:\.[0-9_]*)?|\.[0-9_]+)(?:[eE][-+]?[0-9]+)?$"),
    list("-+0123456789."),
)


def load_config_file(path) -> dict:
    """Parse a JSON (``.json``) or YAML config into a dict."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        doc = json.loads(text) if path.suffix.lower() == ".json" else yaml.load(text, Loader=_Loader)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {version!r}")
    return doc
