"""CSV and YAML readers/writers for datasets, studies and reports.

Floats are written with ``repr`` so reruns produce byte-identical files.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .core import CrowdLabelSet, InvalidInputError

CROWD_HEADER = ("instance_id", "worker_id", "class")
TRUE_HEADER = ("instance_id", "class")


class ConfigError(InvalidInputError):
    """Invalid config document; the message names the offending field."""


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise InvalidInputError(f"{path}: empty file")
    return rows[0], rows[1:]


def _int_table(path, header: Sequence[str]) -> np.ndarray:
    got, rows = read_csv(path)
    if tuple(h.strip() for h in got) != tuple(header):
        raise InvalidInputError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
    try:
        arr = np.array([[int(v) for v in r] for r in rows], dtype=np.int64)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None
    arr = arr.reshape(-1, len(header))
    if arr.size and arr.min() < 0:
        raise InvalidInputError(f"{path}: negative id or class")
    return arr


def write_crowd_labels(path, labels: CrowdLabelSet) -> None:
    write_csv(path, CROWD_HEADER, labels.entries())


def read_crowd_labels(path, num_instances: int, num_workers: int | None = None,
                      num_classes: int | None = None) -> CrowdLabelSet:
    """Duplicate (instance, worker) rows are rejected."""
    arr = _int_table(path, CROWD_HEADER)
    M = num_workers if num_workers is not None else (int(arr[:, 1].max()) + 1 if arr.size else 0)
    C = num_classes if num_classes is not None else max(2, int(arr[:, 2].max()) + 1)
    try:
        return CrowdLabelSet(arr[:, 0], arr[:, 1], arr[:, 2], num_instances, M, C)
    except InvalidInputError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None


def write_features(path, X) -> None:
    X = np.asarray(X, dtype=float)
    write_csv(path, [f"x{d}" for d in range(X.shape[1])], X.tolist())


def read_features(path) -> np.ndarray:
    header, rows = read_csv(path)
    try:
        float(header[0])
        rows = [header] + rows      # headerless file
    except ValueError:
        pass
    try:
        X = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None
    if X.ndim != 2 or len({len(r) for r in rows}) != 1:
        raise InvalidInputError(f"{path}: ragged feature rows")
    return X


def write_true_labels(path, y) -> None:
    write_csv(path, TRUE_HEADER, enumerate(np.asarray(y).tolist()))


def read_true_labels(path, num_instances: int) -> np.ndarray:
    arr = _int_table(path, TRUE_HEADER)
    if arr.shape[0] != num_instances or not np.array_equal(np.sort(arr[:, 0]),
                                                           np.arange(num_instances)):
        raise InvalidInputError(f"{path}: need exactly one class per instance 0..{num_instances - 1}")
    y = np.empty(num_instances, dtype=np.int64)
    y[arr[:, 0]] = arr[:, 1]
    return y


def load_yaml(path) -> dict:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return doc


def write_json(path, doc) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
