"""CSV dataset ingestion with feature standardization."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ..model import Dataset

log = logging.getLogger(__name__)

MISSING = {"", "?", "na", "nan", "null"}
GLASS_WINDOW_CLASSES = {1, 2, 3, 4}


@dataclass(frozen=True)
class DatasetSpec:
    """How to read a CSV: which column holds labels and which map to +1.

    With ``glass_classes`` the label column holds the seven UCI glass type
    codes and types 1-4 (window glass) become +1.
    """

    label_column: str = "class"
    positive: frozenset = field(default_factory=frozenset)
    glass_classes: bool = False
    normalize: bool = True
    name: str = ""


BUNDLED = {
    "pima": DatasetSpec(positive=frozenset({"tested_positive"}), name="pima"),
    "breast": DatasetSpec(positive=frozenset({"malignant"}), name="breast"),
    "thyroid": DatasetSpec(positive=frozenset({"positive"}), name="thyroid"),
    "glass": DatasetSpec(positive=frozenset({"window"}), name="glass"),
}


def _label_to_pm1(raw, spec):
    if spec.glass_classes:
        return 1.0 if int(float(raw)) in GLASS_WINDOW_CLASSES else -1.0
    if spec.positive:
        return 1.0 if raw in spec.positive else -1.0
    value = float(raw)
    if value not in (-1.0, 1.0):
        raise ValueError(f"label {raw!r} is not -1/+1 and no positive class was given")
    return value


def _read_rows(path):
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row and not row[0].lstrip().startswith("#")]


def load_dataset(path, spec=None):
    """Read a CSV with a header row, standardize features, map labels to +-1.

    Rows with missing values are dropped (and reported). A constant feature
    keeps an sd of 1 so it standardizes to zeros.
    """
    spec = spec or DatasetSpec()
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    if spec.label_column not in header:
        raise ValueError(f"label column {spec.label_column!r} not in {header}")
    li = header.index(spec.label_column)
    feature_names = [h for i, h in enumerate(header) if i != li]

    X, y, dropped = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        cells = [c.strip() for c in row]
        if len(cells) != len(header) or any(c.lower() in MISSING for c in cells):
            dropped.append(lineno)
            continue
        X.append([float(c) for i, c in enumerate(cells) if i != li])
        y.append(_label_to_pm1(cells[li], spec))
    if dropped:
        log.warning("%s: dropped %d rows with missing values (lines %s)",
                    path, len(dropped), dropped[:10])
    X = np.asarray(X, dtype=float)
    if not spec.normalize:
        return Dataset(X, np.asarray(y), name=spec.name or str(path))
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    constant = sds == 0
    if np.any(constant):
        log.warning("constant features %s; using sd 1",
                    [feature_names[i] for i in np.flatnonzero(constant)])
        sds[constant] = 1.0
    Xn = (X - means) / sds
    return Dataset(Xn, np.asarray(y), means, sds, name=spec.name or str(path))


def bundled_dataset(name):
    """Load one of the datasets shipped with the package (see ``BUNDLED``)."""
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled dataset {name!r}; choose from {sorted(BUNDLED)}")
    ref = resources.files("pmgpc") / "data" / f"{name}.csv"
    with resources.as_file(ref) as path:
        return load_dataset(path, BUNDLED[name])


def load_features(path, train, spec=None):
    """Inputs from a CSV, standardized with the training set's statistics.

    The label column, if present, is ignored.
    """
    spec = spec or DatasetSpec()
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    keep = [i for i, h in enumerate(header) if h != spec.label_column]
    X = np.array([[float(row[i]) for i in keep] for row in rows[1:]], dtype=float)
    return (X - train.feature_means) / train.feature_sds
