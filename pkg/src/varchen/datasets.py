"""Dataset containers and strict text-format readers (LIBSVM and dense CSV)."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

ALLOWED_LABELS = frozenset([-1, 1] + list(range(10)))


class DatasetParseError(ValueError):
    def __init__(self, path, lineno: int, col: int, msg: str):
        self.path = str(path)
        self.lineno = lineno
        self.col = col
        self.msg = msg
        super().__init__(f"{self.path}:{lineno}:{col}: {msg}")


@dataclass
class Dataset:
    features: Union[np.ndarray, sp.csr_matrix]
    labels: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on the number of samples")
        data = self.features.data if sp.issparse(self.features) else self.features
        if not np.all(np.isfinite(data)):
            raise ValueError("features contain NaN or inf")
        bad = set(np.unique(self.labels).tolist()) - ALLOWED_LABELS
        if bad:
            raise ValueError(f"labels outside the allowed set: {sorted(bad)}")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def one_vs_rest(self, positive) -> "Dataset":
        labels = np.where(self.labels == positive, 1.0, -1.0)
        return Dataset(self.features, labels, f"{self.provenance} (one-vs-rest {positive})")


def _parse_label(tok, path, lineno, col):
    try:
        value = float(tok)
    except ValueError:
        raise DatasetParseError(path, lineno, col, f"bad label {tok!r}") from None
    if not np.isfinite(value) or value != int(value):
        raise DatasetParseError(path, lineno, col, f"label {tok!r} is not an integer")
    if int(value) not in ALLOWED_LABELS:
        raise DatasetParseError(path, lineno, col, f"label {tok!r} outside {{-1,+1}} / {{0..9}}")
    return float(value)


def load_libsvm(path, n_features: Optional[int] = None) -> Dataset:
    """Read ``label idx:val ...`` lines (1-based, strictly increasing indices).

    Blank lines and ``#`` comments are skipped. Any malformed token raises
    :class:`DatasetParseError` carrying the 1-based line and column.
    """
    path = Path(path)
    rows, cols, vals, labels = [], [], [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].rstrip("\n")
            if not line.strip():
                continue
            pos = 0
            tokens = []
            for tok in line.split():
                start = line.index(tok, pos)
                tokens.append((tok, start + 1))
                pos = start + len(tok)
            label_tok, label_col = tokens[0]
            labels.append(_parse_label(label_tok, path, lineno, label_col))
            row = len(labels) - 1
            last = 0
            for tok, col in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise DatasetParseError(path, lineno, col, f"expected idx:val, got {tok!r}")
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise DatasetParseError(path, lineno, col, f"bad feature index {idx_s!r}") from None
                if idx < 1:
                    raise DatasetParseError(path, lineno, col, "feature indices are 1-based")
                if idx <= last:
                    raise DatasetParseError(path, lineno, col, "feature indices must be strictly increasing")
                if n_features is not None and idx > n_features:
                    raise DatasetParseError(path, lineno, col, f"feature index {idx} exceeds {n_features}")
                try:
                    val = float(val_s)
                except ValueError:
                    raise DatasetParseError(path, lineno, col + len(idx_s) + 1,
                                            f"bad feature value {val_s!r}") from None
                if not np.isfinite(val):
                    raise DatasetParseError(path, lineno, col + len(idx_s) + 1, "non-finite feature value")
                last = idx
                rows.append(row)
                cols.append(idx - 1)
                vals.append(val)
    if not labels:
        raise DatasetParseError(path, 1, 1, "no samples")
    width = n_features if n_features is not None else (max(cols) + 1 if cols else 1)
    X = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), width), dtype=float)
    return Dataset(X, np.asarray(labels), f"libsvm:{path.name}")


def load_csv(path) -> Dataset:
    """Read dense ``label,f1,...,fn`` rows; an optional first row starting with ``label`` is a header."""
    path = Path(path)
    labels, rows = [], []
    width = None
    with open(path, newline="") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                continue
            if fields[0].lstrip().startswith("#"):
                continue
            if lineno == 1 and fields[0].strip().lower() == "label":
                continue
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise DatasetParseError(path, lineno, 1, f"expected {width} fields, got {len(fields)}")
            labels.append(_parse_label(fields[0].strip(), path, lineno, 1))
            row = []
            for j, f in enumerate(fields[1:], start=2):
                try:
                    v = float(f)
                except ValueError:
                    raise DatasetParseError(path, lineno, j, f"bad value {f!r} in field {j}") from None
                if not np.isfinite(v):
                    raise DatasetParseError(path, lineno, j, f"non-finite value in field {j}")
                row.append(v)
            rows.append(row)
    if not labels:
        raise DatasetParseError(path, 1, 1, "no samples")
    return Dataset(np.asarray(rows, dtype=float), np.asarray(labels), f"csv:{path.name}")


def load_dataset(path, fmt: Optional[str] = None, n_features: Optional[int] = None) -> Dataset:
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "libsvm"
    if fmt == "csv":
        return load_csv(path)
    if fmt == "libsvm":
        return load_libsvm(path, n_features)
    raise ValueError(f"unknown dataset format {fmt!r}")


def synthetic_binary(n_samples: int = 200, n_features: int = 20, seed: int = 0,
                     noise: float = 0.5, scale: float = 1.0) -> Dataset:
    """Linearly generated +-1 labels with logistic label noise."""
    rng = np.random.Generator(np.random.Philox(seed))
    X = rng.standard_normal((n_samples, n_features)) * (scale / np.sqrt(n_features))
    w = rng.standard_normal(n_features)
    margin = X @ w * np.sqrt(n_features) / scale
    flip = rng.random(n_samples) < 1.0 / (1.0 + np.exp(margin / max(noise, 1e-12)))
    y = np.where(flip, -1.0, 1.0)
    return Dataset(X, y, f"synthetic_binary(N={n_samples}, n={n_features}, seed={seed})")
