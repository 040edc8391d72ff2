"""LIBSVM parsing, preprocessing, synthetic data, and trace serialization.

File formats owned by this module:

* LIBSVM text: ``label idx:val idx:val ...`` with 1-based indices.  Labels in
  ``{0, 1}`` are used as-is, ``{-1, +1}`` maps to ``{0, 1}``, and integer
  multi-class labels (digits) map by parity: even -> 0, odd -> 1.
* Trace CSV with the fixed header
  ``method,estimator,problem,seed,oracle_units,epochs,rel_residual,wall_ms``.
  Floats are written with shortest round-trip formatting, so every numeric
  column except ``wall_ms`` is byte-stable for a fixed seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .core import ConfigurationError

__all__ = [
    "ParseError",
    "SparseDataset",
    "parse_libsvm",
    "make_synthetic_classification",
    "make_ambiguous",
    "RunTrace",
    "TRACE_HEADER",
    "write_trace_csv",
    "read_trace_csv",
]


class ParseError(ValueError):
    """Malformed input file; carries the offending location when known."""


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


@dataclass
class SparseDataset:
    """Row-sparse features with binary labels.

    ``indices[i]``/``values[i]`` hold the nonzeros of row ``i`` (0-based
    column indices).  ``dim`` includes the bias slot once ``preprocessed`` is
    set, in which case every row additionally has unit Euclidean norm over its
    feature part and an implicit trailing bias value of 1.
    """

    indices: List[np.ndarray]
    values: List[np.ndarray]
    labels: np.ndarray
    dim: int
    preprocessed: bool = False

    @property
    def n_samples(self) -> int:
        return len(self.indices)

    def dense(self) -> np.ndarray:
        """Dense ``(n_samples, dim)`` matrix, bias column included if preprocessed."""
        out = np.zeros((self.n_samples, self.dim))
        for i, (idx, val) in enumerate(zip(self.indices, self.values)):
            out[i, idx] = val
        if self.preprocessed:
            out[:, -1] = 1.0
        return out

    def preprocess(self) -> "SparseDataset":
        """Normalize each row to unit norm, then append the bias column.

        Idempotent: rows already at unit norm are left untouched bitwise, and
        a preprocessed dataset is returned unchanged.
        """
        if self.preprocessed:
            return self
        new_vals = []
        for val in self.values:
            nrm = float(np.linalg.norm(val))
            if nrm > 0.0 and abs(nrm - 1.0) > 1e-12:
                new_vals.append(val / nrm)
            else:
                new_vals.append(val.copy())
        return SparseDataset(
            indices=[idx.copy() for idx in self.indices],
            values=new_vals,
            labels=self.labels.copy(),
            dim=self.dim + 1,
            preprocessed=True,
        )


def _map_labels(raw: List[float], path: str) -> np.ndarray:
    vals = sorted(set(raw))
    if set(vals) <= {0.0, 1.0}:
        return np.array(raw)
    if set(vals) <= {-1.0, 1.0}:
        return np.array([0.0 if v < 0 else 1.0 for v in raw])
    for v in vals:
        if v != int(v):
            raise ParseError(f"{path}: cannot map non-integer label {v!r} to a binary class")
    # Digit-style multi-class: group by parity (even vs odd).
    return np.array([float(int(v) % 2) for v in raw])


def parse_libsvm(path: str) -> SparseDataset:
    """Parse a LIBSVM text file; duplicate indices within a line are an error."""
    raw_labels: List[float] = []
    indices: List[np.ndarray] = []
    values: List[np.ndarray] = []
    max_idx = -1
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                raw_labels.append(float(tokens[0]))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad label token {tokens[0]!r}") from None
            idx_row: List[int] = []
            val_row: List[float] = []
            seen = set()
            for tok in tokens[1:]:
                try:
                    sidx, sval = tok.split(":", 1)
                    idx = int(sidx)
                    val = float(sval)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad feature token {tok!r}") from None
                if idx < 1:
                    raise ParseError(f"{path}:{lineno}: index {idx} is not 1-based")
                if idx in seen:
                    raise ParseError(f"{path}:{lineno}: duplicate index {idx}")
                seen.add(idx)
                idx_row.append(idx - 1)
                val_row.append(val)
            order = np.argsort(idx_row, kind="stable")
            indices.append(np.array(idx_row, dtype=np.int64)[order])
            values.append(np.array(val_row, dtype=float)[order])
            if idx_row:
                max_idx = max(max_idx, max(idx_row))
    labels = _map_labels(raw_labels, path)
    return SparseDataset(indices=indices, values=values, labels=labels, dim=max_idx + 1)


def make_synthetic_classification(
    n: int, n_features: int, seed: int, noise: float = 0.25
) -> SparseDataset:
    """Dense Gaussian features with labels from a noisy random hyperplane."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n_features))
    w = rng.normal(size=n_features) / math.sqrt(n_features)
    logits = X @ w + noise * rng.normal(size=n)
    labels = (logits > 0).astype(float)
    idx = np.arange(n_features, dtype=np.int64)
    return SparseDataset(
        indices=[idx.copy() for _ in range(n)],
        values=[X[i].copy() for i in range(n)],
        labels=labels,
        dim=n_features,
    )


def make_ambiguous(
    dataset: SparseDataset, p2: int, sigma: float, rng: np.random.Generator
) -> np.ndarray:
    """Build the ``(n, p2, dim)`` tensor of noisy feature copies.

    Each copy is the preprocessed nominal row plus centered Gaussian noise of
    standard deviation ``sigma`` on the feature coordinates; the bias column
    stays exactly 1 in every copy.
    """
    if p2 < 1:
        raise ConfigurationError("p2 must be at least 1")
    if not dataset.preprocessed:
        raise ConfigurationError("make_ambiguous needs a preprocessed dataset")
    base = dataset.dense()
    n, dim = base.shape
    tensor = np.repeat(base[:, None, :], p2, axis=1)
    if sigma > 0.0:
        tensor[:, :, :-1] += sigma * rng.normal(size=(n, p2, dim - 1))
    return tensor


# ---------------------------------------------------------------------------
# Run traces
# ---------------------------------------------------------------------------

TRACE_HEADER = [
    "method",
    "estimator",
    "problem",
    "seed",
    "oracle_units",
    "epochs",
    "rel_residual",
    "wall_ms",
]


@dataclass
class RunTrace:
    """Residual-vs-work time series of one solver run.

    ``metadata`` holds at least ``method``, ``estimator``, ``problem`` and
    ``seed`` (these four are serialized per CSV row) plus free-form entries
    such as ``params_digest`` or ``diverged``.  Rows are strictly increasing
    in ``oracle_units`` and start at ``(0, 0.0, 1.0)``.
    """

    metadata: Dict[str, object] = field(default_factory=dict)
    oracle_units: List[int] = field(default_factory=list)
    epochs: List[float] = field(default_factory=list)
    rel_residual: List[float] = field(default_factory=list)
    wall_ms: List[float] = field(default_factory=list)
    debug: Optional[dict] = None  # not serialized

    def append(self, units: int, epochs: float, rel: float, wall: float) -> None:
        if self.oracle_units and units <= self.oracle_units[-1]:
            raise ValueError("trace rows must be strictly increasing in oracle_units")
        if not self.oracle_units and rel != 1.0:
            raise ValueError("first trace row must have rel_residual == 1.0")
        self.oracle_units.append(int(units))
        self.epochs.append(float(epochs))
        self.rel_residual.append(float(rel))
        self.wall_ms.append(float(wall))

    @property
    def n_rows(self) -> int:
        return len(self.oracle_units)

    def rows_equal(self, other: "RunTrace") -> bool:
        """Bitwise equality of the numeric columns, wall time excluded."""
        return (
            self.oracle_units == other.oracle_units
            and self.epochs == other.epochs
            and self.rel_residual == other.rel_residual
        )


def write_trace_csv(trace: RunTrace, path: str) -> None:
    md = trace.metadata
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for units, ep, rel, wall in zip(
            trace.oracle_units, trace.epochs, trace.rel_residual, trace.wall_ms
        ):
            writer.writerow(
                [
                    md.get("method", ""),
                    md.get("estimator", ""),
                    md.get("problem", ""),
                    md.get("seed", ""),
                    units,
                    repr(ep),
                    repr(rel),
                    repr(wall),
                ]
            )


def read_trace_csv(path: str) -> RunTrace:
    trace = RunTrace()
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, expected header row") from None
        if header != TRACE_HEADER:
            raise ParseError(f"{path}: bad header {header!r}, expected {TRACE_HEADER!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(TRACE_HEADER):
                raise ParseError(f"{path}:{lineno}: expected {len(TRACE_HEADER)} fields")
            try:
                if not trace.metadata:
                    trace.metadata = {
                        "method": row[0],
                        "estimator": row[1],
                        "problem": row[2],
                        "seed": int(row[3]) if row[3] else "",
                    }
                trace.append(int(row[4]), float(row[5]), float(row[6]), float(row[7]))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return trace
