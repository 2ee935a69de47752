"""File ingestion and report serialization for the command-line harness.

Supported inputs: CSV sample matrices (one observation per row, no header by
default), MatrixMarket coordinate symmetric covariances, and exported model
JSON documents. Matrices are serialized with full round-trip decimal
precision; sparse triplets store the upper triangle only.
"""

from __future__ import annotations

import csv
import io as _stdio
import json

import numpy as np
import scipy.io
import scipy.sparse

from .gaussian import sample_covariance
from .synth import load_model
from .types import SampleCovariance, symmetrize

INPUT_FORMATS = ("csv-samples", "mtx-covariance", "model-json")


def read_samples_csv(path, header=False):
    """Parse a comma-separated sample matrix; errors carry line and column."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or (len(row) == 1 and row[0].strip() == ""):
                continue
            values = []
            for colno, cell in enumerate(row, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: parse failure at line {lineno}, column {colno}: "
                        f"{cell!r} is not a number"
                    ) from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ValueError(
                    f"{path}: line {lineno} has {len(values)} columns, "
                    f"expected {width}"
                )
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def read_covariance_mtx(path, require_psd=True):
    """Read a MatrixMarket covariance; symmetrize with a warning if needed."""
    M = scipy.io.mmread(path)
    if scipy.sparse.issparse(M):
        M = M.toarray()
    M = symmetrize(np.asarray(M, dtype=float), "covariance")
    if require_psd:
        w = np.linalg.eigvalsh(M)
        if w[0] < -1e-10 * max(1.0, abs(float(w[-1]))):
            raise ValueError(
                f"{path}: covariance is not PSD (smallest eigenvalue {w[0]:.3e})"
            )
    return M


def write_covariance_mtx(path, M):
    scipy.io.mmwrite(path, np.asarray(M, dtype=float), symmetry="symmetric")


def read_input(path, format, n=None, center=False):
    """Load an input file as a SampleCovariance or SyntheticModel.

    csv-samples builds the sample covariance from stacked observations;
    mtx-covariance reads a symmetric matrix validated PSD (pass ``n`` when
    known); model-json re-validates an exported ground-truth model.
    """
    if format == "csv-samples":
        X = read_samples_csv(path)
        return sample_covariance(X, center=center)
    if format == "mtx-covariance":
        M = read_covariance_mtx(path)
        return SampleCovariance(matrix=M, n=n)
    if format == "model-json":
        return load_model(path)
    raise ValueError(f"unknown input format {format!r}; expected one of {INPUT_FORMATS}")


# ---------------------------------------------------------------------------
# report serialization


def matrix_triplets(M, tol=0.0):
    """Upper-triangle nonzero triplets [i, j, value] of a symmetric matrix."""
    p = M.shape[0]
    out = []
    for i in range(p):
        for j in range(i, p):
            v = float(M[i, j])
            if abs(v) > tol:
                out.append([i, j, v])
    return out


def triplets_to_matrix(triplets, p):
    M = np.zeros((p, p))
    for i, j, v in triplets:
        M[int(i), int(j)] = float(v)
        M[int(j), int(i)] = float(v)
    return M


def eigenpairs(L, rank_tol=1e-9):
    """Eigenpairs of a PSD matrix above rank_tol relative to the top one."""
    w, V = np.linalg.eigh(L)
    top = max(float(w[-1]), 1e-300)
    out = []
    for k in range(len(w) - 1, -1, -1):
        if w[k] > rank_tol * top and w[k] > 0:
            out.append({"value": float(w[k]), "vector": [float(x) for x in V[:, k]]})
    return out


def eigenpairs_to_matrix(pairs, p):
    L = np.zeros((p, p))
    for pair in pairs:
        v = np.asarray(pair["vector"], dtype=float)
        L += float(pair["value"]) * np.outer(v, v)
    return (L + L.T) / 2.0


def dump_json(doc, path=None):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
            fh.write("\n")
    return text
