"""Sparse symmetric operator containers and their file exports."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import ParseError

KIND_LB = "laplace_beltrami"
KIND_FP = "fokker_planck_sym"


@dataclass(frozen=True)
class SymmetricOperator:
    """Symmetric non-negative weight matrix W with zero diagonal.

    ``degree`` is ``W @ 1``. The Laplacian form ``D - W`` has zero row
    sums and is positive semidefinite for any such W.
    """

    weights: sparse.csr_matrix
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        w = sparse.csr_matrix(self.weights)
        w.sum_duplicates()
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def degree(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=1)).ravel()

    def laplacian(self) -> sparse.csr_matrix:
        """Positive semidefinite L = diag(W @ 1) - W."""
        return sparse.diags(self.degree) - self.weights

    def validate(self, tol: float = 1e-12) -> None:
        """Assert the structural invariants; raises AssertionError."""
        w = self.weights
        assert (w != w.T).nnz == 0, "W not exactly symmetric"
        assert w.data.min(initial=0.0) >= 0.0, "negative weight"
        assert abs(w.diagonal()).max(initial=0.0) == 0.0, "nonzero diagonal"
        lap = self.laplacian()
        rows = np.asarray(lap.sum(axis=1)).ravel()
        assert np.abs(rows).max(initial=0.0) <= tol, "Laplacian row sums"


@dataclass(frozen=True)
class FpOperatorPair:
    """Symmetric Fokker-Planck operator W_s with its degree companion.

    ``w_sym`` stores the density-normalized symmetric matrix; ``d_d`` is
    the degree vector of the underlying normalized kernel, so that the
    row-stochastic companion is ``W_rs = D_d^{-1/2} W_s D_d^{1/2}`` and an
    eigenvector psi of W_rs relates to an eigenvector psi_s of W_s by
    ``psi = D_d^{-1/2} psi_s`` (same eigenvalues).
    """

    w_sym: SymmetricOperator
    d_d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d_d, dtype=np.float64)
        if d.shape != (self.w_sym.n,):
            raise ParseError("degree vector length mismatch")
        object.__setattr__(self, "d_d", d)

    @property
    def n(self) -> int:
        return self.w_sym.n

    def row_stochastic(self) -> np.ndarray:
        """Dense W_rs; every row sums to 1."""
        ws = self.w_sym.weights.toarray()
        inv = 1.0 / np.sqrt(self.d_d)
        return (inv[:, None] * ws) / inv[None, :]


def save_operator(op: SymmetricOperator, out_dir, d_d: np.ndarray | None = None) -> Path:
    """Write sorted COO triplets plus a params JSON; returns the directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    coo = op.weights.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with (out / "operator.csv").open("w") as fh:
        fh.write("row,col,value\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r},{c},{float(v)!r}\n")
    meta = {"kind": op.kind, "n": op.n, "params": op.params}
    (out / "operator.json").write_text(json.dumps(meta, indent=2) + "\n")
    if d_d is not None:
        with (out / "degree.csv").open("w") as fh:
            fh.write("index,d_d\n")
            for i, v in enumerate(d_d):
                fh.write(f"{i},{float(v)!r}\n")
    return out


def load_operator(in_dir) -> tuple[SymmetricOperator, np.ndarray | None]:
    """Inverse of :func:`save_operator`."""
    ind = Path(in_dir)
    meta = json.loads((ind / "operator.json").read_text())
    rows, cols, vals = [], [], []
    with (ind / "operator.csv").open() as fh:
        header = fh.readline()
        if header.strip() != "row,col,value":
            raise ParseError("bad operator CSV header")
        for ln in fh:
            r, c, v = ln.rstrip("\n").split(",")
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
    n = meta["n"]
    w = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    op = SymmetricOperator(w, meta["kind"], meta.get("params", {}))
    d_path = ind / "degree.csv"
    d_d = None
    if d_path.is_file():
        with d_path.open() as fh:
            fh.readline()
            d_d = np.array([float(ln.split(",")[1]) for ln in fh])
    return op, d_d
