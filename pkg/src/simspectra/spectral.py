"""Eigendecomposition of operators and spectral-coefficient machinery.

A :class:`SpectralBasis` holds ascending (Laplacian) or descending
(row-stochastic) eigenvalues with columns orthonormal under the recorded
inner product: identity weight for Laplace-Beltrami bases, the kernel
degree vector for Fokker-Planck bases. Projections, truncated
reconstruction, Parseval distances, and coefficient-decay statistics all
go through the basis inner product, which is what makes the coefficient
norm equal the function norm.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg as sla
from scipy import sparse

from .bundle import SimulationBundle, extract_function
from .errors import BasisMismatch, ConvergenceFailure, LengthMismatch, ParseError
from .mesh import MeshFunction
from .operators import KIND_FP, KIND_LB, FpOperatorPair, SymmetricOperator

DENSE_LIMIT = 3000
VEC_DTYPE = "<f8"


def _lock(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenpairs of an invariant operator, with provenance.

    ``weight`` is the diagonal of the inner-product matrix M under which
    the columns are orthonormal (None means identity). Index 0 always
    holds the trivial pair: the constant eigenvector with eigenvalue 0
    for Laplacians, eigenvalue 1 for row-stochastic operators.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)
    weight: np.ndarray | None = None
    trivial_index: int = 0

    def __post_init__(self):
        ev = np.ascontiguousarray(np.asarray(self.eigenvalues, dtype=np.float64))
        vs = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float64))
        if vs.ndim != 2 or ev.shape != (vs.shape[1],):
            raise ParseError("eigenvalue/eigenvector shape mismatch")
        object.__setattr__(self, "eigenvalues", _lock(ev))
        object.__setattr__(self, "vectors", _lock(vs))
        if self.weight is not None:
            w = np.ascontiguousarray(np.asarray(self.weight, dtype=np.float64))
            if w.shape != (vs.shape[0],):
                raise ParseError("weight length mismatch")
            object.__setattr__(self, "weight", _lock(w))

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def p(self) -> int:
        return self.vectors.shape[1]

    def apply_mass(self, values: np.ndarray) -> np.ndarray:
        if self.weight is None:
            return values
        return values * self.weight if values.ndim == 1 else values * self.weight[:, None]

    def norm(self, values: np.ndarray) -> float:
        """Function norm induced by the basis inner product."""
        return float(np.sqrt(values @ self.apply_mass(values)))

    def gram(self) -> np.ndarray:
        return self.vectors.T @ self.apply_mass(self.vectors)


def project(basis: SpectralBasis, f: MeshFunction | np.ndarray) -> np.ndarray:
    """Spectral coefficients alpha_j = <f, psi_j> in the basis inner product."""
    values = f.values if isinstance(f, MeshFunction) else np.asarray(f, dtype=np.float64)
    if values.shape[0] != basis.n:
        raise LengthMismatch(f"function length {values.shape[0]} != basis n {basis.n}")
    return basis.vectors.T @ basis.apply_mass(values)


def reconstruct(basis: SpectralBasis, alpha: np.ndarray, p: int | None = None, channel: str = "reconstructed") -> MeshFunction:
    """Truncated sum of the first ``p`` eigenvectors (all when p is None)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if p is None:
        p = alpha.shape[0]
    if p > basis.p or p > alpha.shape[0]:
        raise LengthMismatch(f"cannot reconstruct with p={p} from basis p={basis.p}")
    if p == 0:
        return MeshFunction(np.zeros(basis.n), channel)
    return MeshFunction(basis.vectors[:, :p] @ alpha[:p], channel)


def parseval_distance(alpha_1: np.ndarray, alpha_2: np.ndarray) -> float:
    """Euclidean distance of coefficient vectors from the same basis."""
    a1 = np.asarray(alpha_1, dtype=np.float64)
    a2 = np.asarray(alpha_2, dtype=np.float64)
    if a1.shape != a2.shape:
        raise BasisMismatch(f"coefficient shapes differ: {a1.shape} vs {a2.shape}")
    return float(np.linalg.norm(a1 - a2))


# ---------------------------------------------------------------------------
# eigensolvers


def _lanczos(matvec, n: int, k: int, largest: bool, tol: float = 1e-8, max_iter: int | None = None):
    """Lanczos with full reorthogonalization for extreme eigenpairs.

    Returns (values, vectors) with ``k`` pairs from the requested end of
    the spectrum, ascending. Residual bound per Ritz pair is
    ``beta * |last tridiagonal eigenvector entry|``.
    """
    if max_iter is None:
        max_iter = 50 * k
    m = min(n, max_iter)
    rng = np.random.Generator(np.random.Philox(key=np.array([7, 0], dtype=np.uint64)))
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    Q = np.empty((n, m + 1))
    Q[:, 0] = q
    alphas: list[float] = []
    betas: list[float] = []
    for j in range(m):
        w = matvec(Q[:, j])
        alphas.append(float(Q[:, j] @ w))
        # full reorthogonalization, applied twice for float safety
        for _ in range(2):
            w = w - Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
        beta = float(np.linalg.norm(w))
        ncur = j + 1
        if ncur >= k and (ncur % 5 == 0 or beta < 1e-14 or ncur == m):
            theta, s = sla.eigh_tridiagonal(alphas, betas)
            sel = np.arange(ncur - k, ncur) if largest else np.arange(k)
            resid = beta * np.abs(s[-1, sel])
            scale = max(abs(theta[0]), abs(theta[-1]), 1e-300)
            if resid.max() <= tol * scale or beta < 1e-14:
                vecs = Q[:, :ncur] @ s[:, sel]
                return theta[sel], vecs
        if beta < 1e-14:
            break  # invariant subspace smaller than k
        betas.append(beta)
        Q[:, j + 1] = w / beta
    raise ConvergenceFailure(
        f"Lanczos did not reach tol={tol} within {m} iterations"
    )


def _dense_extreme(mat: np.ndarray, k: int, largest: bool):
    n = mat.shape[0]
    if largest:
        vals, vecs = sla.eigh(mat, subset_by_index=[n - k, n - 1])
    else:
        vals, vecs = sla.eigh(mat, subset_by_index=[0, k - 1])
    return vals, vecs


def _solve_symmetric(mat: sparse.spmatrix, k: int, largest: bool, solver: str):
    n = mat.shape[0]
    if solver == "auto":
        solver = "dense" if n <= DENSE_LIMIT else "lanczos"
    if solver == "dense":
        return _dense_extreme(mat.toarray(), k, largest)
    if solver == "lanczos":
        csr = mat.tocsr()
        return _lanczos(lambda v: csr @ v, n, k, largest)
    raise ValueError(f"unknown solver {solver!r}")


def decompose(operator, p: int, solver: str = "auto") -> SpectralBasis:
    """Spectral basis of an operator.

    For a Laplace-Beltrami :class:`SymmetricOperator`, returns the ``p``
    smallest eigenpairs of L = D - W, ascending; index 0 is the trivial
    constant eigenvector with eigenvalue 0.

    For an :class:`FpOperatorPair`, solves the symmetric form W_s and maps
    eigenvectors to the row-stochastic companion (psi = D_d^{-1/2} psi_s),
    which leaves them orthonormal under the D_d-weighted inner product;
    eigenvalues are those of W_rs, descending from the trivial 1.
    """
    if isinstance(operator, FpOperatorPair):
        if not (1 <= p <= operator.n):
            raise ValueError(f"p={p} out of range for n={operator.n}")
        vals, vecs = _solve_symmetric(operator.w_sym.weights, p, True, solver)
        vals, vecs = vals[::-1], vecs[:, ::-1]  # descending from lambda = 1
        vecs = vecs / np.sqrt(operator.d_d)[:, None]
        return SpectralBasis(
            vals.copy(),
            _fix_signs(vecs),
            KIND_FP,
            dict(operator.w_sym.params),
            weight=operator.d_d.copy(),
        )
    if isinstance(operator, SymmetricOperator):
        if not (1 <= p <= operator.n):
            raise ValueError(f"p={p} out of range for n={operator.n}")
        vals, vecs = _solve_symmetric(operator.laplacian(), p, False, solver)
        return SpectralBasis(vals, _fix_signs(vecs), operator.kind, dict(operator.params))
    raise TypeError(f"cannot decompose {type(operator).__name__}")


# ---------------------------------------------------------------------------
# coefficient sets


@dataclass(frozen=True)
class CoefficientSet:
    """Spectral coefficients indexed (sim, step, channel, eigen index)."""

    alpha: np.ndarray
    channels: tuple
    basis_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.alpha, dtype=np.float64))
        if a.ndim != 4 or a.shape[2] != len(self.channels):
            raise ParseError(
                f"alpha must be (m, tau, n_channels, p), got {a.shape} for "
                f"{len(self.channels)} channels"
            )
        if not np.isfinite(a).all():
            raise ParseError("coefficients contain NaN/Inf")
        object.__setattr__(self, "alpha", _lock(a))
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def n_sims(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_steps(self) -> int:
        return self.alpha.shape[1]

    @property
    def p(self) -> int:
        return self.alpha.shape[3]

    def feature_matrix(self, p: int | None = None) -> np.ndarray:
        """One row per (sim, step); columns are channel-major coefficients."""
        p = self.p if p is None else p
        a = self.alpha[:, :, :, :p]
        m, tau, c, _ = a.shape
        return a.reshape(m * tau, c * p)

    def items(self) -> list[tuple[int, int]]:
        return [(s, t) for s in range(self.n_sims) for t in range(self.n_steps)]


def project_bundle(
    bundle: SimulationBundle,
    basis: SpectralBasis,
    channels=("x", "y", "z"),
    p: int | None = None,
) -> CoefficientSet:
    """Project every (sim, step, channel) mesh function onto the basis."""
    if bundle.mesh.n_vertices != basis.n:
        raise BasisMismatch(
            f"bundle has {bundle.mesh.n_vertices} vertices, basis {basis.n}"
        )
    p = basis.p if p is None else min(p, basis.p)
    vt = basis.vectors[:, :p].T
    alpha = np.empty((bundle.n_sims, bundle.n_steps, len(channels), p))
    for ci, ch in enumerate(channels):
        for s in range(bundle.n_sims):
            for t in range(bundle.n_steps):
                f = extract_function(bundle, s, t, ch)
                alpha[s, t, ci] = vt @ basis.apply_mass(f.values)
    return CoefficientSet(
        alpha,
        tuple(ch if isinstance(ch, str) else f"dnd_{ch[1]}_{ch[2]}" for ch in channels),
        {"kind": basis.kind, "params": dict(basis.params), "p": p},
    )


@dataclass(frozen=True)
class DecayReport:
    """Per-index magnitude/variance tables and a truncation suggestion.

    ``max_abs`` and ``variance`` have shape (n_channels, p): the maximum
    |alpha_j| and the sample variance of alpha_j across all (sim, step)
    observations. ``threshold_index`` is the smallest truncation p whose
    leading coefficients capture 99 percent of the total squared mass;
    smooth data concentrates there because coefficients of C^k functions
    decay polynomially in the eigenvalue rank.
    """

    channels: tuple
    max_abs: np.ndarray
    variance: np.ndarray
    energy_fraction: np.ndarray
    threshold_index: int

    def rows(self):
        for ci, ch in enumerate(self.channels):
            for j in range(self.max_abs.shape[1]):
                yield ch, j, self.max_abs[ci, j], self.variance[ci, j]


def decay_report(coeffs: CoefficientSet, energy: float = 0.99) -> DecayReport:
    """Magnitude and variance of coefficients across simulations.

    Observations pool simulations and time steps. The suggested threshold
    is computed on the pooled squared coefficient mass over all channels.
    """
    a = coeffs.alpha  # (m, tau, c, p)
    if a.shape[0] * a.shape[1] < 1:
        raise ParseError("decay report needs at least one observation")
    obs = a.reshape(-1, a.shape[2], a.shape[3])  # (m*tau, c, p)
    max_abs = np.abs(obs).max(axis=0).copy()  # (c, p)
    variance = obs.var(axis=0, ddof=1).copy() if obs.shape[0] > 1 else np.zeros(max_abs.shape)
    mass = (obs**2).sum(axis=(0, 1))  # (p,)
    total = mass.sum()
    if total == 0:
        frac = np.ones_like(mass)
    else:
        frac = np.cumsum(mass) / total
    threshold = int(np.searchsorted(frac, energy - 1e-15) + 1)
    return DecayReport(coeffs.channels, max_abs, variance, frac, threshold)


# ---------------------------------------------------------------------------
# file formats


def save_basis(basis: SpectralBasis, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "eigenvalues.csv").open("w") as fh:
        fh.write("index,eigenvalue\n")
        for i, v in enumerate(basis.eigenvalues):
            fh.write(f"{i},{float(v)!r}\n")
    basis.vectors.astype(VEC_DTYPE).tofile(out / "eigenvectors.f64")
    meta = {
        "kind": basis.kind,
        "params": basis.params,
        "n": basis.n,
        "p": basis.p,
        "trivial_index": basis.trivial_index,
        "vectors_file": "eigenvectors.f64",
        "weight_file": "weight.f64" if basis.weight is not None else None,
    }
    if basis.weight is not None:
        basis.weight.astype(VEC_DTYPE).tofile(out / "weight.f64")
    (out / "basis.json").write_text(json.dumps(meta, indent=2) + "\n")
    return out


def load_basis(in_dir) -> SpectralBasis:
    ind = Path(in_dir)
    meta = json.loads((ind / "basis.json").read_text())
    n, p = meta["n"], meta["p"]
    with (ind / "eigenvalues.csv").open() as fh:
        fh.readline()
        vals = np.array([float(ln.split(",")[1]) for ln in fh])
    if vals.shape != (p,):
        raise ParseError("eigenvalue count does not match basis meta")
    vecs = np.fromfile(ind / meta["vectors_file"], dtype=VEC_DTYPE)
    if vecs.size != n * p:
        raise ParseError("eigenvector matrix size does not match basis meta")
    weight = None
    if meta.get("weight_file"):
        weight = np.fromfile(ind / meta["weight_file"], dtype=VEC_DTYPE)
        if weight.size != n:
            raise ParseError("weight vector size does not match basis meta")
    return SpectralBasis(
        vals,
        vecs.reshape(n, p),
        meta["kind"],
        meta.get("params", {}),
        weight=weight,
        trivial_index=meta.get("trivial_index", 0),
    )


def save_coefficients(coeffs: CoefficientSet, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write("sim,step,channel,j,alpha\n")
        a = coeffs.alpha
        for s in range(coeffs.n_sims):
            for t in range(coeffs.n_steps):
                for ci, ch in enumerate(coeffs.channels):
                    for j in range(coeffs.p):
                        fh.write(f"{s},{t},{ch},{j},{float(a[s, t, ci, j])!r}\n")
    return path


def load_coefficients(path) -> CoefficientSet:
    path = Path(path)
    sims, steps, chans, js, vals = [], [], [], [], []
    with path.open() as fh:
        header = fh.readline()
        if header.strip() != "sim,step,channel,j,alpha":
            raise ParseError("bad coefficients CSV header")
        for ln in fh:
            s, t, ch, j, v = ln.rstrip("\n").split(",")
            sims.append(int(s))
            steps.append(int(t))
            chans.append(ch)
            js.append(int(j))
            vals.append(float(v))
    if not vals:
        raise ParseError("empty coefficients file")
    channels = tuple(dict.fromkeys(chans))
    m, tau, p = max(sims) + 1, max(steps) + 1, max(js) + 1
    alpha = np.full((m, tau, len(channels), p), np.nan)
    cidx = {c: i for i, c in enumerate(channels)}
    for s, t, ch, j, v in zip(sims, steps, chans, js, vals):
        alpha[s, t, cidx[ch], j] = v
    if np.isnan(alpha).any():
        raise ParseError("coefficients file has missing (sim, step, channel, j) cells")
    return CoefficientSet(alpha, channels)
