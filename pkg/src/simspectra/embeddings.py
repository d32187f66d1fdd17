"""Downstream dimensionality reduction and analysis exports.

Diffusion maps and a PCA baseline operate on rows of feature vectors
(typically spectral coefficients); helpers export time trajectories and
single-mode reconstruction sweeps, and provide the Procrustes alignment
and branch-silhouette metrics used to compare embeddings.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .errors import EpsilonTooSmall, LengthMismatch, ParseError
from .spectral import CoefficientSet, SpectralBasis, _fix_signs


@dataclass(frozen=True)
class Embedding:
    """Low-dimensional point set with the parameters that produced it."""

    points: np.ndarray
    items: tuple
    method: str
    params: dict = field(default_factory=dict)
    eigenvalues: np.ndarray | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2:
            raise ParseError("embedding points must be 2-D")
        if not np.isfinite(pts).all():
            raise ParseError("embedding points contain NaN/Inf")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "items", tuple(self.items))


def _sq_dists(x: np.ndarray) -> np.ndarray:
    sq = (x**2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    d2 = 0.5 * (d2 + d2.T)  # exact symmetry
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def diffusion_maps(
    data: np.ndarray,
    dim: int = 3,
    kernel_epsilon: float | str = "auto",
    alpha: float = 1.0,
    items=None,
) -> Embedding:
    """Diffusion-maps embedding of row vectors.

    Gaussian kernel on pairwise Euclidean distances (bandwidth defaults to
    the median squared distance), density normalization with exponent
    ``alpha``, row-stochastic normalization, and coordinates
    ``lambda_i * psi_i`` from the top nontrivial eigenpairs (diffusion
    time 1).
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise ParseError("data must be 2-D (rows of feature vectors)")
    n = x.shape[0]
    if n < dim + 2:
        raise ParseError(f"need at least dim+2={dim + 2} rows, got {n}")
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must be in [0, 1]")
    d2 = _sq_dists(x)
    if kernel_epsilon == "auto":
        off = d2[np.triu_indices(n, k=1)]
        pos = off[off > 0]
        kernel_epsilon = float(np.median(pos)) if pos.size else 1.0
    eps = float(kernel_epsilon)
    if eps <= 0:
        raise EpsilonTooSmall("kernel epsilon must be positive")
    k = np.exp(-d2 / eps)
    off = k - np.diag(np.diag(k))
    if off.max(axis=1).min() < 1e-300:
        raise EpsilonTooSmall("kernel graph disconnected; increase epsilon")
    if alpha > 0:
        q = k.sum(axis=1) ** alpha
        k = k / np.outer(q, q)
    d = k.sum(axis=1)
    s = k / np.sqrt(np.outer(d, d))  # symmetric conjugate of the Markov matrix
    vals, vecs = sla.eigh(s, subset_by_index=[n - (dim + 1), n - 1])
    vals, vecs = vals[::-1], vecs[:, ::-1]
    psi = vecs / np.sqrt(d)[:, None]
    psi = _fix_signs(psi)
    pts = psi[:, 1 : dim + 1] * vals[1 : dim + 1][None, :]
    return Embedding(
        pts,
        tuple(items) if items is not None else tuple(range(n)),
        "diffusion_maps",
        {"epsilon": eps, "alpha": alpha, "dim": dim},
        eigenvalues=vals[1 : dim + 1].copy(),
    )


@dataclass(frozen=True)
class PcaResult:
    """Scores, components, and explained variance of a PCA fit."""

    scores: np.ndarray
    components: np.ndarray
    singular_values: np.ndarray
    explained_variance_ratio: np.ndarray
    mean: np.ndarray

    def reconstruct(self, p: int) -> np.ndarray:
        return self.mean + self.scores[:, :p] @ self.components[:, :p].T

    def as_embedding(self, dim: int, items=None) -> Embedding:
        return Embedding(
            self.scores[:, :dim].copy(),
            tuple(items) if items is not None else tuple(range(self.scores.shape[0])),
            "pca",
            {"dim": dim},
            eigenvalues=self.singular_values[:dim].copy(),
        )


def pca(data: np.ndarray, dim: int | None = None) -> PcaResult:
    """PCA of row vectors via SVD of the column-centered data matrix.

    Equivalent to the eigendecomposition of the centered second-moment
    matrix; scores are the projections onto the components and rows can be
    approximated from the first few of them.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ParseError("PCA needs at least 2 rows")
    mean = x.mean(axis=0)
    xc = x - mean
    u, s, vt = np.linalg.svd(xc, full_matrices=False)
    k = min(dim, s.size) if dim is not None else s.size
    comps = _fix_signs(vt.T[:, :k])
    scores = xc @ comps
    var = s**2
    ratio = var / var.sum() if var.sum() > 0 else np.zeros_like(var)
    return PcaResult(scores, comps, s[:k].copy(), ratio[:k].copy(), mean)


def time_trajectory_export(coeffs: CoefficientSet, component: int, channels=("x", "y", "z")) -> list[tuple]:
    """Tidy rows (sim, step, alpha_x, alpha_y, alpha_z, step_color).

    A pure reindexing of the projection coefficients at one eigen
    component; ``step_color`` is the step fraction in [0, 1] for plotting.
    """
    if not (0 <= component < coeffs.p):
        raise LengthMismatch(f"component {component} not in [0, {coeffs.p})")
    cidx = [coeffs.channels.index(c) for c in channels]
    rows = []
    denom = max(coeffs.n_steps - 1, 1)
    for s in range(coeffs.n_sims):
        for t in range(coeffs.n_steps):
            vals = [float(coeffs.alpha[s, t, ci, component]) for ci in cidx]
            rows.append((s, t, *vals, t / denom))
    return rows


def mode_morph(
    basis: SpectralBasis,
    alphas: np.ndarray,
    component: int,
    sweep,
) -> np.ndarray:
    """Reconstruction sweep varying one component, all others held fixed.

    ``alphas`` is the (p, 3) coefficient matrix of a reference simulation
    (channels x, y, z); each sweep entry is a 3-vector replacing the
    coefficients at ``component``. Returns (len(sweep), n_vertices, 3)
    positions: the overlay generator for single-mode effect isolation.
    """
    a = np.asarray(alphas, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3 or a.shape[0] > basis.p:
        raise LengthMismatch(f"alphas must be (p<= {basis.p}, 3), got {a.shape}")
    if not (0 <= component < a.shape[0]):
        raise LengthMismatch(f"component {component} not in [0, {a.shape[0]})")
    sweep = np.atleast_2d(np.asarray(sweep, dtype=np.float64))
    if sweep.shape[1] != 3:
        raise LengthMismatch("sweep entries must be 3-vectors")
    vecs = basis.vectors[:, : a.shape[0]]
    frames = np.empty((sweep.shape[0], basis.n, 3))
    for i, triple in enumerate(sweep):
        cur = a.copy()
        cur[component] = triple
        frames[i] = vecs @ cur
    return frames


def procrustes_align(x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Best orthogonal-plus-scaling alignment of y onto x (reflections allowed).

    Both point sets are centered; returns the RMS discrepancy and the
    aligned copy of y.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"point sets differ in shape: {x.shape} vs {y.shape}")
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    u, s, vt = np.linalg.svd(yc.T @ xc)
    rot = u @ vt
    denom = (yc**2).sum()
    scale = s.sum() / denom if denom > 0 else 1.0
    aligned = scale * (yc @ rot) + x.mean(axis=0)
    rms = float(np.sqrt(((aligned - x) ** 2).sum() / x.shape[0]))
    return rms, aligned


def rigid_fit(source: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Best rigid (rotation + translation) fit of source onto target.

    Returns (rotation, translation, rms residual); proper rotation
    enforced (no reflection).
    """
    a = np.asarray(source, dtype=np.float64)
    b = np.asarray(target, dtype=np.float64)
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    h = (a - ca).T @ (b - cb)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(u @ vt))
    flip = np.diag([1.0, 1.0, d])
    rot = (u @ flip @ vt).T
    t = cb - rot @ ca
    resid = (a @ rot.T + t) - b
    return rot, t, float(np.sqrt((resid**2).sum() / a.shape[0]))


def _two_means(points: np.ndarray, max_iter: int = 64) -> np.ndarray:
    """Deterministic 2-means: seeded by the farthest point pair."""
    d2 = _sq_dists(points)
    i, j = np.unravel_index(np.argmax(d2), d2.shape)
    centers = points[[i, j]].astype(np.float64)
    labels = np.zeros(points.shape[0], dtype=np.int64)
    for _ in range(max_iter):
        dist = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(dist, axis=1)
        if (new == labels).all() and _ > 0:
            break
        labels = new
        for c in (0, 1):
            if (labels == c).any():
                centers[c] = points[labels == c].mean(axis=0)
    return labels


def branch_silhouette(points: np.ndarray, labels: np.ndarray | None = None) -> float:
    """Mean silhouette of a two-way partition of the points.

    With ``labels`` given (e.g. known branch assignments), scores that
    partition; otherwise a deterministic 2-means clustering is scored.
    Degenerate inputs (coincident points, or a cluster collapsing to
    nothing) score 0: no separation evidence.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n < 4:
        return 0.0
    d = np.sqrt(_sq_dists(pts))
    if d.max() == 0.0:
        return 0.0
    if labels is not None:
        uniq = np.unique(labels)
        if uniq.size != 2:
            raise ParseError("labels must form exactly two groups")
        labels = (np.asarray(labels) == uniq[1]).astype(np.int64)
    else:
        labels = _two_means(pts)
    n0, n1 = int((labels == 0).sum()), int((labels == 1).sum())
    if n0 < 2 or n1 < 2:
        return 0.0
    scores = np.empty(n)
    for idx in range(n):
        same = labels == labels[idx]
        same[idx] = False
        other = labels != labels[idx]
        a = d[idx, same].mean()
        b = d[idx, other].mean()
        denom = max(a, b)
        scores[idx] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())
