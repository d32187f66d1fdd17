"""Data-driven Fokker-Planck operator from per-vertex simulation clouds.

At a fixed time step, the m simulations put a cloud of m positions at every
vertex. The cloud covariance estimates the local squared Jacobian of the
(unknown) deterministic observation map up to one global scale, and the
resulting anisotropic quadratic form approximates distances between the
underlying latent variables. A Gaussian kernel of those distances,
density-normalized and made row-stochastic, gives a discrete operator that
is invariant to the deterministic transformation.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .bundle import SimulationBundle
from .errors import DegenerateCloudWarning, EpsilonTooSmall, IndexOutOfRange, ParseError
from .operators import KIND_FP, FpOperatorPair, SymmetricOperator

RANK_TOL = 1e-8
VARIANTS = ("sum_of_inv", "inv_of_sum")


def _lock(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LocalJacobianField:
    """Per-vertex scaled squared-Jacobian estimates and their pseudo-inverses.

    ``jjt`` holds symmetric PSD 3x3 matrices (the scaled cloud covariance),
    ``jjt_inv`` their pseudo-inverses with singular values below
    ``RANK_TOL`` of the largest truncated, ``rank`` the surviving count.
    """

    jjt: np.ndarray
    jjt_inv: np.ndarray
    rank: np.ndarray

    def __post_init__(self):
        j = np.ascontiguousarray(np.asarray(self.jjt, dtype=np.float64))
        ji = np.ascontiguousarray(np.asarray(self.jjt_inv, dtype=np.float64))
        r = np.ascontiguousarray(np.asarray(self.rank, dtype=np.int64))
        if j.ndim != 3 or j.shape[1:] != (3, 3) or ji.shape != j.shape:
            raise ParseError("jacobian field must be (n, 3, 3)")
        if r.shape != (j.shape[0],):
            raise ParseError("rank vector length mismatch")
        object.__setattr__(self, "jjt", _lock(j))
        object.__setattr__(self, "jjt_inv", _lock(ji))
        object.__setattr__(self, "rank", _lock(r))

    @property
    def n(self) -> int:
        return self.jjt.shape[0]

    @classmethod
    def from_matrices(cls, jjt: np.ndarray, rank_tol: float = RANK_TOL) -> "LocalJacobianField":
        """Build a field from given PSD matrices (e.g. exact Jacobians)."""
        jjt = np.asarray(jjt, dtype=np.float64)
        inv, rank = _batch_pinv(jjt, rank_tol)
        return cls(jjt, inv, rank)


def _batch_pinv(mats: np.ndarray, rank_tol: float = RANK_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse of symmetric PSD matrices with relative rank cutoff."""
    vals, vecs = np.linalg.eigh(mats)
    vmax = vals.max(axis=-1, keepdims=True)
    keep = vals > rank_tol * np.maximum(vmax, 0.0)
    inv_vals = np.where(keep, np.divide(1.0, vals, where=keep, out=np.zeros_like(vals)), 0.0)
    inv = np.einsum("...ij,...j,...kj->...ik", vecs, inv_vals, vecs)
    return inv, keep.sum(axis=-1)


def estimate_local_jacobians(
    bundle: SimulationBundle, step: int, rank_tol: float = RANK_TOL
) -> LocalJacobianField:
    """Sample covariance of each vertex's cloud across simulations.

    The covariance uses the m - 1 denominator; the global (d+2)/delta^2
    scale relating it to the squared Jacobian is left to the kernel
    bandwidth. Vertices whose cloud has zero variance in every direction
    get a zero matrix (with a warning) so they simply drop out of
    distance quadratic forms.

    ``rank_tol`` is the relative eigenvalue cutoff of the pseudo-inverse.
    The default only strips exact degeneracies; callers probing data on a
    curved low-dimensional manifold should raise it toward the noise
    floor, since the spurious normal-direction variance of a curved cloud
    otherwise dominates inverted quadratic forms.
    """
    if bundle.n_sims < 2:
        raise ParseError("jacobian estimation needs at least 2 simulations")
    if not (0 <= step < bundle.n_steps):
        raise IndexOutOfRange(f"step {step} not in [0, {bundle.n_steps})")
    clouds = bundle.frames[:, step]  # (m, n, 3)
    centered = clouds - clouds.mean(axis=0)
    cov = np.einsum("mki,mkj->kij", centered, centered) / (bundle.n_sims - 1)
    # clouds whose variance is at rounding level of the position magnitude
    # are exactly degenerate, not merely small
    scale = max(1.0, float(np.abs(clouds).max()))
    floor = (64.0 * np.finfo(np.float64).eps * scale) ** 2
    dead = np.linalg.eigvalsh(cov)[:, -1] <= floor
    cov[dead] = 0.0
    inv, rank = _batch_pinv(cov, rank_tol)
    if (rank == 0).any():
        warnings.warn(
            f"{int((rank == 0).sum())} vertex cloud(s) with zero variance; "
            "their jacobian matrices are zero",
            DegenerateCloudWarning,
            stacklevel=2,
        )
    return LocalJacobianField(cov, inv, rank)


def nica_distance(
    field: LocalJacobianField,
    eta_k: np.ndarray,
    eta_l: np.ndarray,
    k: int,
    l: int,
    variant: str = "sum_of_inv",
    rank_tol: float = RANK_TOL,
) -> float:
    """Squared latent distance estimate between two observed points.

    sum_of_inv:  0.5 * d^T (JJt_inv[k] + JJt_inv[l]) d
    inv_of_sum:  2 * d^T pinv(JJt[k] + JJt[l]) d

    with d = eta_k - eta_l. Rank-deficient directions are dropped by the
    pseudo-inverse (sum_of_inv underestimates conservatively there);
    ``rank_tol`` applies to the pairwise inversion of inv_of_sum.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    d = np.asarray(eta_k, dtype=np.float64) - np.asarray(eta_l, dtype=np.float64)
    if variant == "sum_of_inv":
        return float(0.5 * d @ (field.jjt_inv[k] + field.jjt_inv[l]) @ d)
    inv, _ = _batch_pinv((field.jjt[k] + field.jjt[l])[None], rank_tol)
    return float(2.0 * d @ inv[0] @ d)


def _pairwise_sq_distances(
    field: LocalJacobianField, eta: np.ndarray, variant: str, rank_tol: float = RANK_TOL
) -> np.ndarray:
    n = eta.shape[0]
    out = np.zeros((n, n))
    if variant == "sum_of_inv":
        binv = field.jjt_inv
        for k in range(n):
            d = eta[k] - eta[k:]  # upper triangle only
            qk = np.einsum("nj,jk,nk->n", d, binv[k], d)
            ql = np.einsum("nj,njk,nk->n", d, binv[k:], d)
            out[k, k:] = 0.5 * (qk + ql)
    else:
        for k in range(n):
            d = eta[k] - eta[k:]
            inv, _ = _batch_pinv(field.jjt[k] + field.jjt[k:], rank_tol)
            out[k, k:] = 2.0 * np.einsum("nj,njk,nk->n", d, inv, d)
    out = out + out.T
    np.fill_diagonal(out, 0.0)
    return out


def median_bandwidth(sq_distances: np.ndarray) -> float:
    """Median of the nonzero squared distances (the usual kernel heuristic)."""
    off = sq_distances[np.triu_indices_from(sq_distances, k=1)]
    pos = off[off > 0]
    if pos.size == 0:
        raise EpsilonTooSmall("all pairwise distances are zero")
    return float(np.median(pos))


def assemble_fp(
    bundle: SimulationBundle,
    step: int,
    epsilon: float | str = "auto",
    variant: str = "sum_of_inv",
    reference: int | str = 0,
    knn: int | None = None,
    rank_tol: float = RANK_TOL,
) -> FpOperatorPair:
    """Assemble the discrete Fokker-Planck operator at one time step.

    Pairwise anisotropic distances are evaluated at reference positions
    (simulation ``reference``, or ``"mean"`` for the bundle mean at that
    step), fed through the Gaussian kernel ``exp(-d^2 / epsilon)`` with no
    self-weight, then density-normalized symmetrically and reduced to the
    symmetric form plus its degree vector. ``epsilon="auto"`` uses the
    median of nonzero squared distances. ``knn`` optionally keeps only the
    k nearest neighbors per row (symmetrized) for larger meshes.
    """
    field = estimate_local_jacobians(bundle, step, rank_tol)
    if reference == "mean":
        eta = bundle.frames[:, step].mean(axis=0)
    else:
        eta = bundle.frame(int(reference), step)
    d2 = _pairwise_sq_distances(field, eta, variant, rank_tol)
    if epsilon == "auto":
        epsilon = median_bandwidth(d2)
    epsilon = float(epsilon)
    if epsilon <= 0:
        raise EpsilonTooSmall("epsilon must be positive")
    a = np.exp(-d2 / epsilon)
    np.fill_diagonal(a, 0.0)
    if knn is not None:
        keep = np.zeros_like(a, dtype=bool)
        idx = np.argsort(-a, axis=1)[:, :knn]
        np.put_along_axis(keep, idx, True, axis=1)
        keep |= keep.T
        a = np.where(keep, a, 0.0)
    row_max = a.max(axis=1)
    if row_max.min() < 1e-300:
        raise EpsilonTooSmall(
            "kernel matrix numerically reducible; increase epsilon"
        )
    d_a = a.sum(axis=1)
    w_d = a / np.sqrt(np.outer(d_a, d_a))
    d_d = w_d.sum(axis=1)
    w_s = w_d / np.sqrt(np.outer(d_d, d_d))
    op = SymmetricOperator(
        sparse.csr_matrix(w_s),
        KIND_FP,
        {
            "epsilon": epsilon,
            "variant": variant,
            "reference": reference,
            "step": int(step),
            "knn": knn,
        },
    )
    return FpOperatorPair(op, d_d)
