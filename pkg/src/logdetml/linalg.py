"""Dense symmetric-matrix primitives shared by all solvers.

Conventions used throughout the package:

* a data matrix ``X`` has shape ``(d, n)`` -- columns are points;
* symmetric matrices are plain float64 ndarrays kept exactly symmetric
  (``symmetrize`` guarantees entrywise equality of ``A[i, j]`` and ``A[j, i]``);
* all matrix functions (inverse square root, exponential) go through a single
  spectral primitive, the symmetric eigendecomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericalError

# A matrix counts as PSD when min eigenvalue >= -PSD_RTOL * max(1, trace/dim);
# rank-one projection updates accumulate round-off of roughly this size.
PSD_RTOL = 1e-8

# Diagonal jitter, relative to trace/dim, added to a Gram matrix only when its
# plain Cholesky factorization fails.
DEFAULT_JITTER = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Input kernel description: ``linear``, ``gaussian`` (with width sigma),
    or ``precomputed`` (Gram matrix supplied directly)."""

    kind: str
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "gaussian", "precomputed"):
            raise InvalidArgumentError(f"unknown kernel kind: {self.kind!r}")
        if self.kind == "gaussian":
            if self.sigma is None or not self.sigma > 0:
                raise InvalidArgumentError("gaussian kernel requires sigma > 0")
        elif self.sigma is not None:
            raise InvalidArgumentError(f"sigma only applies to the gaussian kernel")

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls("linear")

    @classmethod
    def gaussian(cls, sigma: float) -> "KernelSpec":
        return cls("gaussian", float(sigma))

    @classmethod
    def precomputed(cls) -> "KernelSpec":
        return cls("precomputed")


def symmetrize(A: np.ndarray) -> np.ndarray:
    """Return 0.5*(A + A.T); the result is exactly symmetric entrywise."""
    return 0.5 * (A + A.T)


def _check_square(A: np.ndarray, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"{name} must be square, got shape {A.shape}")
    return A


def _check_same_dim(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape != B.shape:
        raise InvalidArgumentError(
            f"dimension mismatch: {A.shape} vs {B.shape}"
        )


def psd_tolerance(A: np.ndarray) -> float:
    """Eigenvalue slack below zero tolerated before declaring A not PSD."""
    n = A.shape[0]
    return PSD_RTOL * max(1.0, float(np.trace(A)) / n)


def min_eigenvalue(A: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    A = _check_square(A)
    return float(np.linalg.eigvalsh(A)[0])


def is_psd(A: np.ndarray) -> bool:
    return min_eigenvalue(A) >= -psd_tolerance(A)


def logdet_divergence(A: np.ndarray, B: np.ndarray) -> float:
    """LogDet divergence tr(A B^-1) - log det(A B^-1) - d.

    Defined for positive definite A, B; returns ``inf`` when A is singular
    PSD (the log-det limit). Scale invariant: the value is unchanged when
    both arguments are multiplied by the same positive factor.
    """
    A = _check_square(A, "A")
    B = _check_square(B, "B")
    _check_same_dim(A, B)
    d = A.shape[0]
    wb, Vb = np.linalg.eigh(B)
    if wb[0] <= psd_tolerance(B):
        raise InvalidArgumentError("B must be positive definite")
    wa = np.linalg.eigvalsh(A)
    tol_a = psd_tolerance(A)
    if wa[0] < -tol_a:
        raise InvalidArgumentError("A must be positive semidefinite")
    if wa[0] <= tol_a:
        return math.inf
    Binv = (Vb / wb) @ Vb.T
    trace_term = float(np.sum(A * Binv))
    logdet_term = float(np.sum(np.log(wa)) - np.sum(np.log(wb)))
    return trace_term - logdet_term - d


def vn_divergence(A: np.ndarray, B: np.ndarray) -> float:
    """von Neumann divergence tr(A log A - A log B - A + B), with 0 log 0 = 0."""
    A = _check_square(A, "A")
    B = _check_square(B, "B")
    _check_same_dim(A, B)
    wb, Vb = np.linalg.eigh(B)
    if wb[0] <= psd_tolerance(B):
        raise InvalidArgumentError("B must be positive definite")
    wa, Va = np.linalg.eigh(A)
    if wa[0] < -psd_tolerance(A):
        raise InvalidArgumentError("A must be positive semidefinite")
    wa = np.clip(wa, 0.0, None)
    ent = float(np.sum(wa[wa > 0] * np.log(wa[wa > 0])))
    logB = (Vb * np.log(wb)) @ Vb.T
    cross = float(np.sum(A * logB))
    return ent - cross - float(np.sum(wa)) + float(np.sum(wb))


def frob_divergence(A: np.ndarray, B: np.ndarray) -> float:
    """Squared Frobenius divergence 0.5 * ||A - B||_F^2."""
    A = _check_square(A, "A")
    B = _check_square(B, "B")
    _check_same_dim(A, B)
    return 0.5 * float(np.sum((A - B) ** 2))


def pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between columns of A (d, na) and B (d, nb)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    aa = np.sum(A * A, axis=0)[:, None]
    bb = np.sum(B * B, axis=0)[None, :]
    D = aa + bb - 2.0 * (A.T @ B)
    return np.clip(D, 0.0, None)


def gram(X: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Gram matrix of the columns of X under the given kernel.

    linear   -> X.T @ X
    gaussian -> exp(-||x_i - x_j||^2 / (2 sigma^2)), unit diagonal
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise InvalidArgumentError("X must be a (d, n) matrix with n >= 1")
    if spec.kind == "precomputed":
        raise InvalidArgumentError("cannot build a Gram matrix from a precomputed spec")
    if spec.kind == "linear":
        return symmetrize(X.T @ X)
    D = pairwise_sq_dists(X, X)
    K = np.exp(-D / (2.0 * spec.sigma**2))
    np.fill_diagonal(K, 1.0)
    return symmetrize(K)


def cross_gram(X: np.ndarray, Z: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Kernel values kappa(x_i, z_j) between columns of X and columns of Z."""
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if X.shape[0] != Z.shape[0]:
        raise InvalidArgumentError(
            f"point dimension mismatch: {X.shape[0]} vs {Z.shape[0]}"
        )
    if spec.kind == "precomputed":
        raise InvalidArgumentError("precomputed kernels cannot evaluate new points")
    if spec.kind == "linear":
        return X.T @ Z
    return np.exp(-pairwise_sq_dists(X, Z) / (2.0 * spec.sigma**2))


def pair_distance_kernel(K: np.ndarray, i: int, j: int) -> float:
    """Squared distance between points i and j read off a kernel matrix:
    K[i,i] + K[j,j] - 2 K[i,j]."""
    K = _check_square(K, "K")
    n = K.shape[0]
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidArgumentError(f"index out of range for n={n}: ({i}, {j})")
    return float(K[i, i] + K[j, j] - 2.0 * K[i, j])


def inv_sqrt(A: np.ndarray, jitter: float = 0.0) -> np.ndarray:
    """Inverse square root of a symmetric PD matrix, eigenvalue-wise.

    ``jitter * trace(A)/dim`` is added to the diagonal first; if the result
    is still not positive definite a NumericalError is raised.
    """
    A = _check_square(A)
    n = A.shape[0]
    if jitter < 0:
        raise InvalidArgumentError("jitter must be nonnegative")
    if jitter > 0:
        A = A + (jitter * float(np.trace(A)) / n) * np.eye(n)
    w, V = np.linalg.eigh(A)
    if w[0] <= n * np.finfo(float).eps * max(abs(w[0]), abs(w[-1])):
        raise NumericalError("matrix is singular; inverse square root failed")
    return symmetrize((V / np.sqrt(w)) @ V.T)


def sqrt_psd(A: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix; tiny negative eigenvalues from
    round-off are clamped to zero."""
    A = _check_square(A)
    w, V = np.linalg.eigh(A)
    if w[0] < -psd_tolerance(A):
        raise InvalidArgumentError("matrix is not positive semidefinite")
    w = np.clip(w, 0.0, None)
    return symmetrize((V * np.sqrt(w)) @ V.T)


def inv_psd(A: np.ndarray, jitter: float | None = None) -> tuple[np.ndarray, float]:
    """Inverse of a symmetric PD matrix with the package jitter policy.

    Tries a plain Cholesky factorization first.  On failure, retries once
    with ``jitter * trace(A)/dim`` added to the diagonal (``jitter`` defaults
    to DEFAULT_JITTER).  Returns ``(A_inv, jitter_used)`` where jitter_used
    is the absolute diagonal shift that was applied (0.0 when none was).
    """
    A = _check_square(A)
    n = A.shape[0]
    try:
        np.linalg.cholesky(A)
        return symmetrize(np.linalg.inv(A)), 0.0
    except np.linalg.LinAlgError:
        pass
    shift = (DEFAULT_JITTER if jitter is None else jitter) * float(np.trace(A)) / n
    Aj = A + shift * np.eye(n)
    try:
        np.linalg.cholesky(Aj)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("matrix is singular even after jitter") from exc
    return symmetrize(np.linalg.inv(Aj)), shift


def percentile(values, p: float) -> float:
    """Linear-interpolation percentile: rank = p/100 * (len-1), interpolated
    between the floor and ceil ranks of the ascending-sorted values."""
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size == 0:
        raise InvalidArgumentError("percentile of an empty list")
    if not 0.0 <= p <= 100.0:
        raise InvalidArgumentError(f"percentile p must be in [0, 100], got {p}")
    return float(np.percentile(vals, p))
