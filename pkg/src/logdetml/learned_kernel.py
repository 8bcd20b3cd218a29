"""Out-of-sample extension of a learned kernel.

A solved kernel problem gives K on the training points only.  Writing the
underlying metric as W = I + X M X^T with M = K0^-1 (K - K0) K0^-1, the
learned inner product of arbitrary points z1, z2 needs nothing but input
kernel evaluations:

    <z1, z2>_W = kappa(z1, z2) + k1^T M k2,
    k_i = [kappa(z_i, x_1), ..., kappa(z_i, x_n)]^T

so distances extend to unseen data.  M is materialized once when the model
is finalized; low-rank models keep M in factored form B C B^T instead and
never build the n x n matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .linalg import KernelSpec, cross_gram, inv_psd, symmetrize


def compute_M(K0: np.ndarray, K: np.ndarray, jitter: float | None = None):
    """Mixing matrix M = K0^-1 (K - K0) K0^-1; returns ``(M, jitter_used)``.

    K0 inversion follows the package jitter policy (shift added only when the
    plain factorization fails); the shift actually used is reported so models
    can record it.
    """
    K0 = np.asarray(K0, dtype=float)
    K = np.asarray(K, dtype=float)
    if K0.shape != K.shape:
        raise InvalidArgumentError(f"shape mismatch: {K0.shape} vs {K.shape}")
    K0inv, jitter_used = inv_psd(K0, jitter)
    M = symmetrize(K0inv @ (K - K0) @ K0inv)
    return M, jitter_used


@dataclass
class LearnedKernelModel:
    """Learned kernel function over the training points.

    Either ``M`` (dense n x n) or the factored pair ``(m_factor, m_core)``
    with M = m_factor @ m_core @ m_factor.T is set, never both.
    ``identity_coeff`` scales the input-kernel term of the inner product
    (1 for LogDet models; the Frobenius solver regularizes toward eta * I).
    """

    kernel_spec: KernelSpec
    X: np.ndarray | None
    K0: np.ndarray | None
    K: np.ndarray | None = None
    M: np.ndarray | None = None
    m_factor: np.ndarray | None = None
    m_core: np.ndarray | None = None
    identity_coeff: float = 1.0
    jitter_used: float = 0.0
    converged: bool = True

    def __post_init__(self):
        dense = self.M is not None
        factored = self.m_factor is not None and self.m_core is not None
        if dense == factored:
            raise InvalidArgumentError("exactly one of M or (m_factor, m_core) must be set")
        if self.kernel_spec.kind != "precomputed" and self.X is None:
            raise InvalidArgumentError("explicit training points are required unless the kernel is precomputed")

    @property
    def n_train(self) -> int:
        if self.M is not None:
            return self.M.shape[0]
        return self.m_factor.shape[0]

    def apply_M(self, V: np.ndarray) -> np.ndarray:
        """M @ V without materializing M in the factored case."""
        if self.M is not None:
            return self.M @ V
        return self.m_factor @ (self.m_core @ (self.m_factor.T @ V))

    def kernel_vectors(self, Z: np.ndarray) -> np.ndarray:
        """Input-kernel values (n_train, n_query) against the training points."""
        if self.X is None:
            raise InvalidArgumentError(
                "precomputed-kernel models support only training-index queries"
            )
        return cross_gram(self.X, Z, self.kernel_spec)


def from_kernel_fit(km, X: np.ndarray | None, spec: KernelSpec,
                    identity_coeff: float = 1.0) -> LearnedKernelModel:
    """Finalize a solver result into a queryable model (materializes M)."""
    M, jitter_used = compute_M(km.K0, km.K)
    return LearnedKernelModel(
        kernel_spec=spec,
        X=None if X is None else np.asarray(X, dtype=float),
        K0=km.K0,
        K=km.K,
        M=M,
        identity_coeff=identity_coeff,
        jitter_used=jitter_used,
        converged=km.converged,
    )


def _as_column(z, d: int) -> np.ndarray:
    z = np.asarray(z, dtype=float).ravel()
    if z.shape[0] != d:
        raise InvalidArgumentError(f"point has dimension {z.shape[0]}, expected {d}")
    return z[:, None]


def learned_inner_product(model: LearnedKernelModel, z1, z2) -> float:
    """Learned inner product <z1, z2>_W via input-kernel evaluations only."""
    d = model.X.shape[0] if model.X is not None else None
    if d is None:
        raise InvalidArgumentError("model lacks training points; use training-index queries")
    Z = np.concatenate([_as_column(z1, d), _as_column(z2, d)], axis=1)
    kv = model.kernel_vectors(Z)
    base = float(cross_gram(Z[:, :1], Z[:, 1:], model.kernel_spec)[0, 0])
    return model.identity_coeff * base + float(kv[:, 0] @ model.apply_M(kv[:, 1:2])[:, 0])


def learned_distance(model: LearnedKernelModel, z1, z2) -> float:
    """Learned squared distance, expanded from three learned inner products;
    round-off negatives within tolerance are clamped to zero."""
    d = model.X.shape[0] if model.X is not None else None
    if d is None:
        raise InvalidArgumentError("model lacks training points; use training-index queries")
    Z = np.concatenate([_as_column(z1, d), _as_column(z2, d)], axis=1)
    G = learned_gram(model, Z)
    # average the two cross terms so the distance is exactly symmetric in
    # its arguments despite floating-point non-commutativity
    val = float(G[0, 0] + G[1, 1] - (G[0, 1] + G[1, 0]))
    tol = 1e-8 * max(1.0, abs(G[0, 0]) + abs(G[1, 1]))
    if -tol <= val < 0.0:
        return 0.0
    return val


def learned_gram(model: LearnedKernelModel, Z1: np.ndarray, Z2: np.ndarray | None = None) -> np.ndarray:
    """Matrix of learned inner products between two point sets (columns)."""
    Z1 = np.asarray(Z1, dtype=float)
    Z2same = Z2 is None
    Z2 = Z1 if Z2same else np.asarray(Z2, dtype=float)
    K1 = model.kernel_vectors(Z1)
    K2 = K1 if Z2same else model.kernel_vectors(Z2)
    base = cross_gram(Z1, Z2, model.kernel_spec)
    return model.identity_coeff * base + K1.T @ model.apply_M(K2)


def learned_sq_distances(model: LearnedKernelModel, Z1: np.ndarray, Z2: np.ndarray) -> np.ndarray:
    """Pairwise learned squared distances between columns of Z1 and Z2."""
    G12 = learned_gram(model, Z1, Z2)
    g1 = _learned_self_products(model, Z1)
    g2 = _learned_self_products(model, Z2)
    D = g1[:, None] + g2[None, :] - 2.0 * G12
    return np.clip(D, 0.0, None)


def _learned_self_products(model: LearnedKernelModel, Z: np.ndarray) -> np.ndarray:
    KZ = model.kernel_vectors(Z)
    if model.kernel_spec.kind == "gaussian":
        base = np.ones(Z.shape[1])
    else:
        base = np.sum(Z * Z, axis=0)
    return model.identity_coeff * base + np.sum(KZ * model.apply_M(KZ), axis=0)


def training_pair_distance(model: LearnedKernelModel, a: int, b: int) -> float:
    """Learned squared distance between two training points by index.

    Works for every model, including precomputed-kernel ones: the kernel
    vector of training point a is the a-th column of K0.
    """
    if model.K0 is None:
        raise InvalidArgumentError("model does not carry K0")
    n = model.K0.shape[0]
    if not (0 <= a < n and 0 <= b < n):
        raise InvalidArgumentError(f"training index out of range for n={n}")
    if model.K is not None:
        return float(model.K[a, a] + model.K[b, b] - 2.0 * model.K[a, b])
    kv = model.K0[:, [a, b]]
    base = model.identity_coeff * model.K0[np.ix_([a, b], [a, b])]
    G = base + kv.T @ model.apply_M(kv)
    return max(0.0, float(G[0, 0] + G[1, 1] - 2.0 * G[0, 1]))
