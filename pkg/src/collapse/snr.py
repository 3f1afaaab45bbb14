"""SNR matrix, its SVD, aligned SNR coordinates and the normalized-features manifold.

The manifold is ``{X in R^{C x CN} : X C X^T = I_C}`` where ``C`` is the
class-centering matrix, i.e. features whose within-class covariance is the
identity.  Aligned coordinates rotate rows by the SNR left singular vectors
and mix class blocks by the right singular vectors, which diagonalizes the
class-mean matrix ``X Y^T / N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import subspace_angles

from ._validation import as_float_matrix, check_symmetric, symmetrize
from .errors import InvalidInputError, NearSingularError, PreconditionError
from .model import FeatureMatrix, ProblemDims, apply_centering, compute_stats, within_class_cov

#: singular values at or below this fraction of the largest one count as zero
RANK_RTOL = 1e-10
#: default relative eigenvalue floor for inverse square roots
INV_SQRT_FLOOR = 1e-12
#: tolerance on ``||X C X^T - I||_F`` for manifold preconditions
MANIFOLD_ATOL = 1e-8
#: relative off-diagonal mass of ``X Y^T / N`` tolerated by "aligned" checks
ALIGNED_RTOL = 1e-9


def inv_sqrt_spd(A, floor=INV_SQRT_FLOOR):
    """Symmetric inverse square root of a symmetric positive-definite matrix.

    Raises :class:`NearSingularError` if an eigenvalue is at or below
    ``floor * lambda_max``.
    """
    A = as_float_matrix(A, "A")
    check_symmetric(A, "A")
    w, Q = np.linalg.eigh(symmetrize(A))
    threshold = floor * max(w[-1], 0.0)
    if w[-1] <= 0 or w[0] <= threshold:
        raise NearSingularError(float(w[0]), float(threshold))
    return symmetrize((Q / np.sqrt(w)) @ Q.T)


def _require_zero_mean(H, atol=1e-10):
    mu = H.global_mean()
    scale = max(1.0, float(np.abs(H.data).max()))
    if np.linalg.norm(mu) > atol * scale:
        raise PreconditionError(
            f"features must have zero global mean (|mu_G| = {np.linalg.norm(mu):.3e})"
        )


def snr_matrix(Hbar):
    """``Sigma_W^{-1/2} Mbar`` for globally-centered features (P x C)."""
    _require_zero_mean(Hbar)
    s = compute_stats(Hbar)
    return inv_sqrt_spd(s.sigma_W) @ s.centered_means


@dataclass(frozen=True)
class SnrSpectrum:
    """SVD ``U diag(omega) V^T`` of an SNR matrix.

    ``singular_values`` has length C, is nonincreasing, and values at or
    below the rank tolerance are stored as exact zeros.  ``left_vectors`` has
    ``min(P, C)`` columns; ``right_vectors`` is C x C orthogonal.
    """

    left_vectors: np.ndarray = field(repr=False)
    singular_values: np.ndarray
    right_vectors: np.ndarray = field(repr=False)

    @property
    def num_classes(self):
        return self.right_vectors.shape[0]

    @property
    def rank(self):
        return int(np.count_nonzero(self.singular_values))

    @property
    def omegas(self):
        """The C-1 leading singular values."""
        return self.singular_values[: self.num_classes - 1]

    @property
    def nonzero_left(self):
        return self.left_vectors[:, : self.num_classes - 1]

    @property
    def nonzero_right(self):
        return self.right_vectors[:, : self.num_classes - 1]

    def reconstruct(self):
        k = self.left_vectors.shape[1]
        return (self.left_vectors * self.singular_values[:k]) @ self.right_vectors[:, :k].T


def _first_nonzero_sign(v, atol=1e-12):
    idx = np.flatnonzero(np.abs(v) > atol * max(np.abs(v).max(), np.finfo(float).tiny))
    if idx.size == 0:
        return 1.0
    return 1.0 if v[idx[0]] > 0 else -1.0


def snr_svd(snr):
    """Deterministic SVD of an SNR matrix.

    Conventions: nonincreasing singular values; each left vector has a
    positive first nonzero entry (right vectors flipped to match); runs of
    singular values equal to 1e-12 relative are ordered lexicographically by
    their left vectors.
    """
    S = as_float_matrix(snr, "snr")
    P, C = S.shape
    U, s, Vt = np.linalg.svd(S, full_matrices=True)
    k = min(P, C)
    U = U[:, :k].copy()
    V = Vt.T.copy()
    for j in range(C):
        sign = _first_nonzero_sign(U[:, j]) if j < k else _first_nonzero_sign(V[:, j])
        if j < k:
            U[:, j] *= sign
        V[:, j] *= sign
    omega = np.zeros(C)
    omega[:k] = s[:k]
    top = omega[0] if C else 0.0
    omega[omega <= RANK_RTOL * top] = 0.0

    # lexicographic tie-break inside runs of equal singular values
    order = list(range(C))
    start = 0
    while start < k:
        stop = start + 1
        while stop < k and abs(omega[stop] - omega[start]) <= 1e-12 * max(top, 1e-300):
            stop += 1
        if stop - start > 1:
            order[start:stop] = sorted(range(start, stop), key=lambda j: tuple(-U[:, j]))
        start = stop
    order = np.array(order)
    U = U[:, order[:k]]
    V = V[:, order]
    omega = omega[order]
    return SnrSpectrum(U, omega, V)


def mix_classes(X, M, dims):
    """``X (M kron I_N)``: block ``c`` of the result is ``sum_c' M[c', c] X_block(c')``."""
    k = X.shape[0]
    blocks = X.reshape(k, dims.C, dims.N)
    return np.einsum("kcn,cd->kdn", blocks, M).reshape(k, dims.num_examples)


def class_mean_matrix(X, dims):
    """``X Y^T / N`` (k x C)."""
    return X.reshape(X.shape[0], dims.C, dims.N).mean(axis=2)


def manifold_residual(X, dims):
    """``||X C X^T - I||_F``."""
    return float(np.linalg.norm(within_class_cov(X, dims) - np.eye(X.shape[0])))


@dataclass(frozen=True)
class AlignedState:
    """Features in aligned SNR coordinates.

    ``X`` is C x CN.  ``rotation`` (C x C) and ``right`` (C x C) record the
    frame, so that ``rotation @ X @ (right^T kron I_N)`` are the renormalized
    features expressed in the basis chosen at the first alignment.  ``basis``
    is that P x C basis (left SNR vectors of the original features).
    """

    dims: ProblemDims
    X: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    rotation: np.ndarray = field(default=None, repr=False)
    basis: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        d = self.dims
        if d.P != d.C:
            raise InvalidInputError("aligned state dims must have feature_dim == num_classes")
        X = as_float_matrix(self.X, "X", (d.C, d.num_examples)).copy()
        X.flags.writeable = False
        object.__setattr__(self, "X", X)
        as_float_matrix(self.right, "right", (d.C, d.C))
        if self.rotation is None:
            object.__setattr__(self, "rotation", np.eye(d.C))

    @property
    def omega_matrix(self):
        """``Omega = X Y^T / N``."""
        return class_mean_matrix(self.X, self.dims)

    @property
    def omegas(self):
        """Diagonal of ``Omega`` without the trailing (zero) entry."""
        return np.diag(self.omega_matrix)[: self.dims.C - 1].copy()

    def off_diagonal_mass(self):
        Om = self.omega_matrix
        return float(np.linalg.norm(Om - np.diag(np.diag(Om))))

    def is_aligned(self, rtol=ALIGNED_RTOL):
        Om = self.omega_matrix
        return self.off_diagonal_mass() <= rtol * max(np.linalg.norm(Om), np.finfo(float).tiny)

    def manifold_residual(self):
        return manifold_residual(self.X, self.dims)

    def features(self):
        """Renormalized, globally-centered features (C x CN) in the fixed frame."""
        data = self.rotation @ mix_classes(self.X, self.right.T, self.dims)
        return FeatureMatrix(self.dims, data)

    def replace_X(self, X):
        return AlignedState(self.dims, X, self.right, self.rotation, self.basis)


def align_features(Hbar):
    """``X = U^T Sigma_W^{-1/2} Hbar (V kron I_N)`` with U, V from the SNR SVD.

    Requires zero global mean, a full-rank within-class covariance and
    ``P >= C``.
    """
    if not isinstance(Hbar, FeatureMatrix):
        raise InvalidInputError("align_features expects a FeatureMatrix")
    d = Hbar.dims
    if d.P < d.C:
        raise PreconditionError(f"aligned coordinates need P >= C (P={d.P}, C={d.C})")
    _require_zero_mean(Hbar)
    s = compute_stats(Hbar)
    B = inv_sqrt_spd(s.sigma_W)
    spec = snr_svd(B @ s.centered_means)
    X = spec.left_vectors.T @ mix_classes(B @ Hbar.data, spec.right_vectors, d)
    cd = ProblemDims(d.C, d.N, d.C)
    return AlignedState(cd, X, spec.right_vectors, np.eye(d.C), spec.left_vectors)


def realign(state):
    """Re-diagonalize ``Omega`` of a state that has drifted from alignment."""
    spec = snr_svd(state.omega_matrix)
    Ur, Vr = spec.left_vectors, spec.right_vectors
    X = Ur.T @ mix_classes(state.X, Vr, state.dims)
    return AlignedState(state.dims, X, state.right @ Vr, state.rotation @ Ur, state.basis)


def renormalize(Z, dims, floor=INV_SQRT_FLOOR):
    """Map a k x CN matrix back to the manifold: ``(Z C Z^T)^{-1/2} Z``."""
    Z = np.asarray(Z, dtype=np.float64)
    return inv_sqrt_spd(within_class_cov(Z, dims), floor) @ Z


def tangent_project(X, Z, dims=None):
    """``Z - 1/2 (X C Z^T + Z C X^T) X``, the projection onto the tangent space at ``X``.

    ``X`` may be an :class:`AlignedState` or an array (then ``dims`` is
    required).  Raises if ``X`` is off the manifold by more than 1e-8.
    """
    if isinstance(X, AlignedState):
        dims = X.dims
        X = X.X
    if dims is None:
        raise InvalidInputError("dims is required when X is an array")
    X = np.asarray(X, dtype=np.float64)
    Z = as_float_matrix(Z, "Z", X.shape)
    res = manifold_residual(X, dims)
    if res > MANIFOLD_ATOL:
        raise PreconditionError(f"X is off the manifold (||X C X^T - I|| = {res:.3e})")
    XC = apply_centering(X, dims)
    S = XC @ Z.T
    return Z - 0.5 * (S + S.T) @ X


def tangency_residual(X, T, dims):
    """``||X C T^T + T C X^T||_F``."""
    S = apply_centering(X, dims) @ np.asarray(T).T
    return float(np.linalg.norm(S + S.T))


def max_principal_angle(A, B):
    """Largest principal angle (radians) between the column spans of A and B."""
    return float(np.max(subspace_angles(A, B)))
