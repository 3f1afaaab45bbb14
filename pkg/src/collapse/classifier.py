"""MSE-optimal (ridge) classifier on fixed features and distance to the central path."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ._validation import as_float_matrix, as_float_vector, check_nonnegative, symmetrize
from .errors import InvalidInputError, PreconditionError, RankDeficiencyError
from .model import FeatureMatrix, compute_stats

#: relative eigenvalue threshold below which a system is declared singular
RANK_RTOL = 1e-10
#: relative tolerance for "zero global mean"
CENTERED_ATOL = 1e-12


@dataclass(frozen=True)
class ExtendedClassifier:
    """Weights ``W`` (C x P) and bias ``b`` (C,); ``stacked`` is ``[W, b]``."""

    weights: np.ndarray = field(repr=False)
    bias: np.ndarray = field(repr=False)

    def __post_init__(self):
        W = as_float_matrix(self.weights, "weights").copy()
        b = as_float_vector(self.bias, "bias", W.shape[0]).copy()
        W.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "bias", b)

    @classmethod
    def from_stacked(cls, Wt):
        Wt = as_float_matrix(Wt, "extended classifier")
        return cls(Wt[:, :-1], Wt[:, -1])

    @property
    def stacked(self):
        return np.hstack([self.weights, self.bias[:, None]])

    @property
    def num_classes(self):
        return self.weights.shape[0]

    @property
    def feature_dim(self):
        return self.weights.shape[1]


@dataclass(frozen=True)
class ExtendedStats:
    ext_means: np.ndarray
    ext_global_mean: np.ndarray
    ext_sigma_T: np.ndarray
    ext_sigma_W: np.ndarray


def extend(H):
    """Append a constant row of ones: ``h~ = [h; 1]``."""
    d = H.dims
    data = np.vstack([H.data, np.ones((1, d.num_examples))])
    return FeatureMatrix(d.with_feature_dim(d.P + 1), data)


def _require_extended(Ht):
    if not isinstance(Ht, FeatureMatrix):
        raise InvalidInputError("expected a FeatureMatrix of extended features")
    if not np.all(Ht.data[-1] == 1.0):
        raise InvalidInputError("last feature row must be all ones; call extend() first")


def extended_stats(Ht):
    _require_extended(Ht)
    s = compute_stats(Ht)
    return ExtendedStats(s.class_means, s.global_mean, s.sigma_T, s.sigma_W)


def second_moment(Ht, lam):
    """The system matrix ``Sigma~_T + mu~_G mu~_G^T + lam I``."""
    st = extended_stats(Ht)
    mu = st.ext_global_mean
    return symmetrize(st.ext_sigma_T + np.outer(mu, mu)) + lam * np.eye(mu.size)


def _spd_solve(A, B, name):
    """Solve ``A X = B`` for symmetric ``A``; raise if ``A`` is numerically singular."""
    w = np.linalg.eigvalsh(A)
    if w[-1] <= 0 or w[0] <= RANK_RTOL * w[-1]:
        raise RankDeficiencyError(
            name, f"eigenvalue range [{w[0]:.3e}, {w[-1]:.3e}] (threshold {RANK_RTOL:g} relative)"
        )
    return linalg.cho_solve(linalg.cho_factor(A, lower=True), B)


def ls_classifier_extended(Ht, lam=0.0):
    """``W~_LS = (1/C) M~^T (Sigma~_T + mu~_G mu~_G^T + lam I)^{-1}``.

    At ``lam == 0`` the system is invertible iff the unextended total
    covariance is full rank; otherwise :class:`RankDeficiencyError` is raised.
    """
    lam = check_nonnegative(lam, "lam")
    A = second_moment(Ht, lam)
    M = extended_stats(Ht).ext_means
    Wt = _spd_solve(A, M, "sigma~_T + mu~_G mu~_G^T + lambda I").T / Ht.dims.C
    return ExtendedClassifier.from_stacked(Wt)


def _require_centered(H):
    mu = H.global_mean()
    scale = max(1.0, float(np.abs(H.data).max()))
    if np.linalg.norm(mu) > CENTERED_ATOL * scale:
        raise PreconditionError(
            f"features must have zero global mean (|mu_G| = {np.linalg.norm(mu):.3e}); "
            "center them explicitly with FeatureMatrix.centered()"
        )
    return mu


def ls_classifier_centered(Hbar):
    """Unextended least-squares classifier on globally-centered features.

    Returns ``(W_LS, b_LS)`` with ``W_LS = C^{-1} Mbar^T Sigma_T^{-1}`` and
    ``b_LS = C^{-1} 1 - W_LS mu_G``.
    """
    mu = _require_centered(Hbar)
    s = compute_stats(Hbar)
    C = Hbar.dims.C
    W = _spd_solve(s.sigma_T, s.centered_means, "sigma_T").T / C
    b = np.full(C, 1.0 / C) - W @ mu
    return W, b


def predictions(clf, H):
    """Score matrix ``W H + b 1^T`` of shape C x (number of columns of H)."""
    data = H.data if isinstance(H, FeatureMatrix) else as_float_matrix(H, "features")
    if data.shape[0] != clf.feature_dim:
        raise InvalidInputError(
            f"classifier expects {clf.feature_dim} features, got {data.shape[0]}"
        )
    return clf.weights @ data + clf.bias[:, None]


def central_path_residual(Wt, Ht, lam=0.0):
    """``L_LS^perp = 1/2 tr[(W~ - W~_LS) A (W~ - W~_LS)^T]`` with ``A`` the system matrix."""
    lam = check_nonnegative(lam, "lam")
    Wt = Wt.stacked if isinstance(Wt, ExtendedClassifier) else as_float_matrix(Wt, "W~")
    if Wt.shape != (Ht.dims.C, Ht.dims.P):
        raise InvalidInputError(f"W~ must have shape {(Ht.dims.C, Ht.dims.P)}, got {Wt.shape}")
    D = Wt - ls_classifier_extended(Ht, lam).stacked
    A = second_moment(Ht, lam)
    return max(0.5 * float(np.einsum("ij,jk,ik->", D, A, D)), 0.0)


def stationarity_residual(Wt, Ht, lam=0.0):
    """``Ave (W~ h~ - y) h~^T + lam W~``; zero exactly at the optimum."""
    Wt = Wt.stacked if isinstance(Wt, ExtendedClassifier) else as_float_matrix(Wt, "W~")
    d = Ht.dims
    Y = np.repeat(np.eye(d.C), d.N, axis=1)
    return (Wt @ Ht.data - Y) @ Ht.data.T / d.num_examples + lam * Wt

