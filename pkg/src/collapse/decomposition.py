"""MSE loss and its split into NC1, NC2/3 and off-central-path parts.

``decompose`` evaluates the three terms independently of ``mse_loss`` so the
identity ``total = nc1 + nc23 + perp`` is a real check, not a tautology.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

from ._validation import as_float_matrix, as_float_vector, check_nonnegative
from .classifier import (
    ExtendedClassifier,
    central_path_residual,
    extended_stats,
    ls_classifier_centered,
    ls_classifier_extended,
)
from .errors import InvalidInputError
from .model import FeatureMatrix, compute_stats


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    ls_part: float
    perp_part: float
    nc1_part: float
    nc23_part: float

    def as_row(self):
        return astuple(self)

    def identity_residual(self):
        """Largest relative violation of the two decomposition identities."""
        scale = max(1.0, abs(self.total))
        return max(
            abs(self.total - (self.ls_part + self.perp_part)),
            abs(self.total - (self.nc1_part + self.nc23_part + self.perp_part)),
        ) / scale


def _stacked(Wt):
    if isinstance(Wt, ExtendedClassifier):
        return Wt.stacked
    return as_float_matrix(Wt, "W~")


def mse_loss(Wt, Ht, lam=0.0):
    """``1/2 Ave ||W~ h~ - y||^2 + lam/2 ||W~||_F^2`` for one-hot targets."""
    lam = check_nonnegative(lam, "lam")
    Wt = _stacked(Wt)
    d = Ht.dims
    if Wt.shape != (d.C, d.P):
        raise InvalidInputError(f"W~ must have shape {(d.C, d.P)}, got {Wt.shape}")
    R = Wt @ Ht.data
    R.reshape(d.C, d.C, d.N)[np.arange(d.C), np.arange(d.C), :] -= 1.0
    return 0.5 * float(np.sum(R * R)) / d.num_examples + 0.5 * lam * float(np.sum(Wt * Wt))


def decompose(Wt, Ht, lam=0.0):
    """Full breakdown of ``mse_loss(Wt, Ht, lam)`` at arbitrary ``Wt``."""
    lam = check_nonnegative(lam, "lam")
    W_ls = ls_classifier_extended(Ht, lam).stacked
    st = extended_stats(Ht)
    C = Ht.dims.C
    nc1 = 0.5 * float(np.trace(W_ls @ (st.ext_sigma_W + lam * np.eye(Ht.dims.P)) @ W_ls.T))
    G = W_ls @ st.ext_means - np.eye(C)
    nc23 = float(np.sum(G * G)) / (2 * C)
    return LossBreakdown(
        total=mse_loss(Wt, Ht, lam),
        ls_part=mse_loss(W_ls, Ht, lam),
        perp_part=central_path_residual(Wt, Ht, lam),
        nc1_part=nc1,
        nc23_part=nc23,
    )


def simplex_etf_gram(C):
    """``Phi = I - (1/C) 1 1^T``."""
    return np.eye(C) - np.full((C, C), 1.0 / C)


def decompose_centered(Hbar):
    """Central-path breakdown at ``lam = 0`` in unextended coordinates.

    Requires zero global mean and a full-rank total covariance.  ``perp_part``
    is zero by construction.
    """
    if not isinstance(Hbar, FeatureMatrix):
        raise InvalidInputError("decompose_centered expects a FeatureMatrix")
    W, b = ls_classifier_centered(Hbar)
    d = Hbar.dims
    s = compute_stats(Hbar)
    R = W @ Hbar.data + b[:, None]
    R.reshape(d.C, d.C, d.N)[np.arange(d.C), np.arange(d.C), :] -= 1.0
    total = 0.5 * float(np.sum(R * R)) / d.num_examples
    nc1 = 0.5 * float(np.trace(W @ s.sigma_W @ W.T))
    G = W @ s.centered_means - simplex_etf_gram(d.C)
    nc23 = float(np.sum(G * G)) / (2 * d.C)
    return LossBreakdown(total=total, ls_part=total, perp_part=0.0, nc1_part=nc1, nc23_part=nc23)


def spectral_loss(omegas, C):
    """Central-path loss (``lam = 0``) as a function of the C-1 SNR singular values."""
    if isinstance(C, bool) or int(C) != C or C < 2:
        raise InvalidInputError(f"C must be an integer >= 2, got {C!r}")
    C = int(C)
    w = as_float_vector(omegas, "omegas")
    if w.size != C - 1:
        raise InvalidInputError(f"expected C-1={C - 1} singular values, got {w.size}")
    if np.any(w < 0):
        raise InvalidInputError("singular values must be nonnegative")
    w2 = w * w
    total = 0.5 * float(np.sum(1.0 / (w2 + C)))
    nc1 = 0.5 * float(np.sum(w2 / (C + w2) ** 2))
    nc23 = 0.5 * float(np.sum((w2 / (w2 + C) - 1.0) ** 2)) / C
    return LossBreakdown(total=total, ls_part=total, perp_part=0.0, nc1_part=nc1, nc23_part=nc23)


def spectral_loss_derivative(omegas, C):
    """``d total / d omega_j = -omega_j / (C + omega_j^2)^2``."""
    w = np.asarray(omegas, dtype=np.float64)
    return -w / (C + w * w) ** 2
