"""Neural-collapse measurements (NC1-NC4) and a Simplex-ETF certificate."""

from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

from ._validation import as_float_matrix, check_positive
from .classifier import ExtendedClassifier, extend, ls_classifier_extended, predictions
from .errors import DegenerateGeometryError, InvalidInputError
from .model import FeatureMatrix, compute_stats, make_rng, random_orthonormal

PINV_RTOL = 1e-10


@dataclass(frozen=True)
class NcReport:
    nc1_trace: float
    equinorm_cv: float
    angle_dev: float
    self_duality: float
    ncc_mismatch: float

    def as_row(self, t):
        return (float(t), *astuple(self))


def nc1_trace(H):
    """``tr(pinv(Sigma_B) Sigma_W)`` with eigenvalue cutoff ``1e-10 * lambda_max``."""
    s = compute_stats(H)
    B = np.linalg.pinv(s.sigma_B, rcond=PINV_RTOL, hermitian=True)
    return max(float(np.sum(B * s.sigma_W)), 0.0)


def _centered_means(H):
    if isinstance(H, FeatureMatrix):
        return compute_stats(H).centered_means
    return as_float_matrix(H, "centered means")


def nc2_measures(H):
    """``(equinorm_cv, angle_dev)`` of the globally-centered class means.

    ``H`` is a :class:`FeatureMatrix` or a P x C matrix of centered means.
    """
    Mbar = _centered_means(H)
    C = Mbar.shape[1]
    if C < 2:
        raise InvalidInputError("need at least two classes")
    norms = np.linalg.norm(Mbar, axis=0)
    if norms.min() <= 1e-12 * max(norms.max(), np.finfo(float).tiny):
        raise DegenerateGeometryError(
            f"class {int(np.argmin(norms))} has a zero centered mean"
        )
    cv = float(np.std(norms) / np.mean(norms))
    unit = Mbar / norms
    cos = unit.T @ unit
    iu = np.triu_indices(C, k=1)
    dev = float(np.mean(np.abs(cos[iu] + 1.0 / (C - 1))))
    return cv, dev


def nc3_self_duality(W, Mbar):
    """``|| W / ||W||_F - Mbar^T / ||Mbar||_F ||_F``."""
    W = as_float_matrix(W, "W")
    Mbar = as_float_matrix(Mbar, "Mbar", (W.shape[1], W.shape[0]))
    nw, nm = np.linalg.norm(W), np.linalg.norm(Mbar)
    if nw == 0 or nm == 0:
        raise DegenerateGeometryError("self-duality is undefined for a zero-norm input")
    return float(np.linalg.norm(W / nw - Mbar.T / nm))


def nc4_mismatch(clf, M, H):
    """Fraction of columns where the classifier and the nearest class mean disagree.

    Ties go to the lowest class index under both rules.
    """
    if not isinstance(clf, ExtendedClassifier):
        raise InvalidInputError("clf must be an ExtendedClassifier")
    data = H.data if isinstance(H, FeatureMatrix) else as_float_matrix(H, "features")
    M = as_float_matrix(M, "class means", (data.shape[0], clf.num_classes))
    by_score = np.argmax(predictions(clf, data), axis=0)
    dist = np.linalg.norm(data[:, :, None] - M[:, None, :], axis=0)
    by_mean = np.argmin(dist, axis=1)
    return float(np.mean(by_score != by_mean))


@dataclass(frozen=True)
class EtfCertificate:
    """Outcome of :func:`etf_certificate` with its three residuals."""

    passed: bool
    spread: float
    null_ratio: float
    ones_residual: float
    tol: float

    def __bool__(self):
        return self.passed


def etf_certificate(E, tol=1e-9):
    """Check for a Simplex ETF: C-1 equal nonzero singular values and ``E 1 = 0``.

    ``spread`` is the relative gap among the top C-1 singular values,
    ``null_ratio`` is ``omega_C / omega_max`` and ``ones_residual`` is
    ``||E 1|| / ||E||_F``.
    """
    E = as_float_matrix(E, "E")
    tol = check_positive(tol, "tol")
    C = E.shape[1]
    if C < 2:
        raise InvalidInputError("need at least two columns")
    s = np.zeros(C)
    sv = np.linalg.svd(E, compute_uv=False)
    s[: sv.size] = sv[:C]
    top = s[0]
    if top == 0:
        return EtfCertificate(False, np.inf, np.inf, np.inf, tol)
    spread = float((s[0] - s[C - 2]) / top)
    null_ratio = float(s[C - 1] / top)
    ones = float(np.linalg.norm(E.sum(axis=1)) / np.linalg.norm(E))
    ok = spread <= tol and null_ratio <= tol and ones <= tol
    return EtfCertificate(bool(ok), spread, null_ratio, ones, tol)


def simplex_etf(P, C, seed=0, scale=1.0):
    """P x C Simplex ETF with columns of norm ``scale`` in a random orientation (P >= C-1)."""
    if P < C - 1:
        raise InvalidInputError(f"a Simplex ETF of {C} vectors needs P >= {C - 1}")
    rng = make_rng(seed, "simplex_etf")
    U = random_orthonormal(P, C - 1, rng)
    ones = np.ones((C, 1)) / np.sqrt(C)
    G = rng.standard_normal((C, C - 1))
    V = np.linalg.qr(G - ones @ (ones.T @ G))[0]
    return scale * np.sqrt(C / (C - 1)) * (U @ V.T)


def nc_report(H, clf=None, lam=0.0):
    """All NC measures for ``H``; ``clf`` defaults to the least-squares classifier."""
    if clf is None:
        clf = ls_classifier_extended(extend(H), lam)
    s = compute_stats(H)
    cv, dev = nc2_measures(s.centered_means)
    return NcReport(
        nc1_trace=nc1_trace(H),
        equinorm_cv=cv,
        angle_dev=dev,
        self_duality=nc3_self_duality(clf.weights, s.centered_means),
        ncc_mismatch=nc4_mismatch(clf, s.class_means, H),
    )
