import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collapse.classifier import extend, ls_classifier_extended
from collapse.decomposition import (
    LossBreakdown,
    decompose,
    decompose_centered,
    mse_loss,
    simplex_etf_gram,
    spectral_loss,
    spectral_loss_derivative,
)
from collapse.errors import InvalidInputError
from collapse.model import FeatureMatrix, ProblemDims
from collapse.snr import snr_matrix, snr_svd

from helpers import random_features


def loop_loss(W, Ht, lam):
    d = Ht.dims
    total = 0.0
    for c in range(d.C):
        y = np.eye(d.C)[c]
        for i in range(d.N):
            r = W @ Ht.data[:, c * d.N + i] - y
            total += r @ r
    return 0.5 * total / d.num_examples + 0.5 * lam * np.sum(W * W)


def test_mse_loss_against_loops():
    Ht = extend(random_features(ProblemDims(3, 4, 2), 1, offset=0.2))
    W = np.random.default_rng(1).standard_normal((3, 3))
    assert mse_loss(W, Ht, 0.3) == pytest.approx(loop_loss(W, Ht, 0.3), rel=1e-13)


def test_zero_classifier_loss_is_half():
    Ht = extend(random_features(ProblemDims(4, 3, 2), 2))
    assert mse_loss(np.zeros((4, 3)), Ht) == pytest.approx(0.5)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32),
    C=st.integers(2, 5),
    P=st.integers(1, 6),
    lam=st.sampled_from([0.0, 0.05, 1.0]),
)
def test_identities_hold_at_any_classifier(seed, C, P, lam):
    N = P + 2
    Ht = extend(random_features(ProblemDims(C, N, P), seed, offset=0.4))
    W = np.random.default_rng(seed).standard_normal((C, P + 1))
    b = decompose(W, Ht, lam)
    assert b.identity_residual() < 1e-10
    assert b.perp_part >= 0 and b.nc1_part >= 0 and b.nc23_part >= 0


def test_on_central_path_perp_vanishes():
    Ht = extend(random_features(ProblemDims(3, 5, 4), 3, offset=0.4))
    W = ls_classifier_extended(Ht, 0.1)
    b = decompose(W, Ht, 0.1)
    assert b.perp_part < 1e-14
    assert b.total == pytest.approx(b.ls_part, rel=1e-12)


def test_collapsed_etf_features_have_zero_loss():
    C, N = 3, 4
    # columns of the centered identity form a Simplex ETF; scale them up so
    # the unregularized fit is exact
    means = 5.0 * simplex_etf_gram(C)
    H = FeatureMatrix(ProblemDims(C, N, C), np.repeat(means, N, axis=1))
    Ht = extend(H)
    W = np.linalg.lstsq(Ht.data.T, np.repeat(np.eye(C), N, axis=1).T, rcond=None)[0].T
    assert mse_loss(W, Ht) < 1e-25


def test_centered_matches_extended_path():
    H = random_features(ProblemDims(4, 6, 5), 4).centered()
    Ht = extend(H)
    ext = decompose(ls_classifier_extended(Ht), Ht)
    cen = decompose_centered(H)
    for name in ("total", "nc1_part", "nc23_part"):
        assert getattr(cen, name) == pytest.approx(getattr(ext, name), rel=1e-10)
    assert cen.identity_residual() < 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), C=st.integers(2, 6), extra=st.integers(0, 3))
def test_spectral_form_matches_direct(seed, C, extra):
    P = C + extra
    H = random_features(ProblemDims(C, P + 3, P), seed).centered()
    w = snr_svd(snr_matrix(H)).omegas
    direct, spec = decompose_centered(H), spectral_loss(w, C)
    assert spec.total == pytest.approx(direct.total, rel=1e-9)
    assert spec.nc1_part == pytest.approx(direct.nc1_part, rel=1e-9)
    assert spec.nc23_part == pytest.approx(direct.nc23_part, rel=1e-9, abs=1e-15)


def test_spectral_loss_values():
    # all zero singular values: (C-1)/(2C)
    assert spectral_loss([0.0, 0.0], 3).total == pytest.approx(1 / 3)
    b = spectral_loss([1.0], 2)
    assert b.total == pytest.approx(1 / 6)
    assert b.nc1_part + b.nc23_part == pytest.approx(b.total)
    with pytest.raises(InvalidInputError):
        spectral_loss([1.0, 2.0], 2)
    with pytest.raises(InvalidInputError):
        spectral_loss([-1.0], 2)


def test_spectral_derivative_by_central_differences():
    w = np.array([0.3, 1.2, 2.5])
    h = 1e-6
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (spectral_loss(w + e, 4).total - spectral_loss(w - e, 4).total) / (2 * h)
        assert spectral_loss_derivative(w, 4)[j] == pytest.approx(fd, rel=1e-7)


def test_breakdown_row_order():
    b = LossBreakdown(1.0, 2.0, 3.0, 4.0, 5.0)
    assert b.as_row() == (1.0, 2.0, 3.0, 4.0, 5.0)
