"""scikit-learn style wrappers around the least-squares classifier and SNR whitening.

These accept the usual ``(n_samples, n_features)`` design matrix with a label
vector.  Classes must be balanced (same number of samples each) because every
statistic here is an average over classes with equal weight.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._validation import check_nonnegative
from .classifier import extend, ls_classifier_extended
from .errors import InvalidInputError
from .model import FeatureMatrix, ProblemDims, compute_stats
from .snr import inv_sqrt_spd, snr_svd


def samples_to_features(X, y):
    """Arrange a balanced labelled sample into a :class:`FeatureMatrix`.

    Returns ``(features, classes)``.  Samples of class ``classes[c]`` fill
    columns ``c*N .. c*N + N - 1`` in their original relative order.
    """
    X, y = check_X_y(X, y, dtype=np.float64)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise InvalidInputError("need at least two classes")
    if np.any(counts != counts[0]):
        raise InvalidInputError(
            f"classes must be balanced; got counts {dict(zip(classes.tolist(), counts.tolist()))}"
        )
    order = np.concatenate([np.flatnonzero(y == c) for c in classes])
    dims = ProblemDims(int(classes.size), int(counts[0]), int(X.shape[1]))
    return FeatureMatrix(dims, X[order].T), classes


class LeastSquaresClassifier(ClassifierMixin, BaseEstimator):
    """Ridge-regularized least-squares classifier with bias on one-hot targets.

    ``weight_decay`` penalizes weights and bias alike.  With zero decay the
    fit requires a full-rank feature covariance.
    """

    def __init__(self, weight_decay=0.0):
        self.weight_decay = weight_decay

    def fit(self, X, y):
        lam = check_nonnegative(self.weight_decay, "weight_decay")
        H, self.classes_ = samples_to_features(X, y)
        clf = ls_classifier_extended(extend(H), lam)
        self.coef_ = np.array(clf.weights)
        self.intercept_ = np.array(clf.bias)
        self.n_features_in_ = H.dims.P
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return X @ self.coef_.T + self.intercept_

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]


class Renormalizer(TransformerMixin, BaseEstimator):
    """Center by the global mean and whiten by the within-class covariance."""

    def __init__(self, floor=1e-12):
        self.floor = floor

    def fit(self, X, y):
        H, self.classes_ = samples_to_features(X, y)
        s = compute_stats(H)
        self.mean_ = s.global_mean
        self.whitening_ = inv_sqrt_spd(s.sigma_W, self.floor)
        self.n_features_in_ = H.dims.P
        return self

    def transform(self, X):
        check_is_fitted(self, "whitening_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return (X - self.mean_) @ self.whitening_


class SNRAligner(TransformerMixin, BaseEstimator):
    """Whitened features expressed in the left singular basis of the SNR matrix.

    Output has ``min(P, C)`` columns; column ``j`` carries the signal of
    singular value ``singular_values_[j]``.  The class-side rotation of the
    SNR SVD mixes whole classes, not samples, so it is exposed as
    ``right_vectors_`` rather than applied.
    """

    def __init__(self, floor=1e-12):
        self.floor = floor

    def fit(self, X, y):
        H, self.classes_ = samples_to_features(X, y)
        s = compute_stats(H)
        B = inv_sqrt_spd(s.sigma_W, self.floor)
        spec = snr_svd(B @ s.centered_means)
        self.mean_ = s.global_mean
        self.components_ = spec.left_vectors.T @ B
        self.singular_values_ = spec.singular_values
        self.right_vectors_ = spec.right_vectors
        self.n_features_in_ = H.dims.P
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return (X - self.mean_) @ self.components_.T
