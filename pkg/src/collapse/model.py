"""Problem dimensions, feature matrices and first/second-order feature statistics.

Feature matrices are stored P x (C*N) with columns in "i-then-c" order: the
column of example ``i`` of class ``c`` (both zero-based) is ``c*N + i``.  Every
other module relies on this ordering, e.g. ``data.reshape(P, C, N)`` yields
``[feature, class, example]``.

All averages are population averages (divide by C*N or C).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_float_matrix, check_positive, symmetrize
from .errors import InvalidInputError


def make_rng(seed, stream="default"):
    """Counter-style independent stream ``stream`` derived from a 64-bit ``seed``.

    Streams are keyed by name, so adding a new stream never perturbs existing
    ones.
    """
    key = zlib.crc32(stream.encode("utf-8"))
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(key,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ProblemDims:
    """``num_classes`` (C), ``examples_per_class`` (N), ``feature_dim`` (P)."""

    num_classes: int
    examples_per_class: int
    feature_dim: int

    def __post_init__(self):
        for name, low in (("num_classes", 2), ("examples_per_class", 1), ("feature_dim", 1)):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidInputError(f"{name} must be an integer, got {value!r}")
            if value < low:
                raise InvalidInputError(f"{name} must be >= {low}, got {value}")
            object.__setattr__(self, name, int(value))

    @property
    def C(self):
        return self.num_classes

    @property
    def N(self):
        return self.examples_per_class

    @property
    def P(self):
        return self.feature_dim

    @property
    def num_examples(self):
        return self.num_classes * self.examples_per_class

    def with_feature_dim(self, feature_dim):
        return ProblemDims(self.num_classes, self.examples_per_class, feature_dim)


@dataclass(frozen=True)
class FeatureMatrix:
    """P x CN feature matrix in i-then-c column order (read-only)."""

    dims: ProblemDims
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = self.dims
        arr = as_float_matrix(self.data, "feature matrix", (d.P, d.num_examples)).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, data, num_classes, examples_per_class):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2:
            raise InvalidInputError(f"feature matrix must be 2-D, got ndim={data.ndim}")
        return cls(ProblemDims(num_classes, examples_per_class, data.shape[0]), data)

    def by_class(self):
        """View of shape (P, C, N)."""
        d = self.dims
        return self.data.reshape(d.P, d.C, d.N)

    def global_mean(self):
        return self.data.mean(axis=1)

    def class_means(self):
        return self.by_class().mean(axis=2)

    def centered(self):
        """Globally-centered copy (``H - mu_G 1^T``)."""
        return FeatureMatrix(self.dims, self.data - self.global_mean()[:, None])


@dataclass(frozen=True)
class FeatureStats:
    class_means: np.ndarray
    global_mean: np.ndarray
    centered_means: np.ndarray
    sigma_W: np.ndarray
    sigma_B: np.ndarray
    sigma_T: np.ndarray


def label_matrix(dims):
    """One-hot label matrix Y of shape C x CN, equal to ``kron(I_C, 1_N^T)``."""
    return np.repeat(np.eye(dims.C, dtype=np.int64), dims.N, axis=1)


def centering_matrix(dims):
    """Class-centering matrix ``(1/CN) (I - Y^T Y / N)``.

    For any features H, ``H @ centering_matrix(dims) @ H.T`` is the
    within-class covariance.  Prefer :func:`apply_centering` for large CN.
    """
    CN = dims.num_examples
    Y = label_matrix(dims).astype(np.float64)
    return (np.eye(CN) - Y.T @ Y / dims.N) / CN


def apply_centering(Z, dims):
    """Return ``Z @ centering_matrix(dims)`` for a k x CN matrix without forming it."""
    Z = np.asarray(Z, dtype=np.float64)
    k = Z.shape[0]
    blocks = Z.reshape(k, dims.C, dims.N)
    dev = blocks - blocks.mean(axis=2, keepdims=True)
    return dev.reshape(k, dims.num_examples) / dims.num_examples


def within_class_cov(Z, dims):
    """``Z C Z^T`` for a k x CN matrix Z (the within-class covariance of its rows)."""
    Z = np.asarray(Z, dtype=np.float64)
    k = Z.shape[0]
    blocks = Z.reshape(k, dims.C, dims.N)
    dev = (blocks - blocks.mean(axis=2, keepdims=True)).reshape(k, dims.num_examples)
    return symmetrize(dev @ dev.T) / dims.num_examples


def compute_stats(H):
    """Class means, global mean and the within/between/total covariances of ``H``."""
    if not isinstance(H, FeatureMatrix):
        raise InvalidInputError("compute_stats expects a FeatureMatrix")
    d = H.dims
    means = H.class_means()
    mu_G = H.global_mean()
    centered_means = means - mu_G[:, None]
    sigma_W = within_class_cov(H.data, d)
    sigma_B = symmetrize(centered_means @ centered_means.T) / d.C
    Hbar = H.data - mu_G[:, None]
    sigma_T = symmetrize(Hbar @ Hbar.T) / d.num_examples
    return FeatureStats(means, mu_G, centered_means, sigma_W, sigma_B, sigma_T)


def init_features(dims, seed, scale=1.0):
    """I.i.d. standard normal features times ``scale`` with the global mean removed."""
    scale = check_positive(scale, "scale")
    rng = make_rng(seed, "init_features")
    data = scale * rng.standard_normal((dims.P, dims.num_examples))
    data -= data.mean(axis=1, keepdims=True)
    return FeatureMatrix(dims, data)


def random_orthonormal(rows, cols, rng):
    """rows x cols matrix with orthonormal columns (Haar-distributed)."""
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def features_with_snr(dims, omegas, seed, mixing=None):
    """Zero-global-mean features whose SNR matrix has singular values ``omegas``.

    Within-class noise is drawn at random and renormalized to identity
    covariance; the class means are ``U diag(omegas) V^T`` with ``V`` orthogonal
    to the ones vector.  If ``mixing`` is a P x P invertible matrix the result
    is ``mixing @ H`` (the SNR singular values are unchanged by this).

    Requires ``P >= C - 1`` and ``C*N - C >= P`` so the noise can be whitened.
    """
    C, N, P = dims.C, dims.N, dims.P
    omegas = np.asarray(omegas, dtype=np.float64)
    if omegas.shape != (C - 1,) or np.any(omegas < 0):
        raise InvalidInputError(f"omegas must be C-1={C - 1} nonnegative values")
    if P < C - 1 or dims.num_examples - C < P:
        raise InvalidInputError("need P >= C-1 and C*N - C >= P to build whitened noise")
    rng = make_rng(seed, "features_with_snr")
    noise = rng.standard_normal((P, dims.num_examples))
    noise = noise.reshape(P, C, N)
    noise = (noise - noise.mean(axis=2, keepdims=True)).reshape(P, -1)
    w, Q = np.linalg.eigh(within_class_cov(noise, dims))
    noise = (Q / np.sqrt(w)) @ Q.T @ noise
    U = random_orthonormal(P, C - 1, rng)
    ones = np.ones((C, 1)) / np.sqrt(C)
    G = rng.standard_normal((C, C - 1))
    V = np.linalg.qr(G - ones @ (ones.T @ G))[0]
    means = (U * omegas) @ V.T
    data = noise + np.repeat(means, N, axis=1)
    if mixing is not None:
        mixing = as_float_matrix(mixing, "mixing", (P, P))
        data = mixing @ data
    data -= data.mean(axis=1, keepdims=True)
    return FeatureMatrix(dims, data)
