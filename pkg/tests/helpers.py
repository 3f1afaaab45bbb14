"""Shared fixture builders for the test suite."""

import numpy as np

from collapse.model import FeatureMatrix, ProblemDims, make_rng


def random_features(dims, seed, offset=0.0, spread=1.0):
    """Gaussian features with class-dependent means, optionally shifted globally."""
    g = make_rng(seed, "random_features")
    means = spread * g.standard_normal((dims.P, dims.C))
    noise = g.standard_normal((dims.P, dims.num_examples))
    data = np.repeat(means, dims.N, axis=1) + noise + offset
    return FeatureMatrix(dims, data)


def centered_features(C, N, P, seed):
    return random_features(ProblemDims(C, N, P), seed).centered()
