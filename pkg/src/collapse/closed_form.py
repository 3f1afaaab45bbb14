"""Closed-form singular-value dynamics and their limits.

Each nonzero SNR singular value obeys ``d omega / dt = omega / (N (C + omega^2)^2)``,
which integrates to the implicit relation

    c1 log(omega) + c2 omega^2 + c3 omega^4 = a + t,
    c1 = N C^2,  c2 = N C,  c3 = N / 4.

The left side increases strictly from -inf to +inf on (0, inf), so the root is
unique and bisection always converges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, RankDeficiencyError
from .snr import RANK_RTOL, SnrSpectrum


def _check_dims(C, N):
    for name, v, low in (("C", C, 2), ("N", N, 1)):
        if isinstance(v, bool) or int(v) != v or v < low:
            raise InvalidInputError(f"{name} must be an integer >= {low}, got {v!r}")
    return int(C), int(N)


def _check_omega(omega, name="omega"):
    omega = float(omega)
    if not math.isfinite(omega) or omega <= 0:
        raise InvalidInputError(f"{name} must be a finite positive real, got {omega!r}")
    return omega


@dataclass(frozen=True)
class OdeConstants:
    c1: float
    c2: float
    c3: float

    @classmethod
    def for_dims(cls, C, N):
        C, N = _check_dims(C, N)
        return cls(float(N * C * C), float(N * C), N / 4.0)

    def lhs(self, omega):
        """``c1 log omega + c2 omega^2 + c3 omega^4``."""
        w2 = omega * omega
        return self.c1 * math.log(omega) + self.c2 * w2 + self.c3 * w2 * w2


@dataclass(frozen=True)
class ImplicitSolution:
    constants: OdeConstants
    omega0: float
    a: float

    def residual(self, omega, t):
        """Implicit-equation residual scaled by ``max(1, |a| + t)``."""
        return abs(self.constants.lhs(omega) - (self.a + t)) / max(1.0, abs(self.a) + t)


def omega_rate(omega, C, N):
    """``omega / (N (C + omega^2)^2)``."""
    C, N = _check_dims(C, N)
    omega = _check_omega(omega)
    return omega / (N * (C + omega * omega) ** 2)


def integration_constant(omega0, C, N):
    omega0 = _check_omega(omega0, "omega0")
    k = OdeConstants.for_dims(C, N)
    return ImplicitSolution(k, omega0, k.lhs(omega0))


def omega_at(sol, t):
    """Solve the implicit relation for ``omega(t)`` by bisection."""
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise InvalidInputError(f"t must be a finite nonnegative real, got {t!r}")
    if t == 0:
        return sol.omega0
    k = sol.constants
    target = sol.a + t

    def f(w):
        return k.lhs(w) - target

    # omega is increasing in t, so omega0 is a lower bracket
    lo = sol.omega0
    hi = max(1.0, lo, (max(target, 0.0) / k.c3) ** 0.25)
    while f(hi) < 0:
        hi *= 2.0
        if not math.isfinite(hi):
            raise ArithmeticError("bracket expansion overflowed")
    for _ in range(400):
        mid = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(f(lo)) <= abs(f(hi)) else hi


def asymptote(t, C, N):
    """``(t / c3)^{1/4} = (4 t / N)^{1/4}``."""
    _check_dims(C, N)
    t = float(t)
    if not math.isfinite(t) or t <= 0:
        raise InvalidInputError(f"t must be a finite positive real, got {t!r}")
    return (4.0 * t / N) ** 0.25


def _nonzero_blocks(spec0):
    if not isinstance(spec0, SnrSpectrum):
        raise InvalidInputError("expected an SnrSpectrum")
    C = spec0.num_classes
    w = spec0.singular_values
    if spec0.left_vectors.shape[1] < C - 1 or np.count_nonzero(w > RANK_RTOL * w[0]) < C - 1:
        raise RankDeficiencyError("SNR matrix", f"fewer than C-1={C - 1} nonzero singular values")
    return spec0.nonzero_left, spec0.nonzero_right


def limit_snr(spec0):
    """``U_hat V_hat^T``: the limit of the SNR matrix normalized by its largest singular value."""
    U, V = _nonzero_blocks(spec0)
    return U @ V.T


def limit_features(spec0, N):
    """``limit_snr(spec0) kron 1_N^T`` in i-then-c column order."""
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise InvalidInputError(f"N must be a positive integer, got {N!r}")
    return np.repeat(limit_snr(spec0), int(N), axis=1)
