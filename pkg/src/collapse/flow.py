"""Continually renormalized gradient flow on the normalized-features manifold.

Two integrators are provided, both explicit Euler in flow time:

``discrete_renorm``
    gradient step on the central-path loss, then renormalize so the
    within-class covariance is the identity again; Omega is re-diagonalized
    every ``realign_every`` steps.
``analytic_rows``
    each row ``x_j`` moves along its tangent velocity ``(a_j / N) y_j`` with
    ``a_j = omega_j / (C + omega_j^2)^2``.  No retraction is needed because
    this velocity leaves ``X C X^T`` unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive
from .decomposition import decompose_centered
from .errors import (
    CollapseError,
    FlowError,
    InvalidInputError,
    NearSingularError,
    PreconditionError,
)
from .snr import (
    INV_SQRT_FLOOR,
    MANIFOLD_ATOL,
    AlignedState,
    max_principal_angle,
    realign,
    renormalize,
    snr_matrix,
    snr_svd,
    tangent_project,
)

METHODS = ("discrete_renorm", "analytic_rows")
#: per-step omega increments must stay below this fraction of omega
STEP_GUARD = 0.1


@dataclass(frozen=True)
class FlowConfig:
    """Integrator settings.  ``realign_every=None`` picks 100 for
    ``discrete_renorm`` and 0 (never) for ``analytic_rows``."""

    step_size: float
    horizon: float
    record_every: int = 1
    realign_every: int | None = None
    method: str = "discrete_renorm"

    def __post_init__(self):
        object.__setattr__(self, "step_size", check_positive(self.step_size, "step_size"))
        horizon = float(self.horizon)
        if not math.isfinite(horizon) or horizon < 0:
            raise InvalidInputError(f"horizon must be finite and >= 0, got {self.horizon!r}")
        object.__setattr__(self, "horizon", horizon)
        if self.method not in METHODS:
            raise InvalidInputError(f"method must be one of {METHODS}, got {self.method!r}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise InvalidInputError("record_every must be a positive integer")
        object.__setattr__(self, "record_every", int(self.record_every))
        re = self.realign_every
        if re is None:
            re = 100 if self.method == "discrete_renorm" else 0
        if int(re) != re or re < 0:
            raise InvalidInputError("realign_every must be a nonnegative integer")
        object.__setattr__(self, "realign_every", int(re))

    @property
    def num_steps(self):
        # tolerate T/eta landing a hair above an integer through roundoff
        return max(0, math.ceil(self.horizon / self.step_size - 1e-9))

    def check_step_size(self, dims):
        """Reject step sizes whose largest possible omega increment exceeds 10%."""
        worst = self.step_size / (dims.N * dims.C**2)
        if worst > STEP_GUARD:
            raise InvalidInputError(
                f"step_size {self.step_size:g} too large: per-step relative omega change "
                f"can reach {worst:.3g} > {STEP_GUARD} (need step_size <= "
                f"{STEP_GUARD * dims.N * dims.C**2:g})"
            )


@dataclass(frozen=True)
class FlowTrajectory:
    times: np.ndarray
    states: list = field(repr=False)
    omegas: np.ndarray = field(repr=False)
    losses: list = field(repr=False)
    drift: np.ndarray = field(repr=False)
    manifold_residuals: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.times)

    def final(self):
        return self.states[-1]

    def rows(self):
        """Rows of the trajectory CSV (see :func:`collapse.io.write_trajectory`)."""
        for t, w, loss, dr, mr in zip(
            self.times, self.omegas, self.losses, self.drift, self.manifold_residuals
        ):
            yield (t, *w, loss.total, loss.nc1_part, loss.nc23_part, loss.perp_part, dr, mr)


def _rate_coefficients(omegas, C):
    return omegas / (C + omegas * omegas) ** 2


def _diag_omegas(X, dims):
    """``diag(X Y^T / N)[:C-1]`` straight from the class blocks."""
    C = dims.C
    blocks = X.reshape(C, C, dims.N)
    idx = np.arange(C - 1)
    return blocks[idx, idx, :].mean(axis=1)


def _gradient_array(X, dims):
    C, N = dims.C, dims.N
    a = _rate_coefficients(_diag_omegas(X, dims), C)
    G = np.zeros((C, C, N))
    idx = np.arange(C - 1)
    G[idx, idx, :] = -(a / N)[:, None]
    return G.reshape(C, dims.num_examples)


def _renormalized_step(X, dt, dims, idx):
    """Unchecked ``renormalize(X - dt * gradient)`` for the simulation loop."""
    C, N = dims.C, dims.N
    blocks = X.reshape(C, C, N)
    a = _rate_coefficients(blocks[idx, idx, :].mean(axis=1), C)
    Z = X.copy()
    Z.reshape(C, C, N)[idx, idx, :] += (dt * a / N)[:, None]
    zb = Z.reshape(C, C, N)
    dev = (zb - zb.mean(axis=2, keepdims=True)).reshape(C, -1)
    S = dev @ dev.T / dims.num_examples
    w, Q = np.linalg.eigh(0.5 * (S + S.T))
    if w[0] <= INV_SQRT_FLOOR * w[-1]:
        raise NearSingularError(float(w[0]), float(INV_SQRT_FLOOR * w[-1]))
    return ((Q / np.sqrt(w)) @ Q.T) @ Z


def ambient_gradient(X):
    """``-(1/N) sum_j omega_j / (C + omega_j^2)^2 e_j y_j^T`` for an aligned state.

    Row ``C`` (the zero singular value) is identically zero.
    """
    if not isinstance(X, AlignedState):
        raise InvalidInputError("ambient_gradient expects an AlignedState")
    if not X.is_aligned():
        raise PreconditionError(
            f"state is not aligned (off-diagonal mass {X.off_diagonal_mass():.3e}); realign first"
        )
    return _gradient_array(X.X, X.dims)


def _require_on_manifold(state):
    res = state.manifold_residual()
    if res > MANIFOLD_ATOL:
        raise PreconditionError(f"state is off the manifold (residual {res:.3e})")


def discrete_step(X, eta):
    """Gradient step of size ``eta`` followed by renormalization."""
    eta = float(eta)
    if not math.isfinite(eta) or eta < 0:
        raise InvalidInputError(f"eta must be a finite nonnegative real, got {eta!r}")
    _require_on_manifold(X)
    Z = X.X - eta * ambient_gradient(X)
    return X.replace_X(renormalize(Z, X.dims))


def projected_step(X, eta):
    """Step along the tangent-projected negative gradient, then renormalize."""
    eta = float(eta)
    if not math.isfinite(eta) or eta < 0:
        raise InvalidInputError(f"eta must be a finite nonnegative real, got {eta!r}")
    _require_on_manifold(X)
    T = tangent_project(X, -eta * ambient_gradient(X))
    return X.replace_X(renormalize(X.X + T, X.dims))


def _nonzero_spans(state):
    spec = snr_svd(snr_matrix(state.features()))
    return spec.nonzero_left, spec.nonzero_right


def _snapshot(state, ref):
    U, V = _nonzero_spans(state)
    drift = max(max_principal_angle(U, ref[0]), max_principal_angle(V, ref[1]))
    return (
        state.omegas,
        decompose_centered(state.features()),
        drift,
        state.manifold_residual(),
    )


def simulate(X0, cfg):
    """Integrate the flow from ``X0`` up to ``cfg.horizon``.

    Takes ``ceil(T / eta)`` steps, the last one shortened to land on ``T``.
    Snapshots are kept at t=0, every ``record_every`` steps and at ``T``.
    """
    if not isinstance(X0, AlignedState):
        raise InvalidInputError("simulate expects an AlignedState")
    if not isinstance(cfg, FlowConfig):
        raise InvalidInputError("cfg must be a FlowConfig")
    dims = X0.dims
    cfg.check_step_size(dims)
    _require_on_manifold(X0)
    if not X0.is_aligned():
        raise PreconditionError("initial state must be aligned")

    ref = _nonzero_spans(X0)
    times, states, records = [0.0], [X0], [_snapshot(X0, ref)]

    C, N = dims.C, dims.N
    idx = np.arange(C - 1)
    eta, T = cfg.step_size, cfg.horizon
    n = cfg.num_steps
    X = np.array(X0.X)
    right, rotation = X0.right, X0.rotation
    t = 0.0
    for k in range(1, n + 1):
        t_next = T if k == n else k * eta
        dt = t_next - t
        try:
            if cfg.method == "analytic_rows":
                blocks = X.reshape(C, C, N)
                a = _rate_coefficients(blocks[idx, idx, :].mean(axis=1), C)
                blocks[idx, idx, :] += (dt * a / N)[:, None]
            else:
                X = _renormalized_step(X, dt, dims, idx)
                if cfg.realign_every and k % cfg.realign_every == 0:
                    st = realign(AlignedState(dims, X, right, rotation, X0.basis))
                    X, right, rotation = np.array(st.X), st.right, st.rotation
        except CollapseError as exc:
            raise FlowError(t_next, exc) from exc
        except np.linalg.LinAlgError as exc:
            raise FlowError(t_next, exc) from exc
        t = t_next
        if k % cfg.record_every == 0 or k == n:
            state = AlignedState(dims, X, right, rotation, X0.basis)
            times.append(t)
            states.append(state)
            records.append(_snapshot(state, ref))

    omegas, losses, drift, resid = zip(*records)
    return FlowTrajectory(
        times=np.array(times),
        states=states,
        omegas=np.array(omegas),
        losses=list(losses),
        drift=np.array(drift),
        manifold_residuals=np.array(resid),
    )


def singular_vector_drift(traj):
    """Largest principal angle between the initial and any later nonzero SNR spans."""
    if len(traj) < 2:
        return 0.0
    return float(np.max(traj.drift))

