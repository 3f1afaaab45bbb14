"""CSV import/export.  Numbers are written with 17 significant digits so doubles round-trip."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .classifier import ExtendedClassifier
from .errors import InvalidInputError
from .model import FeatureMatrix, ProblemDims
from .snr import SnrSpectrum

TRAJECTORY_TAIL = ("L_total", "L_nc1", "L_nc23", "L_perp", "drift", "manifold_residual")
LOSS_HEADER = ("t", "total", "ls", "perp", "nc1", "nc23")
NC_HEADER = ("t", "nc1", "equinorm_cv", "angle_dev", "self_duality", "ncc_mismatch")
CLOSED_FORM_HEADER = ("t", "omega_closed_form", "asymptote", "ratio")


def fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def write_rows(path, rows, header=None):
    path = Path(path)
    with path.open("w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_rows(path, header=True):
    with Path(path).open(newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    head = rows.pop(0) if header and rows else None
    return head, [[float(v) for v in r] for r in rows if r]


def write_features(path, H):
    """First row ``P,C,N``, then one row per feature."""
    d = H.dims
    return write_rows(path, H.data, header=(d.P, d.C, d.N))


def read_features(path):
    head, rows = read_rows(path)
    try:
        P, C, N = (int(v) for v in head)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{path}: first row must be P,C,N") from exc
    data = np.array(rows, dtype=np.float64).reshape(len(rows), -1)
    return FeatureMatrix(ProblemDims(C, N, P), data)


def write_classifier(path, clf):
    """C rows of ``P + 1`` values, bias last."""
    return write_rows(path, clf.stacked)


def read_classifier(path):
    _, rows = read_rows(path, header=False)
    return ExtendedClassifier.from_stacked(np.array(rows))


def write_spectrum(path, spec):
    """Singular values, then the rows of U, then the rows of V."""
    rows = [spec.singular_values, *spec.left_vectors, *spec.right_vectors]
    return write_rows(path, rows)


def read_spectrum(path):
    _, rows = read_rows(path, header=False)
    omega = np.array(rows[0])
    C = omega.size
    U = np.array(rows[1 : len(rows) - C])
    V = np.array(rows[len(rows) - C :])
    return SnrSpectrum(U, omega, V)


def trajectory_header(C):
    return ("t", *(f"omega_{j}" for j in range(1, C)), *TRAJECTORY_TAIL)


def write_trajectory(path, traj):
    C = traj.omegas.shape[1] + 1
    return write_rows(path, traj.rows(), header=trajectory_header(C))


def write_losses(path, times, losses):
    rows = ((t, l.total, l.ls_part, l.perp_part, l.nc1_part, l.nc23_part) for t, l in zip(times, losses))
    return write_rows(path, rows, header=LOSS_HEADER)


def write_nc_reports(path, times, reports):
    return write_rows(path, (r.as_row(t) for t, r in zip(times, reports)), header=NC_HEADER)
