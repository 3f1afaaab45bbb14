"""Exception hierarchy shared by every module."""


class CollapseError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(CollapseError, ValueError):
    """Input has the wrong shape, non-finite entries or out-of-range values."""


class PreconditionError(CollapseError, ValueError):
    """A mathematical precondition of an operation does not hold."""


class RankDeficiencyError(CollapseError, ValueError):
    """A linear system that must be solved is singular to working tolerance.

    ``matrix`` names the offending matrix so the caller can tell which
    statistic collapsed.
    """

    def __init__(self, matrix, detail=""):
        self.matrix = matrix
        msg = f"{matrix} is rank deficient"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


class NearSingularError(CollapseError, ValueError):
    """A symmetric matrix has an eigenvalue below the relative floor."""

    def __init__(self, eigenvalue, threshold):
        self.eigenvalue = eigenvalue
        self.threshold = threshold
        super().__init__(
            f"smallest eigenvalue {eigenvalue:.6e} is below the floor {threshold:.6e}"
        )


class DegenerateGeometryError(CollapseError, ValueError):
    """Class means are degenerate (e.g. a centered mean of zero norm)."""


class FlowError(CollapseError, RuntimeError):
    """A flow step failed; ``time`` is the flow time of the failing step."""

    def __init__(self, time, cause):
        self.time = time
        self.cause = cause
        super().__init__(f"flow step failed at t={time:.6g}: {cause}")
