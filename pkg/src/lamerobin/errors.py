"""Exception and warning types raised across the package."""


class LameRobinError(Exception):
    """Base class for all package errors."""


class LatticePointError(LameRobinError, ValueError):
    """Evaluation point lies on (or too close to) the lattice qZ^n."""


class ToleranceError(LameRobinError):
    """A requested accuracy cannot be certified."""


class GeometryError(LameRobinError, ValueError):
    """Curve is not simple, closed, or not strictly inside the cell."""


class StandoffError(LameRobinError, ValueError):
    """Off-boundary evaluation point is closer to the boundary than the standoff."""


class SingularSystemError(LameRobinError, ArithmeticError):
    """Augmented boundary-integral system is numerically singular."""


class FamilyError(LameRobinError, ValueError):
    """Robin family fails one of the admissibility hypotheses."""


class ConfigError(LameRobinError, ValueError):
    """Configuration document is invalid.

    ``violations`` holds one ``(path, message)`` pair per problem found.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [f"{path}: {msg}" for path, msg in self.violations]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


class RadiusWarning(UserWarning):
    """Series evaluated at or beyond the estimated convergence radius."""
