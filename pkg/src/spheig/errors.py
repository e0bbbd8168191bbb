"""Exception types shared by all spheig modules."""


class SpheigError(Exception):
    """Base class for all errors raised by this package."""


class EmptyDomain(SpheigError):
    """A shrink operation would leave no interior."""


class ComplementPolar(SpheigError):
    """An expand operation would cover the sphere or break the meshable range."""


class OutsideDomain(SpheigError):
    """A query point does not belong to the closed domain."""


class DegenerateWeight(SpheigError):
    """The gradient weight q = beta^2 w^2 + |w'|^2 vanished without regularization."""


class IntegratorError(SpheigError):
    """The ODE integrator failed before reaching the end of the interval."""


class BracketFailure(SpheigError):
    """No sign change was found while scanning for an exponent."""


class NegativeGap(SpheigError):
    """The inner/outer exponent bracket closed in the wrong order."""


class MeshError(SpheigError):
    """Mesh construction or validation failed (degenerate or non-conforming)."""


class EigenIterError(SpheigError):
    """Inverse iteration for the frozen-weight eigenvalue stagnated."""


class PicardError(SpheigError):
    """The frozen-coefficient fixed-point iteration did not converge."""


class MonotonicityViolation(SpheigError):
    """A sequence that must be monotone (in beta or in tau) was not."""


class ConeSolveError(SpheigError):
    """The truncated-cone nonlinear solve diverged."""


class FitError(SpheigError):
    """A least-squares fit had no valid window (e.g. nonpositive samples)."""


class RangeError(SpheigError, ValueError):
    """A scalar parameter fell outside its admissible interval."""


class PositivityError(SpheigError):
    """A field that must be positive on interior nodes was not."""


class ContractionFailure(SpheigError):
    """Per-shell oscillation failed to contract as required."""


class NondegeneracyFailure(SpheigError):
    """The boundary gradient band left its admissible range."""


class ConfigError(SpheigError):
    """Invalid run configuration (CLI or programmatic)."""
