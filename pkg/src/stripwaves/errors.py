"""Exception types shared across the toolkit.

Every configuration or numerical failure mode surfaces as one of these, so
callers (and the CLI) can map failures to distinct, documented identifiers.
"""


class StripwavesError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(StripwavesError):
    """A scenario file violates a validation rule.

    Carries ``field`` identifying the offending entry.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class EigenlineViolation(StripwavesError):
    """Weight exponent sits on (or within 1e-9 of) an eigenvalue line."""


class ResonantAngle(StripwavesError):
    """Corner-limit ODE is resonant for this (gamma, omega) pair."""


class NonConvergentTail(StripwavesError):
    """Tail of a weighted quantity does not settle to a limit.

    Signals that the quantity carries the wrong weight exponent or that the
    truncation window is too short.
    """


class TruncationPollution(StripwavesError):
    """Grid function has not decayed at the window ends |x| = L."""


class ResolutionError(StripwavesError):
    """Discrete residual of an elliptic solve exceeds tolerance."""


class CompatibilityError(StripwavesError):
    """Neumann data violate the zero-net-flux solvability condition."""


class NoConvergence(StripwavesError):
    """Fixed-point construction of the conformal map did not converge."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(residual {residual:.3e})"
        )


class AngleMismatch(StripwavesError):
    """Recovered corner angle differs from the declared contact angle."""


class AsymptoticViolation(StripwavesError):
    """|T^(l)|/alpha left the admissible band somewhere on a plateau."""


class TaylorSignViolation(StripwavesError):
    """Weighted Taylor sign dropped below the admissible floor."""


class UnderResolvedBottom(StripwavesError):
    """Third-derivative stencils near the bottom exceed the noise threshold."""


class StepRejected(StripwavesError):
    """Time step rejected; ``reason`` records the offending check."""

    def __init__(self, reason, t=None):
        self.reason = reason
        self.t = t
        where = f" at t={t:.6g}" if t is not None else ""
        super().__init__(f"step rejected{where}: {reason}")
