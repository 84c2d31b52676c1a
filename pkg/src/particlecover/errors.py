"""Exception types shared across the package."""


class ParticleCoverError(Exception):
    """Base class for all package errors."""


class RayHorizonError(ParticleCoverError):
    """A camera corner ray does not point below the horizon, so it never
    intersects the ground plane (tilt too large for the field of view)."""


class DegenerateAreaError(ParticleCoverError):
    """Polygon area is too small to sample points from."""


class SolverFailure(ParticleCoverError):
    """The trajectory solver could not produce a usable control."""


class NonFiniteObjective(ParticleCoverError):
    """Objective evaluated to NaN or infinity at a probe point."""


class ParseError(ParticleCoverError):
    """Scenario file could not be read or parsed."""


class ValidationError(ParticleCoverError):
    """Scenario content violates a constraint; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class IoError(ParticleCoverError):
    """Failed to write a mission output file."""
