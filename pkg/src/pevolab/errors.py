"""Exception types shared across the laboratory."""


class PevolabError(Exception):
    """Base class for all package errors."""


class DomainError(PevolabError, ValueError):
    """An argument left the admissible domain (e.g. tau > t or t > T)."""


class OrderError(PevolabError, ValueError):
    """A derivative of higher order than declared was requested."""


class ResolutionError(PevolabError, ValueError):
    """The grid cannot resolve the requested feature."""


class GuardBandError(PevolabError, ValueError):
    """A packet frequency sits too close to the maximal resolved frequency."""


class AliasingError(PevolabError, RuntimeError):
    """Spectral mass detected in the top of the frequency range."""


class SeedNotFound(PevolabError, RuntimeError):
    """No (y, delta) witness was found within the search bounds.

    Expected outcome for coefficient families whose trajectory integrals
    stay logarithmically bounded.
    """


class SeedInvalidError(PevolabError, ValueError):
    """A supplied (y, delta) seed fails its defining inequality."""


class DegenerateSeedError(PevolabError, ValueError):
    """Seed extraction produced a non-positive radius."""


class MisuseError(PevolabError, ValueError):
    """An operation was called outside its contract (e.g. x-dependent
    coefficients passed to the constant-coefficient oracle)."""


class WrapAroundError(PevolabError, RuntimeError):
    """Mass reached the periodic boundary beyond the configured threshold."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class InstabilityError(PevolabError, RuntimeError):
    """Norm growth exceeded the physically admissible rate (under-resolution)."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ConfigError(PevolabError, ValueError):
    """A run configuration failed to parse or validate."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
