"""Exception hierarchy shared by all modules."""


class KmsfError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(KmsfError, ValueError):
    """Malformed system description, family, sampler or CLI configuration."""


class DomainError(KmsfError, ValueError):
    """An argument lies outside the domain of the operation."""


class BudgetError(KmsfError):
    """Enumeration would exceed the configured atom/word budget."""


class NotAProperContractionError(KmsfError, ValueError):
    pass


class DegenerateSystemError(KmsfError, ValueError):
    """Two maps of the system coincide identically."""


class NotAnImageError(KmsfError, ValueError):
    pass


class BranchCompatibilityError(KmsfError, ValueError):
    """Component functions disagree at a branch value."""


class GeometryError(KmsfError, ValueError):
    """Patch radii violate the disjointness requirements."""


class UnboundedSeriesError(KmsfError, ValueError):
    """The orbit series diverges (lambda <= N)."""


class NormalizationError(KmsfError, ValueError):
    pass


class PresetIntegrityError(KmsfError):
    """A preset failed its load-time self-verification."""
