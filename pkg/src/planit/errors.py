"""Exception and warning types shared across the package."""


class PlanitError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateFrame(PlanitError):
    """Waypoint coincides with a local-frame origin; no direction is defined."""


class InvalidHeights(PlanitError):
    """Object height must satisfy 0 < h_obj < h_max."""


class DomainError(PlanitError):
    """Input outside a distribution's support."""


class MomentMismatch(PlanitError):
    """No Beta distribution has the requested mean/variance pair."""


class ZeroVariance(PlanitError):
    """Weighted sample variance too small to fit a spread parameter."""


class ModelMismatch(PlanitError):
    """Model and activity instance disagree on type or proximity class."""


class NoActivities(PlanitError):
    """Environment has no activity with a registered model."""


class UnknownAttribute(PlanitError):
    """No attribute-pair model registered for the requested pair."""


class AllZeroDensity(PlanitError):
    """Every mixture component underflowed, even in log space."""


class EmptyTrainingSet(PlanitError):
    """Training requires at least one sampled waypoint."""


class ResolutionTooCoarse(PlanitError):
    """Grid resolution leaves fewer than 10 cells along an environment side."""


class NoPathFound(PlanitError):
    """Planner exhausted its sample budget without reaching the goal."""


class NoComparablePairs(PlanitError):
    """Ranking metric needs at least two trajectories with distinct scores."""


class SchemaError(PlanitError):
    """A data file failed schema validation."""

    def __init__(self, path, detail):
        self.path = str(path)
        self.detail = detail
        super().__init__(f"{path}: {detail}")


class DanglingReference(PlanitError):
    """A record references an id that was never ingested."""


class DegenerateFitWarning(UserWarning):
    """Weighted estimator fell back to an uninformative parameterization."""


class DiversityUnmet(UserWarning):
    """Fewer distinct trajectories found than requested."""
