"""Exception types shared across the toolkit.

Every failure mode that callers are expected to branch on gets its own
class; generic ValueError/TypeError stay reserved for programming errors.
"""


class CubeShadowError(Exception):
    """Base class for all toolkit errors."""


class InvalidMapError(CubeShadowError):
    """Map descriptor or parameters violate the map family's contract."""


class NotInvertibleError(CubeShadowError):
    """An inverse-direction evaluation was requested from a non-invertible map."""


class NotEndomorphismError(CubeShadowError):
    """The map's image provably leaves the space it was asked to act on."""


class ResourceLimitError(CubeShadowError):
    """A requested object (e.g. a subdivision) exceeds the configured budget."""


class UncertainEdgesError(CubeShadowError):
    """A strict operation met transition edges that are neither certified
    nonempty nor certified empty."""


class NoPathError(CubeShadowError):
    """Graph search exhausted the length budget without reaching the target."""


class DeltaTooLargeError(CubeShadowError):
    """The pseudo-orbit's step bound is not below the graph's separation bound,
    so consecutive cubes are not guaranteed to be graph edges."""


class BrokenChainError(CubeShadowError):
    """Internal consistency failure: an itinerary step landed on an edge the
    graph certifies as empty."""


class UncertifiedTransitionError(CubeShadowError):
    """An itinerary traverses a cube pair the chained certificate excludes
    (boundary-touching intersection with no interior witness)."""


class NoSurvivingCellError(CubeShadowError):
    """Bisection pruned every candidate cell before reaching the target depth."""

    def __init__(self, message, deepest_surviving_depth=None):
        super().__init__(message)
        self.deepest_surviving_depth = deepest_surviving_depth


class FixedPointTolUnreachedError(CubeShadowError):
    """The periodic-point search could not reach the requested tolerance."""


class MismatchedChainError(CubeShadowError):
    """Consecutive covering certificates do not share their middle rectangle."""


class NotHyperbolicError(CubeShadowError):
    """The map's linear part has no expanding/contracting eigen splitting."""
