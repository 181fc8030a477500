"""Exception and warning types shared across the package.

Every error carries a CLI exit code so the command-line front end can map
failures without a lookup table.
"""


class ScrewGraspError(Exception):
    exit_code = 5


class ParseError(ScrewGraspError):
    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyCloud(ParseError):
    pass


class GeometryError(ScrewGraspError):
    exit_code = 3


class IdentityDisplacement(GeometryError):
    """Two poses coincide, so no unique screw connects them."""


class DegenerateGeometry(GeometryError):
    pass


class AxisNotOnBody(GeometryError):
    pass


class BadEdgeSelector(GeometryError):
    pass


class ZeroMagnitude(GeometryError):
    pass


class DimensionMismatch(ScrewGraspError):
    pass


class NumericalBreakdown(ScrewGraspError):
    pass


class ModelUnbounded(ScrewGraspError):
    """The metric LP has no finite optimum, which means the model is wrong."""


class EmptyInput(ScrewGraspError):
    pass


class TooManySegments(ScrewGraspError):
    pass


class NoFeasiblePair(ScrewGraspError):
    exit_code = 4


class InfeasibleSegment(ScrewGraspError):
    exit_code = 4


class DegenerateNeighborhood(UserWarning):
    """A normal-estimation neighborhood had rank < 2; a fallback normal was used."""


class EmptyRegion(UserWarning):
    """No point of a segment reaches the metric threshold."""
