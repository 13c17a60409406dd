"""Exception types shared across the package.

Construction-time invariant violations on domain types raise plain
ValueError; the classes below cover failures of operations on otherwise
valid inputs, so callers (and the CLI exit-code mapping) can tell data
problems from numeric ones.
"""


class SsgError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatch(SsgError):
    """Operand shapes are incompatible with the declared layer or op."""


class TapeMismatch(SsgError):
    """A backward pass was fed a tape or upstream gradient it cannot use."""


class EmptyScene(SsgError):
    """A scene without participants cannot be turned into a graph."""


class EmptyGraph(SsgError):
    """A graph without nodes cannot be encoded."""


class BatchTooSmall(SsgError):
    """Triplet construction needs at least two scenes per batch."""


class TooFewSamples(SsgError):
    """Not enough samples for the requested analysis."""


class DegenerateData(SsgError):
    """Input carries no usable variance."""


class BadK(SsgError):
    """Requested cluster count outside the feasible range."""


class SingleCluster(SsgError):
    """Silhouette needs at least two distinct clusters."""


class DataFormatError(SsgError):
    """An external file or artifact violates its documented format."""


class ConfigMismatch(DataFormatError):
    """An upstream artifact was produced under a different configuration."""


class NumericFailure(SsgError):
    """A computation produced non-finite values."""
