"""Exception types raised across the package."""


class BNError(Exception):
    """Base class for all package errors."""


class GraphError(BNError, ValueError):
    """Malformed or cyclic graph input."""


class DataError(BNError, ValueError):
    """Problems with datasets, configuration or file input."""


class ScoreError(BNError, ArithmeticError):
    """Numerical failure while scoring (degenerate data, singular matrices)."""


class HardLimitError(BNError, ValueError):
    """A node has more candidate parents than the hard limit allows."""

    def __init__(self, node, size, limit, label=None):
        self.node = node
        self.size = size
        self.limit = limit
        name = label if label is not None else node
        super().__init__(
            f"node {name!r} has {size} candidate parents, above hardlimit {limit}"
        )
