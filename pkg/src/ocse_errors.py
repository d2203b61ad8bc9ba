"""
Exception hierarchy shared by every module of the causal inference toolkit.
"""


class OcseError(Exception):
    """Base class for all errors raised by the toolkit."""


class InvalidParameterError(OcseError, ValueError):
    """An argument, index set, tree spec or input file is malformed."""


class UnstableNetworkError(OcseError):
    """The adjacency matrix has spectral radius >= 1."""


class NilpotentNetworkError(OcseError):
    """A random network kept coming out nilpotent and cannot be rescaled."""


class ConvergenceError(OcseError):
    """An iterative solver ran out of iterations or missed its residual bound."""


class DegeneracyError(OcseError):
    """A covariance is singular or not positive definite beyond repair."""


class SearchLimitError(OcseError):
    """An exhaustive search hit its cardinality bound without an answer."""
