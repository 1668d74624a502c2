"""Exception types raised by the solvers.

Validation problems (bad shapes, bad parameters) raise ``ValueError``
subclasses; failures that only show up once the numbers are crunched
derive from :class:`NumericalError` so the CLI can map them to exit code 3.
"""


class NumericalError(RuntimeError):
    """Base class for failures of the numerical machinery."""


class DegenerateInputError(NumericalError):
    """Input carries no usable information (e.g. flat image, zero system)."""


class EmptyKernelError(NumericalError):
    """A kernel became identically zero after projection or normalization."""


class SingularSystemError(NumericalError):
    """A per-frequency 4x4 block could not be inverted."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index
