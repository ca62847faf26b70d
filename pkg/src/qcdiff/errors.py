"""Exception hierarchy shared across the engine.

Every error a caller is expected to catch derives from :class:`QcdiffError`,
so the CLI can map exception classes onto process exit codes.
"""


class QcdiffError(Exception):
    """Base class for all errors raised by qcdiff."""


class DimensionError(QcdiffError):
    """Tensor shapes are incompatible for the requested operation."""


class ContractError(QcdiffError):
    """An API precondition was violated (bad argument, bad state)."""


class DataFormatError(QcdiffError):
    """An input file is malformed (bad magic, truncation, wrong dtype...)."""


class CheckpointError(QcdiffError):
    """A checkpoint file failed to parse or round-trip."""


class NumericalDegeneracyError(QcdiffError):
    """A numerical routine left its validity envelope (e.g. indefinite covariance)."""
