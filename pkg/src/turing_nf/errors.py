"""Exception hierarchy shared by all modules."""


class TuringNFError(Exception):
    """Base class for all errors raised by the package."""


class UnknownModel(TuringNFError):
    pass


class BadParameter(TuringNFError):
    pass


class NonFiniteInput(TuringNFError):
    pass


class ShapeError(TuringNFError):
    pass


class TruncationError(TuringNFError):
    pass


class NoConvergence(TuringNFError):
    pass


class EigenError(TuringNFError):
    pass


class BracketError(TuringNFError):
    pass


class CollapsedToHomogeneous(TuringNFError):
    pass


class PreconditionError(TuringNFError):
    pass


class DegenerateKernel(TuringNFError):
    pass


class BranchJump(TuringNFError):
    pass


class PoorFit(TuringNFError):
    pass


class FredholmError(TuringNFError):
    pass


class AlignmentError(TuringNFError):
    pass


class CorrectorError(TuringNFError):
    pass


class OutOfRegime(TuringNFError):
    pass


class ConstraintViolation(TuringNFError):
    pass


class IllConditioned(TuringNFError):
    pass


class ExpFailure(TuringNFError):
    pass


class GridError(TuringNFError):
    pass


class BlowUp(TuringNFError):
    pass


class NonFinite(TuringNFError):
    pass


class WindowError(TuringNFError):
    pass


class Indeterminate(TuringNFError):
    pass


class ConfigError(TuringNFError):
    """Invalid experiment configuration; ``line`` points into the JSON file when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
