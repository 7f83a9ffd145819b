"""Exception hierarchy shared by every stage of the pipeline."""


class KineclusterError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ValidationError(KineclusterError, ValueError):
    """Bad input: malformed parameters, configs or files."""

    exit_code = 2


class PatternError(ValidationError):
    """A heterogeneity pattern could not be built (e.g. unreadable raster)."""


class InvertedStateError(KineclusterError, ValueError):
    """A deformation gradient with non-positive determinant was evaluated."""

    exit_code = 3


class SolverError(KineclusterError, RuntimeError):
    """The nonlinear forward solve failed.

    ``diagnostics`` carries whatever the solver knew when it gave up.
    """

    exit_code = 3

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ClusteringError(KineclusterError, RuntimeError):
    """A clustering or consensus stage failed."""

    exit_code = 4

    def __init__(self, message, stage=None, diagnostics=None):
        super().__init__(message if stage is None else f"[{stage}] {message}")
        self.stage = stage
        self.diagnostics = dict(diagnostics or {})


class ConvergenceError(ClusteringError):
    """An iterative optimizer hit its iteration cap."""


class DataIOError(KineclusterError, OSError):
    """Reading or writing an artifact file failed."""

    exit_code = 5
