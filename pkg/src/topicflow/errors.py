"""Exception hierarchy shared across the pipeline.

The three branches map onto the CLI exit codes: ConfigError -> 2,
DataError -> 3, NumericalError -> 4.
"""


class TopicflowError(Exception):
    """Base class for all topicflow errors."""


class ConfigError(TopicflowError):
    """Invalid configuration: bad parameter values, missing paths, bad flags."""


class DataError(TopicflowError):
    """Invalid or inconsistent input data."""


class CorpusError(DataError):
    """Corpus-level violation (duplicate ids, schema breakage)."""


class AlignmentError(DataError):
    """Embedding manifest does not align with the corpus."""


class FormatError(DataError):
    """A binary or text artifact does not match its declared format."""


class NumericalError(TopicflowError):
    """Numerical failure: non-convergence, singularity, degenerate models."""


class ConvergenceError(NumericalError):
    """An iterative fit failed to converge or diverged."""


class SingularMatrixError(NumericalError):
    """A matrix required to be invertible is singular."""


class DegenerateModelError(NumericalError):
    """A model without enough structure for the requested operation."""
