"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: input problems -> 1, analysis
problems -> 2, provider problems -> 3.
"""


class PhonosemError(Exception):
    """Base class for all package errors."""


class InputError(PhonosemError):
    """Malformed or missing input data (files, configs, vocabularies)."""


class ParseError(InputError):
    """A file failed to parse; the message names the offending location."""


class AnalysisError(PhonosemError):
    """A statistical computation cannot proceed (degenerate input etc.)."""


class ProviderError(PhonosemError):
    """The segmentation provider failed after retries."""
