"""
Exception hierarchy shared by the pipeline apps.

Record and config validation uses DRF's ValidationError; everything raised
from data handling or numerical code derives from PipelineError so that the
management commands can map it to an exit code.
"""


class PipelineError(Exception):
    """Base class for data and runtime failures."""


class DataFormatError(PipelineError):
    """Malformed or inconsistent interaction input."""

    def __init__(self, message, *, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ''
        if path is not None:
            prefix = f'{path}'
            if line is not None:
                prefix += f', line {line}'
            prefix += ': '
        super().__init__(f'{prefix}{message}')


class SamplingError(PipelineError):
    """A negative could not be drawn for a user."""


class DimensionError(PipelineError, ValueError):
    """Shapes of tables, graphs or representations do not line up."""


class NumericalError(PipelineError, ArithmeticError):
    """Non-finite values appeared in activations or losses."""

    def __init__(self, message, *, index=None):
        self.index = index
        if index is not None:
            message = f'{message} (batch {index})'
        super().__init__(message)


class TrainingAborted(NumericalError):
    """
    Raised when the total loss stops being finite.
    `checkpoint` points at the last good checkpoint directory, if any.
    """

    def __init__(self, message, *, step, checkpoint=None):
        self.checkpoint = checkpoint
        where = checkpoint if checkpoint is not None else 'none written yet'
        super().__init__(f'{message}; last good checkpoint: {where}', index=step)
