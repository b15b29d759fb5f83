"""Exception hierarchy shared by every module of the package."""


class NilmTransferError(Exception):
    """Base class for all errors raised by nilmtransfer."""


class DataError(NilmTransferError):
    """Input data could not be read or is unusable."""


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OrderingError(DataError):
    pass


class DomainError(NilmTransferError, ValueError):
    """A value lies outside the domain an operation is defined on."""


class AlignmentError(NilmTransferError, ValueError):
    pass


class EmptyOverlapError(AlignmentError):
    pass


class EmptyInputError(NilmTransferError, ValueError):
    pass


class DegenerateError(DomainError):
    """A normalising denominator is zero (e.g. all-zero ground truth)."""


class ValidationError(NilmTransferError):
    """An experiment configuration violates its invariants."""


class ConfigurationError(ValidationError):
    pass


class StateError(NilmTransferError):
    pass


class CapacityError(NilmTransferError):
    pass
