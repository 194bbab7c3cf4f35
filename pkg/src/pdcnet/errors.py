"""Exception hierarchy shared across the package."""


class PdcError(Exception):
    """Base class for all package errors."""


class DimensionError(PdcError, ValueError):
    """Tensor shapes do not fit the operation."""


class ConfigError(PdcError, ValueError):
    """Invalid module or run configuration."""


class DataError(PdcError, ValueError):
    """Malformed dataset content (labels, manifests, masks)."""


class MissingFileError(DataError):
    pass


class FormatError(PdcError, ValueError):
    """Tensor or checkpoint file cannot be decoded."""


class BadMagicError(FormatError):
    pass


class UnknownDtypeError(FormatError):
    pass


class LengthMismatchError(FormatError):
    pass


class VersionError(FormatError):
    pass


class DuplicateNameError(FormatError):
    pass


class NumericalError(PdcError, ArithmeticError):
    """Non-finite values met during training or a failed numerical check."""


class NonDeterministicError(PdcError, RuntimeError):
    pass


class GenerationError(PdcError, RuntimeError):
    pass
