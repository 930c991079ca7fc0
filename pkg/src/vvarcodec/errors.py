"""Exception hierarchy for the codec."""


class VVarError(Exception):
    """Base class for all codec errors."""


class PGMError(VVarError, ValueError):
    pass


class PGMHeaderError(PGMError):
    pass


class UnsupportedMaxvalError(PGMError):
    pass


class PGMTruncatedError(PGMError):
    pass


class DimensionError(VVarError, ValueError):
    """Image dimensions do not fit the requested operation."""


class InvalidTupleError(VVarError, ValueError):
    """A V-tuple violates V_k <= min(4^k, 4 V_{k-1}) or is not made of powers of two."""


class CodeFormatError(VVarError, ValueError):
    """Base class for .vvar parse and validation failures."""


class BadMagicError(CodeFormatError):
    pass


class UnsupportedVersionError(CodeFormatError):
    pass


class TruncatedCodeError(CodeFormatError):
    pass


class TypeIdRangeError(CodeFormatError):
    pass
