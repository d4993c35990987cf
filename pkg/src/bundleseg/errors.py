"""Exception hierarchy shared by every bundleseg module."""


class BundleSegError(Exception):
    """Base class for all bundleseg errors."""


class DataError(BundleSegError, ValueError):
    """Input data violates a documented invariant."""


# core / metrics
class InvalidStreamline(DataError):
    pass


class VoxelOutOfMask(DataError):
    pass


class EmptyRoi(DataError):
    pass


class InvalidBundle(DataError):
    pass


class EmptyTractogram(DataError):
    pass


# lap
class NonFiniteCost(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class ShapeError(DataError):
    pass


class TooLargeForOracle(DataError):
    pass


# eval
class GridMismatch(DataError):
    pass


class BothEmpty(DataError):
    pass


# synth
class InvalidSpec(DataError):
    pass


# io
class FormatError(DataError):
    """A file could not be decoded."""


class BadMagic(FormatError):
    pass


class BadVersion(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class CorruptCount(FormatError):
    pass


class ParseError(FormatError):
    pass


class VoxelOutOfShape(FormatError):
    pass


class DuplicateId(FormatError):
    pass
