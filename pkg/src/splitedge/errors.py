"""Exception hierarchy shared across the package.

Every error raised by splitedge derives from SplitEdgeError so the CLI can
map failures to exit codes without enumerating modules.
"""


class SplitEdgeError(Exception):
    """Base class for all splitedge errors."""


class ShapeMismatchError(SplitEdgeError):
    """Tensor shape incompatible with the requested operation."""


class InvalidSplitError(SplitEdgeError):
    """Split index outside the valid candidate range for the operation."""


class NonFiniteInputError(SplitEdgeError):
    """Input contains NaN or infinite values."""


class CodecError(SplitEdgeError):
    """Base class for activation codec failures."""


class CrcMismatchError(CodecError):
    """Stored checksum does not match the payload."""


class InflateFailureError(CodecError):
    """DEFLATE stream could not be decompressed."""


class LengthMismatchError(CodecError):
    """Buffer length inconsistent with the declared size."""


class ContainerFormatError(CodecError):
    """Malformed activation container (bad magic, version, or layout)."""


class SampleCountError(SplitEdgeError):
    """Too few samples for a statistic."""


class DimensionMismatchError(SplitEdgeError):
    """Paired sample matrices disagree on the number of rows."""


class OutOfRangeError(SplitEdgeError):
    """Value outside the supported domain."""


class InvalidParameterError(SplitEdgeError):
    """Parameter value not accepted by the operation."""


class UnknownSplitError(SplitEdgeError):
    """Split index not present in the model profile."""


class ProfileError(SplitEdgeError):
    """Model profile failed validation or could not be parsed."""


class InfeasibleFitError(SplitEdgeError):
    """Calibration could not reproduce the target anchors within tolerance."""


class ProtocolError(SplitEdgeError):
    """Base class for wire protocol failures."""


class BadMagicError(ProtocolError):
    """Frame does not start with the protocol magic."""


class BadVersionError(ProtocolError):
    """Unsupported protocol version."""


class TruncatedFrameError(ProtocolError):
    """Byte buffer ends before the declared frame length."""


class TransportError(SplitEdgeError):
    """Connection-level transport failure."""
