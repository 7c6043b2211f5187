"""Exception hierarchy shared across the package."""


class LavatarError(Exception):
    """Base class for all package-specific errors."""


class DegenerateSceneError(LavatarError):
    """Raised when a bake cannot produce a usable mesh (too many missed rays)."""


class BakeError(LavatarError):
    """Raised when map baking hits a non-finite generator output."""


class CodecError(LavatarError):
    """Base class for asset-container and packet codec failures."""

    chunk: str | None = None


class BadMagicError(CodecError):
    """File does not start with the container magic."""


class VersionError(CodecError):
    """Container version is not supported."""


class ChunkTableError(CodecError):
    """Chunk table is malformed: out of bounds, overlapping or missing chunks."""

    def __init__(self, message, chunk=None):
        super().__init__(message)
        self.chunk = chunk


class TruncatedChunkError(CodecError):
    """A chunk payload is shorter than its declared contents."""

    def __init__(self, message, chunk=None):
        super().__init__(message)
        self.chunk = chunk


class DimensionError(CodecError):
    """Chunk contents disagree with the dimensions declared in META."""

    def __init__(self, message, chunk=None):
        super().__init__(message)
        self.chunk = chunk


class PacketError(CodecError):
    """Frame packet is truncated or inconsistent."""


class ProtocolError(LavatarError):
    """Session-level streaming failure."""

    def __init__(self, message, code=0):
        super().__init__(message)
        self.code = code
