"""Exception types raised across the package."""


class NetscaleError(Exception):
    """Base class for all package errors."""


class ParseError(NetscaleError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MixingError(NetscaleError, RuntimeError):
    """The edge-swap chain could not complete the requested number of swaps."""

    def __init__(self, requested: int, succeeded: int, attempted: int):
        self.requested = requested
        self.succeeded = succeeded
        self.attempted = attempted
        super().__init__(
            f"edge-swap chain stalled: {succeeded}/{requested} swaps after "
            f"{attempted} attempts (shortfall {requested - succeeded})"
        )


class SamplerError(NetscaleError, RuntimeError):
    pass


class TrainingError(NetscaleError, RuntimeError):
    pass
