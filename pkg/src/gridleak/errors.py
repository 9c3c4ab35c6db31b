"""Exception types shared across the package."""


class GridleakError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(GridleakError, ValueError):
    """Tensor or input dimensions are inconsistent."""


class ContractError(GridleakError, ValueError):
    """An operation was called outside its contract (e.g. non-scalar loss)."""


class ConfigError(GridleakError, ValueError):
    """Invalid configuration or refused input (CLI exit code 2)."""


class DivergenceError(GridleakError, RuntimeError):
    """Training produced non-finite values."""


class IngestError(GridleakError, ValueError):
    """A CSV input file was rejected."""


class ContainerError(GridleakError, ValueError):
    """A weight container file is malformed."""


class ProtocolError(GridleakError, RuntimeError):
    """The black-box wire protocol returned an error frame.

    ``code`` is one of BAD_WINDOW_LEN, BAD_TIMESTAMPS, MALFORMED.
    """

    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code


class OracleError(GridleakError, RuntimeError):
    """A black-box oracle could not be queried (after retries)."""


class StageError(GridleakError, RuntimeError):
    """An experiment pipeline stage failed (CLI exit code 3)."""
