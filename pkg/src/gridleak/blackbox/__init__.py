"""Black-box query boundary: local binding, wire server, and client."""
from .client import RemoteOracle
from .framing import recv_frame, send_frame
from .oracle import (ForecastQuery, ForecastResponse, LocalOracle,
                     OracleStats, validate_query)
from .server import ForecastServer, serve

__all__ = [
    "ForecastQuery", "ForecastResponse", "OracleStats",
    "LocalOracle", "RemoteOracle", "ForecastServer", "serve",
    "validate_query", "send_frame", "recv_frame",
]
