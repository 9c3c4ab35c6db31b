"""Client side of the wire protocol: a remote oracle with retries."""
from __future__ import annotations

import logging
import socket

import numpy as np

from ..errors import OracleError, ProtocolError
from .framing import recv_frame, send_frame
from .oracle import ForecastQuery, ForecastResponse
from .server import HELLO

log = logging.getLogger(__name__)

ERROR_CODES = ("BAD_WINDOW_LEN", "BAD_TIMESTAMPS", "MALFORMED")


def _iso_minutes(minutes: np.ndarray) -> list[str]:
    stamps = np.asarray(minutes, dtype="datetime64[m]")
    return list(np.datetime_as_string(stamps, unit="m"))


class RemoteOracle:
    """Oracle bound to a server over TCP; reconnects up to ``retries`` times."""

    def __init__(self, host: str, port: int, timeout: float = 10.0, retries: int = 3):
        self.host = host
        self.port = port
        self.timeout = timeout
        self.retries = retries
        self._sock: socket.socket | None = None
        self.w = 0
        self.interval_minutes = 0
        self._connect()

    def _connect(self) -> None:
        last_exc: Exception | None = None
        for attempt in range(self.retries):
            try:
                sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
                send_frame(sock, HELLO)
                hello = recv_frame(sock)
                if not isinstance(hello, dict) or "w" not in hello:
                    sock.close()
                    raise OracleError(f"bad handshake from {self.host}:{self.port}: {hello!r}")
                self._sock = sock
                self.w = int(hello["w"])
                self.interval_minutes = int(hello["interval_minutes"])
                return
            except (ConnectionError, OSError, ProtocolError) as exc:
                last_exc = exc
                log.warning("connect attempt %d/%d to %s:%d failed: %s",
                            attempt + 1, self.retries, self.host, self.port, exc)
        raise OracleError(
            f"cannot reach oracle at {self.host}:{self.port} after {self.retries} attempts"
        ) from last_exc

    def query(self, q: ForecastQuery) -> ForecastResponse:
        frame = {
            "id": int(q.request_id),
            "window": [float(v) for v in q.window],
            "timestamps": _iso_minutes(q.times_minutes),
        }
        last_exc: Exception | None = None
        for attempt in range(self.retries):
            try:
                send_frame(self._sock, frame)
                reply = recv_frame(self._sock)
                break
            except (ConnectionError, OSError, socket.timeout) as exc:
                last_exc = exc
                log.warning("query attempt %d/%d failed: %s", attempt + 1, self.retries, exc)
                self._connect()
        else:
            raise OracleError(f"query {q.request_id} failed after "
                              f"{self.retries} attempts") from last_exc
        if reply is None:
            raise OracleError("server closed the connection")
        if not isinstance(reply, dict):
            raise OracleError(f"malformed response: {reply!r}")
        if "error" in reply:
            raise ProtocolError(str(reply["error"]), f"request {reply.get('id')}")
        if reply.get("id") != q.request_id or "prediction" not in reply:
            raise OracleError(f"malformed response: {reply!r}")
        prediction = float(reply["prediction"])
        if not np.isfinite(prediction):
            raise OracleError(f"non-finite prediction for request {q.request_id}")
        return ForecastResponse(int(reply["id"]), prediction)

    def query_batch(self, queries: list[ForecastQuery]) -> list[ForecastResponse]:
        return [self.query(q) for q in queries]

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def __enter__(self) -> "RemoteOracle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
