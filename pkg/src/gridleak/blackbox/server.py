"""TCP server exposing a forecaster behind the wire protocol.

Handshake: the client sends the JSON string "HELLO"; the server replies
{"w": ..., "interval_minutes": ...}. Queries are {"id", "window",
"timestamps"} frames (timestamps as ISO-8601 strings); replies are
{"id", "prediction"} or {"id", "error"} with codes BAD_WINDOW_LEN,
BAD_TIMESTAMPS, MALFORMED. Errors keep the connection open.
"""
from __future__ import annotations

import logging
import socketserver
import threading

import numpy as np

from ..data.records import INTERVAL_MINUTES, parse_iso_minutes
from ..errors import ProtocolError
from ..forecast.model import LoadForecaster
from .framing import recv_frame, send_frame
from .oracle import OracleStats, validate_query

log = logging.getLogger(__name__)

HELLO = "HELLO"


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        server: ForecastServer = self.server.owner
        client = "%s:%d" % self.client_address
        while True:
            try:
                msg = recv_frame(self.request)
            except ProtocolError as exc:
                if "closed mid-frame" in str(exc):
                    return
                send_frame(self.request, {"id": None, "error": "MALFORMED"})
                continue
            except (ConnectionError, OSError):
                return
            if msg is None:
                return
            if msg == HELLO:
                send_frame(self.request, {"w": server.model.window,
                                          "interval_minutes": INTERVAL_MINUTES})
                continue
            send_frame(self.request, server.answer(msg, client))


class _ThreadingServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class ForecastServer:
    """Owns the listening socket, the model, and the query counters."""

    def __init__(self, model: LoadForecaster, host: str = "127.0.0.1", port: int = 0):
        model._check_ready()
        self.model = model
        self.stats = OracleStats()
        self._server = _ThreadingServer((host, port), _Handler)
        self._server.owner = self
        self._thread: threading.Thread | None = None

    @property
    def host(self) -> str:
        return self._server.server_address[0]

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> "ForecastServer":
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="forecast-server", daemon=True)
        self._thread.start()
        log.info("serving forecaster on %s:%d (w=%d)", self.host, self.port,
                 self.model.window)
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def answer(self, msg, client: str) -> dict:
        """One query frame -> one response frame (never raises)."""
        if not isinstance(msg, dict):
            return {"id": None, "error": "MALFORMED"}
        req_id = msg.get("id")
        window = msg.get("window")
        stamps = msg.get("timestamps")
        if req_id is None or window is None or stamps is None:
            return {"id": req_id, "error": "MALFORMED"}
        try:
            window = np.asarray(window, dtype=np.float64)
        except (TypeError, ValueError):
            return {"id": req_id, "error": "MALFORMED"}
        try:
            minutes = np.array([parse_iso_minutes(str(t)) for t in stamps], dtype=np.int64)
        except ValueError:
            return {"id": req_id, "error": "BAD_TIMESTAMPS"}
        try:
            validate_query(window, minutes, self.model.window)
        except ProtocolError as exc:
            return {"id": req_id, "error": exc.code}
        prediction = self.model.predict(window, minutes)
        self.stats.record(client)
        return {"id": req_id, "prediction": float(prediction)}


def serve(model: LoadForecaster, endpoint: str) -> ForecastServer:
    """Start a server on "host:port" (port 0 picks a free one)."""
    host, _, port = endpoint.rpartition(":")
    return ForecastServer(model, host or "127.0.0.1", int(port)).start()
