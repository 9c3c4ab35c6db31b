"""Length-prefixed JSON framing: 4-byte big-endian length, then UTF-8 JSON."""
from __future__ import annotations

import json
import socket
import struct

from ..errors import ProtocolError

MAX_FRAME_BYTES = 4 << 20


def send_frame(sock: socket.socket, obj) -> None:
    raw = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    sock.sendall(struct.pack(">I", len(raw)) + raw)


def recv_frame(sock: socket.socket):
    """Next decoded frame, or None on clean EOF at a frame boundary."""
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError("MALFORMED", f"frame of {length} bytes exceeds limit")
    payload = _recv_exact(sock, length)
    if payload is None:
        raise ProtocolError("MALFORMED", "connection closed mid-frame")
    try:
        return json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError("MALFORMED", str(exc)) from exc


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            if buf:
                raise ProtocolError("MALFORMED", "connection closed mid-frame")
            return None
        buf += chunk
    return buf
