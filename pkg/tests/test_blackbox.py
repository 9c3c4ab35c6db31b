import json
import socket
import struct

import numpy as np
import pytest

from gridleak.blackbox import (ForecastQuery, ForecastServer, LocalOracle,
                               RemoteOracle, recv_frame, send_frame, serve)
from gridleak.data import SynthConfig, generate_dataset
from gridleak.errors import OracleError, ProtocolError
from gridleak.forecast import ForecastHyperparams, train_forecaster

HP = ForecastHyperparams(lstm_nodes=8, fc_nodes=16, epochs=3, batch_size=128,
                         learning_rate=8e-3, window=24)


@pytest.fixture(scope="module")
def model():
    ds = generate_dataset(SynthConfig(n_households=2, days=16, seed=13))
    rec, _ = ds.households[0]
    m, _ = train_forecaster(rec, HP, seed=1)
    return m


@pytest.fixture()
def server(model):
    srv = ForecastServer(model).start()
    yield srv
    srv.shutdown()


def _query(model, rid=0, start_minute=0):
    w = model.window
    rng = np.random.default_rng(rid + 1)
    return ForecastQuery(rid, rng.uniform(0, 1, w),
                         start_minute + 30 * np.arange(w + 1, dtype=np.int64))


class TestFraming:
    def test_roundtrip_over_socketpair(self):
        a, b = socket.socketpair()
        send_frame(a, {"id": 1, "x": [1.5, 2.0]})
        assert recv_frame(b) == {"id": 1, "x": [1.5, 2.0]}
        a.close()
        assert recv_frame(b) is None
        b.close()

    def test_frame_layout_is_length_prefixed_json(self):
        a, b = socket.socketpair()
        send_frame(a, "HELLO")
        raw = b.recv(1024)
        (length,) = struct.unpack(">I", raw[:4])
        assert raw[4:4 + length] == b'"HELLO"'
        a.close()
        b.close()

    def test_mid_frame_close_raises(self):
        a, b = socket.socketpair()
        a.sendall(struct.pack(">I", 100) + b"short")
        a.close()
        with pytest.raises(ProtocolError):
            recv_frame(b)
        b.close()


class TestLocalOracle:
    def test_query_counts_and_echo(self, model):
        oracle = LocalOracle(model)
        q = _query(model, rid=7)
        resp = oracle.query(q)
        assert resp.request_id == 7
        assert np.isfinite(resp.prediction)
        assert oracle.stats.total == 1

    def test_batch_matches_singles(self, model):
        oracle = LocalOracle(model)
        queries = [_query(model, rid=i, start_minute=60 * i) for i in range(16)]
        batch = oracle.query_batch(queries)
        singles = [oracle.query(q) for q in queries]
        assert [r.request_id for r in batch] == [q.request_id for q in queries]
        diffs = [abs(b.prediction - s.prediction) for b, s in zip(batch, singles)]
        assert max(diffs) <= 1e-9
        assert oracle.stats.total == 32

    def test_bad_window_length(self, model):
        oracle = LocalOracle(model)
        q = _query(model)
        q.window = q.window[:-1]
        with pytest.raises(ProtocolError) as exc:
            oracle.query(q)
        assert exc.value.code == "BAD_WINDOW_LEN"

    def test_non_increasing_timestamps(self, model):
        oracle = LocalOracle(model)
        q = _query(model)
        q.times_minutes = q.times_minutes[::-1].copy()
        with pytest.raises(ProtocolError) as exc:
            oracle.query(q)
        assert exc.value.code == "BAD_TIMESTAMPS"


class TestWireProtocol:
    def test_handshake_advertises_w_and_interval(self, server, model):
        with RemoteOracle(server.host, server.port) as oracle:
            assert oracle.w == model.window
            assert oracle.interval_minutes == 30

    def test_sequential_queries_echo_ids(self, server, model):
        with RemoteOracle(server.host, server.port) as oracle:
            n = 200
            for i in range(n):
                resp = oracle.query(_query(model, rid=i, start_minute=30 * i))
                assert resp.request_id == i
            assert server.stats.total == n

    def test_short_window_error_keeps_connection_open(self, server, model):
        with RemoteOracle(server.host, server.port) as oracle:
            bad = _query(model, rid=1)
            bad.window = bad.window[:-1]
            with pytest.raises(ProtocolError) as exc:
                oracle.query(bad)
            assert exc.value.code == "BAD_WINDOW_LEN"
            ok = oracle.query(_query(model, rid=2))
            assert ok.request_id == 2

    def test_wire_matches_local_to_1e9(self, server, model):
        local = LocalOracle(model)
        with RemoteOracle(server.host, server.port) as remote:
            worst = 0.0
            for i in range(100):
                q = _query(model, rid=i, start_minute=1440 * i)
                worst = max(worst, abs(local.query(q).prediction
                                       - remote.query(q).prediction))
        assert worst <= 1e-9

    def test_responses_never_leak_extra_fields(self, server, model):
        q = _query(model, rid=3)
        frame = {"id": 3, "window": [float(v) for v in q.window],
                 "timestamps": [str(np.datetime64(int(m), "m")) for m in q.times_minutes]}
        reply = server.answer(frame, client="test")
        assert set(reply) == {"id", "prediction"}
        bad = dict(frame, window=frame["window"][:-1])
        reply = server.answer(bad, client="test")
        assert set(reply) == {"id", "error"}

    def test_malformed_frame_gets_error(self, server):
        with socket.create_connection((server.host, server.port)) as sock:
            send_frame(sock, {"nonsense": True})
            reply = recv_frame(sock)
            assert reply == {"id": None, "error": "MALFORMED"}
            sock.sendall(struct.pack(">I", 3) + b"{{{")
            reply = recv_frame(sock)
            assert reply == {"id": None, "error": "MALFORMED"}

    def test_bad_timestamp_string(self, server):
        with socket.create_connection((server.host, server.port)) as sock:
            w = server.model.window
            send_frame(sock, {"id": 5, "window": [0.5] * w,
                              "timestamps": ["not-a-date"] * (w + 1)})
            reply = recv_frame(sock)
            assert reply == {"id": 5, "error": "BAD_TIMESTAMPS"}

    def test_unreachable_endpoint(self):
        with pytest.raises(OracleError):
            RemoteOracle("127.0.0.1", 1, timeout=0.2, retries=2)

    def test_serve_helper_parses_endpoint(self, model):
        srv = serve(model, "127.0.0.1:0")
        try:
            with RemoteOracle(srv.host, srv.port) as oracle:
                assert oracle.w == model.window
        finally:
            srv.shutdown()

    def test_stats_per_client(self, server, model):
        with RemoteOracle(server.host, server.port) as a:
            a.query(_query(model, rid=1))
            a.query(_query(model, rid=2))
        snap = server.stats.snapshot()
        assert snap["total"] == 2
        assert sum(snap["per_client"].values()) == 2
