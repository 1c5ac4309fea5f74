"""Socket front end: length-delimited JSON requests over a local TCP port.

One connection carries request/response exchanges; a connection that sends
``subscribe`` switches to a push stream of telemetry frames.  Sessions are
independent; their ids are assigned deterministically (s1, s2, ...).
"""

from __future__ import annotations

import io
import socket
import socketserver
import threading

from ..errors import RequestError, TwinError
from ..params import ModelParameters, load_parameters
from ..simulator import load_scenario, parse_scenario, shipped_scenario
from ..tables import read_records
from . import protocol
from .session import Session


class TwinServer:
    def __init__(self, host: str = "127.0.0.1", port: int = 0,
                 params: ModelParameters = None):
        self.params = params or load_parameters()
        self._sessions: dict[str, Session] = {}
        self._counter = 0
        self._lock = threading.Lock()
        self._shutdown = threading.Event()
        outer = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                outer._serve_connection(self.rfile, self.wfile)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._tcp = Server((host, port), Handler)
        self.address = self._tcp.server_address

    def start(self):
        self._thread = threading.Thread(target=self._tcp.serve_forever,
                                        daemon=True, name="twin-server")
        self._thread.start()
        return self

    def stop(self):
        self._tcp.shutdown()
        self._tcp.server_close()
        for s in list(self._sessions.values()):
            s.close()
        self._shutdown.set()

    def wait(self):
        self._shutdown.wait()

    # -- connection handling --------------------------------------------------

    def _serve_connection(self, rfile, wfile):
        while True:
            try:
                msg = protocol.read_message(rfile)
            except RequestError as exc:
                self._send(wfile, self._error(str(exc)))
                return
            if msg is None:
                return
            if msg.get("type") == "subscribe":
                self._stream(msg, wfile)
                return
            self._send(wfile, self.handle_request(msg))
            if msg.get("type") == "shutdown":
                return

    def _stream(self, msg, wfile):
        try:
            session = self._session(msg)
        except TwinError as exc:
            self._send(wfile, self._error(str(exc)))
            return
        q = session.subscribe()
        self._send(wfile, self._ok({"subscribed": session.sid,
                                    "from_seq": len(session.frames)}))
        while not self._shutdown.is_set():
            try:
                frame = q.get(timeout=0.5)
            except Exception:
                continue
            try:
                self._send(wfile, frame)
            except (BrokenPipeError, ConnectionError, OSError):
                return

    @staticmethod
    def _send(wfile, obj):
        wfile.write(protocol.encode_message(obj))
        wfile.flush()

    @staticmethod
    def _ok(payload: dict) -> dict:
        out = {"ok": True, "v": protocol.PROTOCOL_VERSION}
        out.update(payload)
        return out

    @staticmethod
    def _error(message: str, **extra) -> dict:
        out = {"ok": False, "v": protocol.PROTOCOL_VERSION, "error": message}
        out.update(extra)
        return out

    def _session(self, msg) -> Session:
        sid = msg.get("session")
        session = self._sessions.get(sid)
        if session is None:
            raise RequestError(f"unknown session {sid!r}")
        return session

    # -- request dispatch ------------------------------------------------------

    def handle_request(self, msg: dict) -> dict:
        try:
            rtype = msg.get("type")
            if rtype == "create_session":
                return self._ok(self._create_session(msg))
            if rtype == "list_sessions":
                return self._ok({"sessions": sorted(self._sessions)})
            if rtype == "close_session":
                session = self._session(msg)
                session.close()
                del self._sessions[session.sid]
                return self._ok({"closed": session.sid})
            if rtype == "shutdown":
                threading.Thread(target=self.stop, daemon=True).start()
                return self._ok({"shutdown": True})
            if rtype in ("status", "step", "run", "pause", "set_input",
                         "what_if", "calibrate", "probe", "frames", "export"):
                session = self._session(msg)
                cmd = dict(msg)
                cmd["op"] = rtype
                return self._ok(session.request(cmd))
            return self._error(f"unknown request type {rtype!r}")
        except RequestError as exc:
            return self._error(str(exc))
        except TwinError as exc:
            return self._error(f"{type(exc).__name__}: {exc}")

    def _create_session(self, msg) -> dict:
        scenario = None
        replay = None
        if "scenario_name" in msg:
            scenario = shipped_scenario(msg["scenario_name"])
        elif "scenario_path" in msg:
            scenario = load_scenario(msg["scenario_path"])
        elif "scenario_text" in msg:
            scenario = parse_scenario(msg["scenario_text"])
        elif "replay_path" in msg:
            replay = read_records(msg["replay_path"])
        elif "replay_text" in msg:
            import tempfile
            with tempfile.NamedTemporaryFile("w", suffix=".csv",
                                             delete=False) as fh:
                fh.write(msg["replay_text"])
                path = fh.name
            replay = read_records(path)
        else:
            raise RequestError("create_session needs a scenario or replay source")
        with self._lock:
            self._counter += 1
            sid = f"s{self._counter}"
        session = Session(sid, self.params, scenario=scenario,
                          replay_records=replay,
                          em_window=msg.get("em_window"),
                          init_window=int(msg.get("init_window", 10)))
        self._sessions[sid] = session
        return {"session": sid, "mode": session.mode, "paused": True, "t": 0.0}


def serve_forever(host: str, port: int, params: ModelParameters = None):
    server = TwinServer(host, port, params).start()
    import sys
    sys.stderr.write(f"ajtwin service listening on {server.address[0]}:"
                     f"{server.address[1]}\n")
    try:
        server.wait()
    except KeyboardInterrupt:
        server.stop()


class TwinClient:
    """Minimal blocking client used by tests and tooling."""

    def __init__(self, host: str, port: int):
        self._sock = socket.create_connection((host, port))
        self._rfile = self._sock.makefile("rb")

    def request(self, msg: dict) -> dict:
        self._sock.sendall(protocol.encode_message(msg))
        reply = protocol.read_message(self._rfile)
        if reply is None:
            raise ConnectionError("server closed connection")
        return reply

    def subscribe(self, session: str):
        self._sock.sendall(protocol.encode_message(
            {"type": "subscribe", "session": session}))
        ack = protocol.read_message(self._rfile)
        return ack

    def next_message(self, timeout: float = None):
        if timeout is not None:
            self._sock.settimeout(timeout)
        return protocol.read_message(self._rfile)

    def close(self):
        try:
            self._sock.close()
        except OSError:
            pass
