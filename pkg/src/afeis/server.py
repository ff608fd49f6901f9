"""Line-protocol session server.

One operator session at a time over a plain TCP duplex stream.  Every record
is one JSON object per newline-terminated line.

Inbound record types::

    {"type": "frame", "ts": <ms>, "gesture": <id>}
    {"type": "reset"}
    {"type": "load_session", "path": "<config file>"}

Outbound records all carry a per-connection gapless sequence number ``seq``.
Types: ``hello``, ``keymap_changed``, ``env``, ``robot_state``, ``accepted``,
``token``, ``parse_event``, ``window_counts``, ``effect``, ``error``.  The
pipeline never blocks on a slow reader: the outbound queue is bounded and
sheds the oldest telemetry records first; effect-bearing records are never
dropped.
"""

from __future__ import annotations

import json
import logging
import socket
import threading
import time
from collections import deque
from typing import Any

from .errors import ConfigError, StreamOrderError
from .keymap import GestureRangeError
from .session import FrameReport, Session, effect_record, load_session_config

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1

# Telemetry records may be shed under backpressure; everything else must arrive.
DROPPABLE_TYPES = frozenset({"window_counts", "robot_state", "token", "parse_event"})
OUTBOUND_QUEUE_BOUND = 1024


class _Connection:
    def __init__(self, sock: socket.socket):
        try:
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        except OSError:
            pass  # not a TCP socket
        self.sock = sock
        self.seq = 0
        self.queue: deque[dict[str, Any]] = deque()
        self.lock = threading.Lock()
        self.ready = threading.Condition(self.lock)
        self.closed = False

    def send(self, record: dict[str, Any]) -> None:
        with self.ready:
            if self.closed:
                return
            if len(self.queue) >= OUTBOUND_QUEUE_BOUND:
                for i, queued in enumerate(self.queue):
                    if queued["type"] in DROPPABLE_TYPES:
                        del self.queue[i]
                        break
                else:
                    # nothing sheddable; block the pipeline rather than lose effects
                    pass
            self.queue.append(record)
            self.ready.notify()

    def writer_loop(self) -> None:
        while True:
            with self.ready:
                while not self.queue and not self.closed:
                    self.ready.wait()
                if self.closed and not self.queue:
                    return
                record = self.queue.popleft()
                record["seq"] = self.seq
                self.seq += 1
            try:
                self.sock.sendall(json.dumps(record, sort_keys=True).encode() + b"\n")
            except OSError:
                with self.ready:
                    self.closed = True
                    self.ready.notify()
                return

    def close(self, drain_seconds: float = 0.5) -> None:
        # give the writer a moment to flush queued records (e.g. a final
        # diagnostic) before tearing the socket down
        deadline = time.monotonic() + drain_seconds
        while time.monotonic() < deadline:
            with self.lock:
                if not self.queue or self.closed:
                    break
            time.sleep(0.005)
        with self.ready:
            self.closed = True
            self.ready.notify()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class SessionServer:
    """Owns the live session and speaks the wire protocol to one client."""

    def __init__(self, session: Session, host: str = "127.0.0.1", port: int = 0):
        self.session = session
        self.host = host
        self.port = port
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._stopping = threading.Event()
        self._active: _Connection | None = None
        self._active_lock = threading.Lock()

    def start(self) -> tuple[str, int]:
        listener = socket.create_server((self.host, self.port))
        self._listener = listener
        self.host, self.port = listener.getsockname()[:2]
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        logger.info("session server listening on %s:%d", self.host, self.port)
        return self.host, self.port

    def stop(self) -> None:
        self._stopping.set()
        with self._active_lock:
            if self._active is not None:
                self._active.close()
        if self._listener is not None:
            try:
                # close() alone does not wake a blocked accept()
                self._listener.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._listener.close()
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=2)

    def wait(self) -> None:
        """Block until :meth:`stop` is called."""
        self._stopping.wait()

    def serve_forever(self) -> None:
        self.start()
        try:
            self.wait()
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    # -- internals -------------------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stopping.is_set():
            try:
                sock, _addr = self._listener.accept()
            except OSError:
                return
            with self._active_lock:
                busy = self._active is not None and not self._active.closed
            if busy:
                try:
                    sock.sendall(
                        json.dumps({"seq": 0, "type": "error", "error": "busy: one session at a time"}).encode()
                        + b"\n"
                    )
                finally:
                    sock.close()
                continue
            conn = _Connection(sock)
            with self._active_lock:
                self._active = conn
            threading.Thread(target=conn.writer_loop, daemon=True).start()
            threading.Thread(target=self._client_loop, args=(conn,), daemon=True).start()

    def _client_loop(self, conn: _Connection) -> None:
        conn.send({"type": "hello", "version": PROTOCOL_VERSION})
        self._send_snapshot(conn)
        try:
            reader = conn.sock.makefile("r", encoding="utf-8", newline="\n")
            for line in reader:
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    if not isinstance(record, dict) or "type" not in record:
                        raise ValueError("record must be an object with a 'type'")
                except (json.JSONDecodeError, ValueError) as exc:
                    conn.send({"type": "error", "error": f"malformed record: {exc}"})
                    continue
                self._handle(conn, record)
        except OSError:
            pass
        finally:
            conn.close()
            with self._active_lock:
                if self._active is conn:
                    self._active = None

    def _send_snapshot(self, conn: _Connection) -> None:
        session = self.session
        conn.send({"type": "keymap_changed", **session.keymap_record()})
        conn.send({"type": "env", **session.env_record()})
        conn.send({"type": "robot_state", **session.robot_record()})

    def _handle(self, conn: _Connection, record: dict[str, Any]) -> None:
        kind = record["type"]
        if kind == "frame":
            self._handle_frame(conn, record)
        elif kind == "reset":
            self.session.reset()
            self._send_snapshot(conn)
        elif kind == "load_session":
            self._handle_load(conn, record)
        else:
            conn.send({"type": "error", "error": f"unknown record type {kind!r}"})

    def _handle_frame(self, conn: _Connection, record: dict[str, Any]) -> None:
        session = self.session
        try:
            ts = int(record["ts"])
            gesture = int(record["gesture"])
        except (KeyError, TypeError, ValueError):
            conn.send({"type": "error", "error": "frame needs integer 'ts' and 'gesture'"})
            return
        keymap_before = session.registry.active_index
        try:
            report: FrameReport = session.push_frame(ts, gesture)
        except GestureRangeError as exc:
            conn.send({"type": "error", "error": str(exc)})
            return
        except StreamOrderError as exc:
            # the frame stream is corrupt; abort this session's connection
            conn.send({"type": "error", "error": f"session aborted: {exc}"})
            conn.close()
            return
        conn.send({"type": "window_counts", **session.window_record()})
        if report.accepted is None:
            return
        conn.send(
            {
                "type": "accepted",
                "gesture": report.accepted.gesture,
                "ts": report.accepted.timestamp_ms,
            }
        )
        feed = report.feed
        assert feed is not None
        result = feed.result
        conn.send(
            {
                "type": "token",
                "kind": result.token.kind.value,
                "text": "" if result.token.value is None else str(result.token.value),
            }
        )
        conn.send(
            {
                "type": "parse_event",
                "state_before": result.state_before,
                "state_after": result.state_after,
                "outcome": result.outcome.value,
                "diagnostic": result.diagnostic,
            }
        )
        if result.effect is not None:
            conn.send(
                {
                    "type": "effect",
                    "effect": effect_record(result.effect, session.interpreter.env.functions),
                }
            )
            conn.send({"type": "env", **session.env_record()})
        if feed.delivery_error:
            conn.send({"type": "error", "error": f"delivery failed: {feed.delivery_error}"})
        if session.registry.active_index != keymap_before:
            conn.send({"type": "keymap_changed", **session.keymap_record()})
        if result.effect is not None or feed.delivery_error:
            conn.send({"type": "robot_state", **session.robot_record()})

    def _handle_load(self, conn: _Connection, record: dict[str, Any]) -> None:
        if self.session.interpreter.mid_form:
            conn.send({"type": "error", "error": "busy: cannot swap session mid-form"})
            return
        path = record.get("path")
        if not isinstance(path, str):
            conn.send({"type": "error", "error": "load_session needs a 'path'"})
            return
        try:
            config = load_session_config(path)
        except ConfigError as exc:
            conn.send({"type": "error", "error": str(exc)})
            return
        self.session = config.build_session()
        self._send_snapshot(conn)
