"""Local publish/subscribe hub for event connectors.

One broker serves a whole run over a UNIX stream socket.  Clients send
REG frames to subscribe to topics and EVT frames to publish.  Every
publish is pushed, synchronously with receipt, to each other connection
currently registered for that topic, so per-announcer order falls out of
the per-connection reader thread.  An announcer never hears its own
events back.
"""

from __future__ import annotations

import queue
import socket
import threading

from .diagnostics import fail
from .frames import EVT, REG, Frame, read_frame, write_frame


def _shutdown(sock: socket.socket) -> None:
    # close() alone does not wake a thread blocked in recv on the same socket
    try:
        sock.shutdown(socket.SHUT_RDWR)
    except OSError:
        pass


class _Conn:
    def __init__(self, sock: socket.socket) -> None:
        self.sock = sock
        self.topics: set[str] = set()
        self.write_lock = threading.Lock()

    def send(self, frame: Frame) -> None:
        with self.write_lock:
            write_frame(self.sock, frame)


class EventBroker:
    def __init__(self, endpoint: str) -> None:
        self.endpoint = endpoint
        self._listener: socket.socket | None = None
        self._conns: set[_Conn] = set()
        self._lock = threading.Lock()
        self._threads: list[threading.Thread] = []
        self._accepting = False

    def start(self) -> "EventBroker":
        listener = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        try:
            listener.bind(self.endpoint)
        except OSError as err:
            listener.close()
            raise fail("EndpointInUse", f"cannot bind broker endpoint '{self.endpoint}': {err}")
        listener.listen()
        self._listener = listener
        self._accepting = True
        thread = threading.Thread(target=self._accept_loop, daemon=True)
        thread.start()
        self._threads.append(thread)
        return self

    def stop(self) -> None:
        self._accepting = False
        if self._listener is not None:
            _shutdown(self._listener)  # wakes the blocked accept
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            conns = list(self._conns)
        for conn in conns:
            _shutdown(conn.sock)
        for thread in self._threads:
            thread.join(timeout=2)

    def registered(self, topic: str) -> int:
        """How many live connections are subscribed; lets callers sync up."""
        with self._lock:
            return sum(1 for c in self._conns if topic in c.topics)

    def __enter__(self) -> "EventBroker":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _accept_loop(self) -> None:
        while self._accepting:
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            conn = _Conn(sock)
            with self._lock:
                self._conns.add(conn)
            thread = threading.Thread(target=self._serve, args=(conn,), daemon=True)
            thread.start()
            self._threads.append(thread)

    def _serve(self, conn: _Conn) -> None:
        try:
            while True:
                try:
                    frame = read_frame(conn.sock)
                except Exception:
                    break
                if frame is None:
                    break
                if frame.kind == REG:
                    with self._lock:
                        conn.topics.add(frame.topic)
                elif frame.kind == EVT:
                    with self._lock:
                        targets = [
                            c for c in self._conns if c is not conn and frame.topic in c.topics
                        ]
                    for target in targets:
                        try:
                            target.send(frame)
                        except OSError:
                            pass
        finally:
            with self._lock:
                self._conns.discard(conn)
            try:
                conn.sock.close()
            except OSError:
                pass


class BrokerClient:
    """Test and component-side client: subscribe, publish, drain events."""

    def __init__(self, endpoint: str) -> None:
        self.sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        try:
            self.sock.connect(endpoint)
        except OSError as err:
            self.sock.close()
            raise fail("BrokerUnavailable", f"cannot reach broker at '{endpoint}': {err}")
        self._events: queue.Queue[tuple[str, bytes]] = queue.Queue()
        self._write_lock = threading.Lock()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def subscribe(self, topic: str) -> None:
        with self._write_lock:
            write_frame(self.sock, Frame(REG, topic=topic))

    def publish(self, topic: str, payload: bytes) -> None:
        with self._write_lock:
            write_frame(self.sock, Frame(EVT, payload, topic=topic))

    def next_event(self, timeout: float | None = None) -> tuple[str, bytes] | None:
        try:
            return self._events.get(timeout=timeout)
        except queue.Empty:
            return None

    def close(self) -> None:
        _shutdown(self.sock)
        self._reader.join(timeout=2)
        try:
            self.sock.close()
        except OSError:
            pass

    def _read_loop(self) -> None:
        while True:
            try:
                frame = read_frame(self.sock)
            except Exception:
                return
            if frame is None:
                return
            if frame.kind == EVT:
                self._events.put((frame.topic, frame.payload))
