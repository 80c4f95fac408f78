"""Request/response channels with correlation ids.

A definer listens on a UNIX stream socket and answers REQ frames with
RSP frames carrying the same 8-byte correlation id.  Callers may
pipeline; responses are matched by id, never by arrival order.  The
server side is scriptable for tests: a handler maps request payload to
response payload, and ``batch=n`` holds n requests and answers them in
reverse arrival order to exercise out-of-order matching.
"""

from __future__ import annotations

import itertools
import queue
import socket
import threading
from typing import Callable, Optional

from .diagnostics import fail
from .frames import REQ, RSP, Frame, read_frame, write_frame


def _shutdown(sock) -> None:
    try:
        sock.shutdown(socket.SHUT_RDWR)
    except OSError:
        pass


class RpcServer:
    def __init__(
        self,
        endpoint: str,
        handler: Optional[Callable[[bytes], bytes]] = None,
        batch: int = 1,
    ) -> None:
        self.endpoint = endpoint
        self.handler = handler or (lambda payload: payload)
        self.batch = max(batch, 1)
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._open: list[socket.socket] = []
        self._lock = threading.Lock()
        self._accepting = False

    def start(self) -> "RpcServer":
        listener = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        try:
            listener.bind(self.endpoint)
        except OSError as err:
            listener.close()
            raise fail("EndpointInUse", f"cannot bind rpc endpoint '{self.endpoint}': {err}")
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
            _shutdown(self._listener)
            self._listener.close()
        with self._lock:
            conns = list(self._open)
        for sock in conns:
            _shutdown(sock)
        for thread in self._threads:
            thread.join(timeout=2)

    def __enter__(self) -> "RpcServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _accept_loop(self) -> None:
        while self._accepting:
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            with self._lock:
                self._open.append(sock)
            thread = threading.Thread(target=self._serve, args=(sock,), daemon=True)
            thread.start()
            self._threads.append(thread)

    def _serve(self, sock: socket.socket) -> None:
        held: list[Frame] = []
        try:
            while True:
                try:
                    frame = read_frame(sock)
                except Exception:
                    return
                if frame is None:
                    return
                if frame.kind != REQ:
                    continue
                held.append(frame)
                if len(held) < self.batch:
                    continue
                for req in reversed(held):
                    rsp = Frame(RSP, self.handler(req.payload), correlation=req.correlation)
                    write_frame(sock, rsp)
                held.clear()
        finally:
            with self._lock:
                if sock in self._open:
                    self._open.remove(sock)
            try:
                sock.close()
            except OSError:
                pass


_CLOSED = object()
_VIOLATION = object()


class RpcClient:
    """Caller side. Accepts an endpoint path or any socket-like transport."""

    def __init__(self, endpoint) -> None:
        if isinstance(endpoint, str):
            sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            try:
                sock.connect(endpoint)
            except OSError as err:
                sock.close()
                raise fail(
                    "DefinerUnavailable", f"cannot reach definer at '{endpoint}': {err}"
                )
            self.sock = sock
        else:
            self.sock = endpoint
        self._ids = itertools.count(1)
        # _pending is consumed by the reader on delivery, so a second RSP
        # with the same id shows up as unknown; _slots lives until result().
        self._pending: dict[int, queue.Queue] = {}
        self._slots: dict[int, queue.Queue] = {}
        self._lock = threading.Lock()
        self._violation: str | None = None
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def call(self, payload: bytes, timeout: float | None = 10.0) -> bytes:
        return self.result(self.call_async(payload), timeout=timeout)

    def call_async(self, payload: bytes) -> int:
        self._check_violation()
        corr = next(self._ids)
        slot: queue.Queue = queue.Queue(maxsize=1)
        with self._lock:
            self._pending[corr] = slot
            self._slots[corr] = slot
        try:
            write_frame(self.sock, Frame(REQ, payload, correlation=corr))
        except OSError:
            # reader exits once it hits EOF or a violation; let it settle
            # so we can report the real cause rather than the broken pipe
            self._reader.join(timeout=2)
            with self._lock:
                self._pending.pop(corr, None)
                self._slots.pop(corr, None)
            self._check_violation()
            raise fail("DefinerUnavailable", "connection closed while sending request")
        return corr

    def result(self, corr: int, timeout: float | None = 10.0) -> bytes:
        with self._lock:
            slot = self._slots.get(corr)
        if slot is None:
            self._check_violation()
            raise fail("CorrelationViolation", f"no outstanding request with id {corr}")
        try:
            value = slot.get(timeout=timeout)
        except queue.Empty:
            raise fail("DefinerUnavailable", f"no response for id {corr} within {timeout}s")
        if value is _VIOLATION:
            self._check_violation()
        if value is _CLOSED:
            raise fail("DefinerUnavailable", "connection closed before response")
        with self._lock:
            self._slots.pop(corr, None)
        return value

    def close(self) -> None:
        _shutdown(self.sock)
        self._reader.join(timeout=2)
        try:
            self.sock.close()
        except OSError:
            pass

    def _check_violation(self) -> None:
        if self._violation is not None:
            raise fail("CorrelationViolation", self._violation)

    def _read_loop(self) -> None:
        while True:
            try:
                frame = read_frame(self.sock)
            except Exception:
                frame = None
            if frame is None:
                self._drain(_CLOSED)
                return
            if frame.kind != RSP:
                continue
            with self._lock:
                slot = self._pending.pop(frame.correlation, None)
            if slot is None:
                self._violation = (
                    f"response with unknown or already answered id {frame.correlation}"
                )
                self._drain(_VIOLATION)
                return
            slot.put(frame.payload)

    def _drain(self, marker) -> None:
        with self._lock:
            slots = list(self._slots.values())
            self._pending.clear()
            self._slots.clear()
        for slot in slots:
            try:
                slot.put_nowait(marker)
            except queue.Full:
                pass
