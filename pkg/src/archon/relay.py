"""Cross-namespace connectivity by logical service name.

A site is a private endpoint namespace (a directory of UNIX sockets)
with a registry mapping logical names to endpoints inside it.  Two
sites joined by a relay reach each other's registered services by name
only; concrete endpoints never cross the link, and both sites may bind
identical endpoint values without conflict.

Stream protocol over one relay connection, multiplexed by stream id:

    FWD  name=svc  payload=b""      open a stream to logical service svc
    FWD  name=""   payload=chunk    data, forwarded bytewise in order
    FWD  name=""   payload=b""      half-close (EOF) for that direction
    RSP  correlation=stream id      relay-level error, payload "Code: why"

Names are never empty, so the open frame cannot be mistaken for EOF.
"""

from __future__ import annotations

import itertools
import os
import socket
import threading

from .diagnostics import fail
from .frames import FWD, MAX_FRAME_BYTES, RSP, Frame, read_frame, write_frame

RELAY_SOCKET = "relay.sock"

_CHUNK = 1 << 16


def _shutdown(sock) -> None:
    try:
        sock.shutdown(socket.SHUT_RDWR)
    except OSError:
        pass


# --- sites and routes -------------------------------------------------------


class Site:
    def __init__(self, name: str, root: str, registry: dict[str, str] | None = None):
        self.name = name
        self.root = root
        self.registry = dict(registry or {})

    def endpoint_path(self, logical: str) -> str:
        return os.path.join(self.root, self.registry[logical])


def make_site(name: str, root: str) -> Site:
    os.makedirs(root, exist_ok=True)
    return Site(name, root)


def register_service(site: Site, logical: str, endpoint: str) -> Site:
    """Value-style: returns an extended site, original untouched."""
    if not logical:
        raise fail("BadLogicalName", "logical name must be non-empty")
    if logical in site.registry:
        raise fail(
            "DuplicateLogicalName",
            f"'{logical}' is already registered in site '{site.name}'",
        )
    if os.path.isabs(endpoint) or ".." in endpoint.split(os.sep):
        raise fail(
            "BadEndpoint",
            f"endpoint '{endpoint}' must stay inside the namespace of site '{site.name}'",
        )
    extended = dict(site.registry)
    extended[logical] = endpoint
    return Site(site.name, site.root, extended)


class RelayLink:
    def __init__(self, site_a: Site, site_b: Site) -> None:
        self.site_a = site_a
        self.site_b = site_b

    def site(self, name: str) -> Site:
        if name == self.site_a.name:
            return self.site_a
        if name == self.site_b.name:
            return self.site_b
        raise fail("UnknownSite", f"no site '{name}' on this link")

    def peer(self, name: str) -> Site:
        return self.site_b if name == self.site_a.name else self.site_a

    def owner(self, logical: str) -> Site | None:
        """The forwarding table: names registered in exactly one site."""
        in_a = logical in self.site_a.registry
        in_b = logical in self.site_b.registry
        if in_a == in_b:
            return None
        return self.site_a if in_a else self.site_b


class Route:
    def __init__(self, kind: str, endpoint: str, service: str = "") -> None:
        self.kind = kind          # "direct" | "via-relay"
        self.endpoint = endpoint  # always within the caller's own namespace
        self.service = service


def resolve(link: RelayLink, from_site: str, logical: str) -> Route:
    site = link.site(from_site)
    peer = link.peer(from_site)
    local = logical in site.registry
    remote = logical in peer.registry
    if local and remote:
        raise fail("AmbiguousName", f"'{logical}' is registered in both sites")
    if local:
        return Route("direct", site.endpoint_path(logical))
    if remote:
        return Route("via-relay", os.path.join(site.root, RELAY_SOCKET), logical)
    raise fail("NotFound", f"no service '{logical}' reachable from site '{from_site}'")


# --- the relay itself -------------------------------------------------------


class Relay:
    """Listens inside both namespaces; forwards streams to name owners."""

    def __init__(self, link: RelayLink) -> None:
        self.link = link
        self._listeners: list[socket.socket] = []
        self._threads: list[threading.Thread] = []
        self._open: list[socket.socket] = []
        self._lock = threading.Lock()
        self._running = False

    def start(self) -> "Relay":
        for site in (self.link.site_a, self.link.site_b):
            path = os.path.join(site.root, RELAY_SOCKET)
            listener = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            try:
                listener.bind(path)
            except OSError as err:
                listener.close()
                self.stop()
                raise fail("EndpointInUse", f"cannot bind relay at '{path}': {err}")
            listener.listen()
            self._listeners.append(listener)
        self._running = True
        for listener in self._listeners:
            thread = threading.Thread(target=self._accept_loop, args=(listener,), daemon=True)
            thread.start()
            self._threads.append(thread)
        return self

    def stop(self) -> None:
        self._running = False
        for listener in self._listeners:
            _shutdown(listener)
            listener.close()
        with self._lock:
            conns = list(self._open)
        for sock in conns:
            _shutdown(sock)
        for thread in self._threads:
            thread.join(timeout=2)

    def __enter__(self) -> "Relay":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _accept_loop(self, listener: socket.socket) -> None:
        while self._running:
            try:
                sock, _ = listener.accept()
            except OSError:
                return
            with self._lock:
                self._open.append(sock)
            thread = threading.Thread(target=self._serve_client, args=(sock,), daemon=True)
            thread.start()
            self._threads.append(thread)

    def _serve_client(self, client: socket.socket) -> None:
        write_lock = threading.Lock()
        backends: dict[int, socket.socket] = {}

        def to_client(frame: Frame) -> None:
            with write_lock:
                try:
                    write_frame(client, frame)
                except OSError:
                    pass

        def backend_reader(stream_id: int, backend: socket.socket) -> None:
            while True:
                try:
                    chunk = backend.recv(_CHUNK)
                except OSError:
                    chunk = b""
                if not chunk:
                    to_client(Frame(FWD, b"", stream_id=stream_id))
                    return
                to_client(Frame(FWD, chunk, stream_id=stream_id))

        try:
            while True:
                try:
                    frame = read_frame(client)
                except Exception:
                    break
                if frame is None or frame.kind != FWD:
                    if frame is None:
                        break
                    continue
                sid = frame.stream_id
                if frame.name:
                    owner = self.link.owner(frame.name)
                    if owner is None:
                        to_client(
                            Frame(
                                RSP,
                                f"UnknownService: no service '{frame.name}' on this link".encode(),
                                correlation=sid,
                            )
                        )
                        continue
                    backend = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
                    try:
                        backend.connect(owner.endpoint_path(frame.name))
                    except OSError as err:
                        backend.close()
                        to_client(
                            Frame(RSP, f"PeerDown: {err}".encode(), correlation=sid)
                        )
                        continue
                    backends[sid] = backend
                    with self._lock:
                        self._open.append(backend)
                    thread = threading.Thread(
                        target=backend_reader, args=(sid, backend), daemon=True
                    )
                    thread.start()
                    self._threads.append(thread)
                    if frame.payload:
                        backend.sendall(frame.payload)
                    continue
                backend = backends.get(sid)
                if backend is None:
                    continue
                if not frame.payload:
                    try:
                        backend.shutdown(socket.SHUT_WR)
                    except OSError:
                        pass
                    continue
                try:
                    backend.sendall(frame.payload)
                except OSError:
                    pass
        finally:
            for backend in backends.values():
                _shutdown(backend)
                try:
                    backend.close()
                except OSError:
                    pass
            with self._lock:
                if client in self._open:
                    self._open.remove(client)
            try:
                client.close()
            except OSError:
                pass


# --- caller-side multiplexing ----------------------------------------------


class RelayConnection:
    """One socket to the local relay endpoint, many independent streams."""

    def __init__(self, relay_endpoint: str) -> None:
        self.sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        try:
            self.sock.connect(relay_endpoint)
        except OSError as err:
            self.sock.close()
            raise fail("PeerDown", f"cannot reach relay at '{relay_endpoint}': {err}")
        self._ids = itertools.count(1)
        self._streams: dict[int, "RelayStream"] = {}
        self._lock = threading.Lock()
        self._write_lock = threading.Lock()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def open_stream(self, service: str) -> "RelayStream":
        sid = next(self._ids)
        stream = RelayStream(self, sid)
        with self._lock:
            self._streams[sid] = stream
        self._send(Frame(FWD, b"", name=service, stream_id=sid))
        return stream

    def close(self) -> None:
        _shutdown(self.sock)
        self._reader.join(timeout=2)
        try:
            self.sock.close()
        except OSError:
            pass

    def _send(self, frame: Frame) -> None:
        with self._write_lock:
            write_frame(self.sock, frame)

    def _read_loop(self) -> None:
        while True:
            try:
                frame = read_frame(self.sock)
            except Exception:
                frame = None
            if frame is None:
                with self._lock:
                    streams = list(self._streams.values())
                for stream in streams:
                    stream._push_eof()
                return
            with self._lock:
                stream = self._streams.get(
                    frame.stream_id if frame.kind == FWD else frame.correlation
                )
            if stream is None:
                continue
            if frame.kind == RSP:
                code, _, message = frame.payload.decode("utf-8", "replace").partition(": ")
                stream._push_error(code or "RelayError", message)
            elif frame.kind == FWD:
                if frame.payload:
                    stream._push_data(frame.payload)
                else:
                    stream._push_eof()


class RelayStream:
    """Socket-shaped: sendall / recv / close, so protocol clients stack on it."""

    def __init__(self, conn: RelayConnection, stream_id: int) -> None:
        self._conn = conn
        self._id = stream_id
        self._buf = bytearray()
        self._eof = False
        self._error: tuple[str, str] | None = None
        self._cond = threading.Condition()
        self._closed = False

    def sendall(self, data: bytes) -> None:
        self._raise_if_error()
        limit = MAX_FRAME_BYTES - 64  # headroom for kind + headers
        for i in range(0, len(data), limit):
            self._conn._send(Frame(FWD, bytes(data[i : i + limit]), stream_id=self._id))

    def recv(self, n: int) -> bytes:
        with self._cond:
            while not self._buf and not self._eof and self._error is None:
                self._cond.wait()
            if self._error is not None:
                code, message = self._error
                raise fail(code, message)
            if self._buf:
                out = bytes(self._buf[:n])
                del self._buf[:n]
                return out
            return b""

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            try:
                self._conn._send(Frame(FWD, b"", stream_id=self._id))
            except OSError:
                pass

    def shutdown(self, how: int) -> None:
        self.close()

    def _push_data(self, payload: bytes) -> None:
        with self._cond:
            self._buf.extend(payload)
            self._cond.notify_all()

    def _push_eof(self) -> None:
        with self._cond:
            self._eof = True
            self._cond.notify_all()

    def _push_error(self, code: str, message: str) -> None:
        with self._cond:
            self._error = (code, message)
            self._cond.notify_all()

    def _raise_if_error(self) -> None:
        with self._cond:
            if self._error is not None:
                raise fail(*self._error)
