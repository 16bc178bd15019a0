"""Frame channels: an in-process queue pair and a TCP socket.

Both carry the same encoded bytes, so a run produces identical numerics
whichever transport it uses.
"""

from __future__ import annotations

import queue
import socket

from ddw.errors import ProtocolError
from ddw.runtime.messages import HEADER, split_header

DEFAULT_TIMEOUT = 300.0
_CLOSED = object()


class Channel:
    """One ordered, reliable, bidirectional frame link."""

    def send(self, frame: bytes) -> None:
        raise NotImplementedError

    def recv(self, timeout: float | None = DEFAULT_TIMEOUT) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class QueueChannel(Channel):
    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._in = inbox
        self._out = outbox
        self._closed = False

    def send(self, frame: bytes) -> None:
        if self._closed:
            raise ProtocolError("send on a closed channel")
        self._out.put(bytes(frame))

    def recv(self, timeout: float | None = DEFAULT_TIMEOUT) -> bytes:
        try:
            frame = self._in.get(timeout=timeout)
        except queue.Empty:
            raise ProtocolError(f"no frame within {timeout} s") from None
        if frame is _CLOSED:
            raise ProtocolError("peer closed the channel")
        split_header(frame[: HEADER.size])
        return frame

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._out.put(_CLOSED)


def queue_pair() -> tuple[QueueChannel, QueueChannel]:
    """Two connected endpoints (coordinator side, worker side)."""
    a, b = queue.Queue(), queue.Queue()
    return QueueChannel(a, b), QueueChannel(b, a)


class SocketChannel(Channel):
    def __init__(self, sock: socket.socket):
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock = sock

    def send(self, frame: bytes) -> None:
        try:
            self._sock.sendall(frame)
        except OSError as exc:
            raise ProtocolError(f"send failed: {exc}") from exc

    def _read(self, n: int) -> bytes:
        chunks = []
        while n:
            try:
                chunk = self._sock.recv(min(n, 1 << 20))
            except socket.timeout:
                raise ProtocolError("timed out waiting for a frame") from None
            except OSError as exc:
                raise ProtocolError(f"receive failed: {exc}") from exc
            if not chunk:
                raise ProtocolError("peer closed the connection")
            chunks.append(chunk)
            n -= len(chunk)
        return b"".join(chunks)

    def recv(self, timeout: float | None = DEFAULT_TIMEOUT) -> bytes:
        self._sock.settimeout(timeout)
        header = self._read(HEADER.size)
        length, _ = split_header(header)
        return header + self._read(length)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.strip().rpartition(":")
    if not sep or not host or not port.isdigit():
        raise ValueError(f"expected host:port, got {text!r}")
    return host, int(port)


def parse_workers(text: str) -> list[tuple[str, int]]:
    """Comma-separated host:port list, as in --workers or DDW_WORKERS."""
    items = [s for s in text.split(",") if s.strip()]
    if not items:
        raise ValueError("empty worker list")
    return [parse_address(s) for s in items]


def connect(address: tuple[str, int], timeout: float = DEFAULT_TIMEOUT) -> SocketChannel:
    sock = socket.create_connection(address, timeout=timeout)
    return SocketChannel(sock)
