"""TCP transport for running client and cloud as separate processes."""

from __future__ import annotations

import logging
import socket
from typing import Optional

from ..errors import ConfigurationError, SerializationError
from .client import Channel
from .cloud import CloudService
from .messages import frame_length

log = logging.getLogger(__name__)


def parse_address(addr: str) -> tuple:
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigurationError(f"address {addr!r} must look like host:port")
    return host or "127.0.0.1", int(port)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(1 << 20, n - len(buf)))
        if not chunk:
            raise SerializationError(f"connection closed after {len(buf)} of {n} bytes")
        buf += chunk
    return bytes(buf)


def recv_frame(sock: socket.socket) -> bytes:
    head = _recv_exact(sock, 5)
    return head + _recv_exact(sock, frame_length(head) - 5)


def send_frame(sock: socket.socket, frame: bytes) -> None:
    sock.sendall(frame)


class SocketChannel(Channel):
    def __init__(self, addr: str, timeout: Optional[float] = 600.0):
        super().__init__()
        self.sock = socket.create_connection(parse_address(addr), timeout=timeout)

    def _exchange(self, frame: bytes) -> bytes:
        send_frame(self.sock, frame)
        return recv_frame(self.sock)

    def close(self) -> None:
        self.sock.close()


def serve(addr: str, n_workers: Optional[int] = None, connections: int = 1,
          ready=None) -> None:
    """Serve ``connections`` client sessions sequentially, one cloud per session.

    ``ready`` (optional callable) receives the bound ``(host, port)`` once listening.
    """
    host, port = parse_address(addr)
    with socket.create_server((host, port)) as srv:
        if ready is not None:
            ready(srv.getsockname()[:2])
        for _ in range(connections):
            conn, peer = srv.accept()
            log.info("client connected from %s", peer)
            service = CloudService(n_workers)
            with conn:
                while not service.closed:
                    try:
                        frame = recv_frame(conn)
                    except SerializationError:
                        log.info("client disconnected")
                        break
                    send_frame(conn, service.handle(frame))
