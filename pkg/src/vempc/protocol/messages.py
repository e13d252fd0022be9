"""Protocol messages and their binary payloads.

A frame is ``u32 length | u8 kind | payload`` where ``length`` counts the kind
byte and the payload.  Ciphertexts travel as backend blobs, each prefixed by
its u32 length.  Every message after setup carries the 64-bit params hash.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

from ..errors import SerializationError

KIND_SETUP = 1
KIND_OFFLINE = 2
KIND_OFFLINE_ACK = 3
KIND_REQUEST = 4
KIND_RESPONSE = 5
KIND_ERROR = 6
KIND_BYE = 7

_FRAME = struct.Struct("<IB")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def params_hash(descriptor: bytes, dim: int, p: int) -> int:
    """FNV-1a over the backend descriptor and the problem dimensions."""
    return fnv1a64(descriptor + struct.pack("<II", int(dim), int(p)))


class _Buf:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise SerializationError("message payload is truncated")
        out = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return out

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def blob(self) -> bytes:
        return self.take(self.u32())

    def done(self) -> None:
        if self.pos != len(self.data):
            raise SerializationError("trailing bytes in message payload")


def _blob(b: bytes) -> bytes:
    return _U32.pack(len(b)) + b


@dataclass
class SetupMsg:
    """Public configuration and evaluation keys; the cloud's only key material."""

    descriptor: bytes
    eval_keys: bytes
    config: dict
    kind = KIND_SETUP

    def payload(self) -> bytes:
        cfg = json.dumps(self.config, sort_keys=True).encode()
        return _blob(self.descriptor) + _blob(cfg) + _blob(self.eval_keys)

    @classmethod
    def parse(cls, data: bytes) -> "SetupMsg":
        b = _Buf(data)
        desc, cfg, keys = b.blob(), b.blob(), b.blob()
        b.done()
        return cls(desc, keys, json.loads(cfg.decode()))


@dataclass
class OfflineClientMsg:
    """Column-wise encryptions of ``L_U`` and ``Gamma``, replicated per segment."""

    params_hash: int
    lu_columns: list
    gamma_columns: list
    kind = KIND_OFFLINE

    def payload(self) -> bytes:
        parts = [_U64.pack(self.params_hash), _U32.pack(len(self.lu_columns)),
                 _U32.pack(len(self.gamma_columns))]
        parts += [_blob(c) for c in self.lu_columns + self.gamma_columns]
        return b"".join(parts)

    @classmethod
    def parse(cls, data: bytes) -> "OfflineClientMsg":
        b = _Buf(data)
        h, nl, ng = b.u64(), b.u32(), b.u32()
        cols = [b.blob() for _ in range(nl + ng)]
        b.done()
        return cls(h, cols[:nl], cols[nl:])


@dataclass
class OfflineAck:
    params_hash: int
    batches: list = field(default_factory=list)
    kind = KIND_OFFLINE_ACK

    def payload(self) -> bytes:
        parts = [_U64.pack(self.params_hash), _U32.pack(len(self.batches))]
        parts += [struct.pack("<II", s, c) for s, c in self.batches]
        return b"".join(parts)

    @classmethod
    def parse(cls, data: bytes) -> "OfflineAck":
        b = _Buf(data)
        h, n = b.u64(), b.u32()
        batches = [struct.unpack("<II", b.take(8)) for _ in range(n)]
        b.done()
        return cls(h, [tuple(x) for x in batches])


@dataclass
class OnlineRequest:
    params_hash: int
    step: int
    mean_ct: bytes
    offset_ct: bytes
    kind = KIND_REQUEST

    def payload(self) -> bytes:
        return (_U64.pack(self.params_hash) + _U64.pack(self.step)
                + _blob(self.mean_ct) + _blob(self.offset_ct))

    @classmethod
    def parse(cls, data: bytes) -> "OnlineRequest":
        b = _Buf(data)
        out = cls(b.u64(), b.u64(), b.blob(), b.blob())
        b.done()
        return out


@dataclass
class OnlineResponse:
    """Per worker-batch ``(start, count, U ciphertext, score ciphertext)``."""

    params_hash: int
    step: int
    batches: list
    cloud_ms: float = 0.0
    kind = KIND_RESPONSE

    def payload(self) -> bytes:
        parts = [_U64.pack(self.params_hash), _U64.pack(self.step),
                 struct.pack("<d", self.cloud_ms), _U32.pack(len(self.batches))]
        for start, count, u_ct, s_ct in self.batches:
            parts.append(struct.pack("<II", start, count) + _blob(u_ct) + _blob(s_ct))
        return b"".join(parts)

    @classmethod
    def parse(cls, data: bytes) -> "OnlineResponse":
        b = _Buf(data)
        h, step = b.u64(), b.u64()
        (ms,) = struct.unpack("<d", b.take(8))
        batches = []
        for _ in range(b.u32()):
            start, count = struct.unpack("<II", b.take(8))
            batches.append((start, count, b.blob(), b.blob()))
        b.done()
        return cls(h, step, batches, ms)


@dataclass
class ErrorMsg:
    text: str
    kind = KIND_ERROR

    def payload(self) -> bytes:
        return self.text.encode()

    @classmethod
    def parse(cls, data: bytes) -> "ErrorMsg":
        return cls(bytes(data).decode(errors="replace"))


@dataclass
class ByeMsg:
    kind = KIND_BYE

    def payload(self) -> bytes:
        return b""

    @classmethod
    def parse(cls, data: bytes) -> "ByeMsg":
        if data:
            raise SerializationError("bye carries no payload")
        return cls()


MESSAGE_TYPES = {cls.kind: cls for cls in (SetupMsg, OfflineClientMsg, OfflineAck,
                                           OnlineRequest, OnlineResponse, ErrorMsg, ByeMsg)}


def transport_frame(msg) -> bytes:
    body = msg.payload()
    return _FRAME.pack(len(body) + 1, msg.kind) + body


def parse_frame(frame: bytes):
    """Parse exactly one frame; raises on truncation, trailing data or unknown kind."""
    if len(frame) < _FRAME.size:
        raise SerializationError("frame header is truncated")
    length, kind = _FRAME.unpack_from(frame)
    if len(frame) - 4 < length:
        raise SerializationError(f"frame truncated: need {length} bytes, have {len(frame) - 4}")
    if len(frame) - 4 > length:
        raise SerializationError("trailing bytes after frame")
    cls = MESSAGE_TYPES.get(kind)
    if cls is None:
        raise SerializationError(f"unknown message kind {kind}")
    return cls.parse(frame[_FRAME.size:])


def frame_length(header: bytes) -> int:
    """Total frame size given its first four bytes."""
    return 4 + _U32.unpack(header[:4])[0]
