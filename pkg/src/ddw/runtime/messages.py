"""Binary wire format.

    frame   = b"DDW1" | u32 payload length | u8 tag | payload      (little-endian)
    payload = u32 outer | u32 inner | message fields
    vector  = u32 length | length x f64
    scalar  = f64;  ids and counts are u32; flags/codes are u8/u16

Every message carries the (outer, inner) epoch it belongs to.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from ddw.errors import ProtocolError

MAGIC = b"DDW1"
HEADER = struct.Struct("<4sIB")
EPOCH = struct.Struct("<II")
U32 = struct.Struct("<I")
F64 = struct.Struct("<d")


class Tag(enum.IntEnum):
    SEED_REQUEST = 1
    SEED_RESULT = 2
    BROADCAST_PI = 3
    WORKER_DUAL = 4
    PRICE_REQUEST = 5
    PRICE_RESULT = 6
    RECOVER_REQUEST = 7
    RECOVER_RESULT = 8
    SHUTDOWN = 9
    ERROR = 10
    HELLO = 11


class ErrorCode(enum.IntEnum):
    MALFORMED = 1
    OUT_OF_ORDER = 2
    SOLVER_FAILURE = 3
    UNKNOWN_WORKER = 4
    INTERNAL = 5


@dataclass
class SeedRequest:
    outer: int = 0
    inner: int = 0


@dataclass
class SeedResult:
    outer: int
    inner: int
    worker: int
    cost: float
    link: np.ndarray


@dataclass
class BroadcastPi:
    outer: int
    inner: int
    phase: int
    rho: float
    pi: np.ndarray


@dataclass
class WorkerDual:
    outer: int
    inner: int
    worker: int
    u_n: float
    lam_sum: float
    pi_n: np.ndarray


@dataclass
class PriceRequest:
    outer: int
    inner: int
    worker: int
    u_hat: float
    eps_d: float
    pi: np.ndarray


@dataclass
class PriceResult:
    outer: int
    inner: int
    worker: int
    z_sep: float
    threshold: float
    accepted: bool
    duplicate: bool
    cost: float = 0.0
    link: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class RecoverRequest:
    outer: int
    inner: int


@dataclass
class RecoverResult:
    outer: int
    inner: int
    worker: int
    host: int
    lam_sum: float
    t_u: float
    t_c: float
    t_s: float
    x: np.ndarray


@dataclass
class Shutdown:
    outer: int = 0
    inner: int = 0


@dataclass
class Error:
    outer: int
    inner: int
    code: int
    detail: str


@dataclass
class Hello:
    outer: int
    inner: int
    host: int
    workers: list


class _Writer:
    def __init__(self):
        self.parts = []

    def u8(self, v):
        self.parts.append(struct.pack("<B", v))

    def u16(self, v):
        self.parts.append(struct.pack("<H", v))

    def u32(self, v):
        self.parts.append(U32.pack(v))

    def f64(self, v):
        self.parts.append(F64.pack(v))

    def vec(self, v):
        arr = np.ascontiguousarray(v, dtype="<f8")
        self.parts.append(U32.pack(arr.size))
        self.parts.append(arr.tobytes())

    def text(self, s):
        raw = s.encode("utf-8")
        self.parts.append(U32.pack(len(raw)))
        self.parts.append(raw)

    def bytes(self):
        return b"".join(self.parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def _take(self, n):
        if self.pos + n > len(self.buf):
            raise ProtocolError("truncated payload")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self):
        return self._take(1)[0]

    def u16(self):
        return struct.unpack("<H", self._take(2))[0]

    def u32(self):
        return U32.unpack(self._take(4))[0]

    def f64(self):
        return F64.unpack(self._take(8))[0]

    def vec(self):
        n = self.u32()
        return np.frombuffer(self._take(8 * n), dtype="<f8").astype(float)

    def text(self):
        n = self.u32()
        return bytes(self._take(n)).decode("utf-8")

    def done(self):
        if self.pos != len(self.buf):
            raise ProtocolError(f"{len(self.buf) - self.pos} trailing bytes in payload")


_TAG_OF = {
    SeedRequest: Tag.SEED_REQUEST,
    SeedResult: Tag.SEED_RESULT,
    BroadcastPi: Tag.BROADCAST_PI,
    WorkerDual: Tag.WORKER_DUAL,
    PriceRequest: Tag.PRICE_REQUEST,
    PriceResult: Tag.PRICE_RESULT,
    RecoverRequest: Tag.RECOVER_REQUEST,
    RecoverResult: Tag.RECOVER_RESULT,
    Shutdown: Tag.SHUTDOWN,
    Error: Tag.ERROR,
    Hello: Tag.HELLO,
}


def encode(msg) -> bytes:
    w = _Writer()
    w.parts.append(EPOCH.pack(msg.outer, msg.inner))
    tag = _TAG_OF[type(msg)]
    if tag is Tag.SEED_RESULT:
        w.u32(msg.worker)
        w.f64(msg.cost)
        w.vec(msg.link)
    elif tag is Tag.BROADCAST_PI:
        w.u8(msg.phase)
        w.f64(msg.rho)
        w.vec(msg.pi)
    elif tag is Tag.WORKER_DUAL:
        w.u32(msg.worker)
        w.f64(msg.u_n)
        w.f64(msg.lam_sum)
        w.vec(msg.pi_n)
    elif tag is Tag.PRICE_REQUEST:
        w.u32(msg.worker)
        w.f64(msg.u_hat)
        w.f64(msg.eps_d)
        w.vec(msg.pi)
    elif tag is Tag.PRICE_RESULT:
        w.u32(msg.worker)
        w.f64(msg.z_sep)
        w.f64(msg.threshold)
        w.u8((1 if msg.accepted else 0) | (2 if msg.duplicate else 0))
        if msg.accepted:
            w.f64(msg.cost)
            w.vec(msg.link)
    elif tag is Tag.RECOVER_RESULT:
        w.u32(msg.worker)
        w.u32(msg.host)
        w.f64(msg.lam_sum)
        w.f64(msg.t_u)
        w.f64(msg.t_c)
        w.f64(msg.t_s)
        w.vec(msg.x)
    elif tag is Tag.ERROR:
        w.u16(msg.code)
        w.text(msg.detail)
    elif tag is Tag.HELLO:
        w.u32(msg.host)
        w.u32(len(msg.workers))
        for wid in msg.workers:
            w.u32(wid)
    payload = w.bytes()
    return HEADER.pack(MAGIC, len(payload), int(tag)) + payload


def decode_payload(tag: int, payload: bytes):
    r = _Reader(payload)
    outer, inner = r.u32(), r.u32()
    try:
        tag = Tag(tag)
    except ValueError:
        raise ProtocolError(f"unknown message tag {tag}") from None
    if tag is Tag.SEED_REQUEST:
        msg = SeedRequest(outer, inner)
    elif tag is Tag.SEED_RESULT:
        msg = SeedResult(outer, inner, r.u32(), r.f64(), r.vec())
    elif tag is Tag.BROADCAST_PI:
        msg = BroadcastPi(outer, inner, r.u8(), r.f64(), r.vec())
    elif tag is Tag.WORKER_DUAL:
        msg = WorkerDual(outer, inner, r.u32(), r.f64(), r.f64(), r.vec())
    elif tag is Tag.PRICE_REQUEST:
        msg = PriceRequest(outer, inner, r.u32(), r.f64(), r.f64(), r.vec())
    elif tag is Tag.PRICE_RESULT:
        worker, z, thr, flags = r.u32(), r.f64(), r.f64(), r.u8()
        msg = PriceResult(outer, inner, worker, z, thr, bool(flags & 1), bool(flags & 2))
        if msg.accepted:
            msg.cost = r.f64()
            msg.link = r.vec()
    elif tag is Tag.RECOVER_REQUEST:
        msg = RecoverRequest(outer, inner)
    elif tag is Tag.RECOVER_RESULT:
        msg = RecoverResult(outer, inner, r.u32(), r.u32(), r.f64(), r.f64(), r.f64(), r.f64(), r.vec())
    elif tag is Tag.SHUTDOWN:
        msg = Shutdown(outer, inner)
    elif tag is Tag.ERROR:
        msg = Error(outer, inner, r.u16(), r.text())
    else:
        host, count = r.u32(), r.u32()
        msg = Hello(outer, inner, host, [r.u32() for _ in range(count)])
    r.done()
    return msg


def split_header(header: bytes) -> tuple[int, int]:
    """Validate a 9-byte frame header; return (payload length, tag)."""
    if len(header) != HEADER.size:
        raise ProtocolError("short frame header")
    magic, length, tag = HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad frame magic {magic!r}")
    return length, tag


def decode(frame: bytes):
    length, tag = split_header(frame[: HEADER.size])
    payload = frame[HEADER.size :]
    if len(payload) != length:
        raise ProtocolError(f"frame declares {length} payload bytes, carries {len(payload)}")
    return decode_payload(tag, payload)
