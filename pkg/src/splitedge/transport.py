"""Two-process split execution over a byte-stream socket.

Frames carry a fixed little-endian header, a type-dependent body, and a
CRC-32 of the body:

    magic "SPLF" | version u8 | type u8 | session u64 | seq u64 |
    body_len u32 | body | crc32(body) u32

The head client runs the device-side stages, ships encoded activations, and
waits for the result of each frame before sending the next (stop-and-wait,
matching per-frame delay measurement). The tail server completes inference
and answers with the result vector; malformed inputs produce an in-band
ERROR frame for that sequence number and the session continues, so a bad
video frame is skipped rather than tearing the session down.
"""

from __future__ import annotations

import socket
import struct
import threading
import time
import zlib
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .channel import PathConfig
from .codec import CompressedActivation, decode_activation, encode_activation
from .errors import (
    BadMagicError,
    BadVersionError,
    CodecError,
    CrcMismatchError,
    InvalidSplitError,
    ProtocolError,
    ShapeMismatchError,
    TransportError,
    TruncatedFrameError,
)
from .model import StagedBackbone, Tensor
from .rng import SplitMix64, derive_seed

MAGIC = b"SPLF"
VERSION = 1
_HEADER = struct.Struct("<4sBBQQI")


class FrameType(IntEnum):
    HELLO = 1
    ACTIVATION = 2
    RESULT = 3
    ERROR = 4
    BYE = 5


@dataclass(frozen=True)
class Frame:
    ftype: FrameType
    session_id: int
    seq: int
    body: bytes = b""


def encode_frame(f: Frame) -> bytes:
    head = _HEADER.pack(MAGIC, VERSION, int(f.ftype), f.session_id, f.seq, len(f.body))
    return head + f.body + struct.pack("<I", zlib.crc32(f.body))


def decode_frame(buf: bytes) -> Frame:
    if len(buf) < _HEADER.size:
        raise TruncatedFrameError("buffer shorter than frame header")
    magic, version, ftype, session, seq, body_len = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad frame magic {magic!r}")
    if version != VERSION:
        raise BadVersionError(f"unsupported protocol version {version}")
    if len(buf) < _HEADER.size + body_len + 4:
        raise TruncatedFrameError("buffer ends before declared body length")
    body = buf[_HEADER.size : _HEADER.size + body_len]
    (crc,) = struct.unpack_from("<I", buf, _HEADER.size + body_len)
    if zlib.crc32(body) != crc:
        raise CrcMismatchError("frame body checksum mismatch")
    try:
        t = FrameType(ftype)
    except ValueError as exc:
        raise ProtocolError(f"unknown frame type {ftype}") from exc
    return Frame(t, session, seq, body)


def _read_exact(rfile, n: int) -> bytes:
    chunks = b""
    while len(chunks) < n:
        got = rfile.read(n - len(chunks))
        if not got:
            raise TruncatedFrameError("stream closed mid-frame")
        chunks += got
    return chunks


def read_frame(rfile) -> Frame:
    head = _read_exact(rfile, _HEADER.size)
    magic, version, ftype, session, seq, body_len = _HEADER.unpack(head)
    if magic != MAGIC:
        raise BadMagicError(f"bad frame magic {magic!r}")
    if version != VERSION:
        raise BadVersionError(f"unsupported protocol version {version}")
    rest = _read_exact(rfile, body_len + 4)
    return decode_frame(head + rest)


def pack_result(vec: np.ndarray) -> bytes:
    v = np.ascontiguousarray(vec, dtype="<f4")
    return struct.pack("<I", v.size) + v.tobytes()


def parse_result(body: bytes) -> np.ndarray:
    if len(body) < 4:
        raise ProtocolError("result body too short")
    (n,) = struct.unpack_from("<I", body, 0)
    if len(body) != 4 + 4 * n:
        raise ProtocolError("result body length mismatch")
    return np.frombuffer(body, dtype="<f4", offset=4)


def pack_hello(profile_name: str) -> bytes:
    raw = profile_name.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def parse_hello(body: bytes) -> str:
    if len(body) < 2:
        raise ProtocolError("hello body too short")
    (n,) = struct.unpack_from("<H", body, 0)
    if len(body) != 2 + n:
        raise ProtocolError("hello body length mismatch")
    return body[2:].decode("utf-8")


ERR_HANDSHAKE = 1
ERR_BAD_FRAME = 2
ERR_PROCESSING = 3


def pack_error(code: int, message: str) -> bytes:
    return struct.pack("<I", code) + message.encode("utf-8")


def parse_error(body: bytes) -> tuple[int, str]:
    if len(body) < 4:
        raise ProtocolError("error body too short")
    (code,) = struct.unpack_from("<I", body, 0)
    return code, body[4:].decode("utf-8", errors="replace")


# -- tail server --------------------------------------------------------------


class TailServer:
    """Threaded tail-side server; one handler thread per session."""

    def __init__(self, model: StagedBackbone, profile_name: str, host: str, port: int):
        self.model = model
        self.profile_name = profile_name
        self._listener = socket.create_server((host, port))
        self.address = self._listener.getsockname()
        self._accept_thread: threading.Thread | None = None
        self._stopping = threading.Event()

    def start(self) -> None:
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def serve_forever(self) -> None:
        self.start()
        try:
            while not self._stopping.wait(0.5):
                pass
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def stop(self) -> None:
        self._stopping.set()
        try:
            self._listener.close()
        except OSError:
            pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=2.0)

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._session, args=(conn,), daemon=True).start()

    def _session(self, conn: socket.socket) -> None:
        conn.settimeout(60.0)
        rfile = conn.makefile("rb")
        send_lock = threading.Lock()

        def send(frame: Frame) -> None:
            with send_lock:
                conn.sendall(encode_frame(frame))

        session_id = 0
        try:
            hello = read_frame(rfile)
            session_id = hello.session_id
            if hello.ftype is not FrameType.HELLO:
                send(Frame(FrameType.ERROR, session_id, hello.seq, pack_error(ERR_HANDSHAKE, "expected HELLO")))
                return
            client_profile = parse_hello(hello.body)
            if client_profile != self.profile_name:
                send(
                    Frame(
                        FrameType.ERROR,
                        session_id,
                        hello.seq,
                        pack_error(
                            ERR_HANDSHAKE,
                            f"profile mismatch: server={self.profile_name!r} client={client_profile!r}",
                        ),
                    )
                )
                return
            send(Frame(FrameType.HELLO, session_id, hello.seq, pack_hello(self.profile_name)))
            while True:
                try:
                    frame = read_frame(rfile)
                except (BadMagicError, BadVersionError, CrcMismatchError) as exc:
                    # the byte stream is unsynchronized; report once and drop
                    send(Frame(FrameType.ERROR, session_id, 0, pack_error(ERR_BAD_FRAME, str(exc))))
                    return
                if frame.ftype is FrameType.BYE:
                    return
                if frame.ftype is not FrameType.ACTIVATION:
                    send(
                        Frame(
                            FrameType.ERROR,
                            session_id,
                            frame.seq,
                            pack_error(ERR_BAD_FRAME, f"unexpected {frame.ftype.name}"),
                        )
                    )
                    continue
                try:
                    container = CompressedActivation.from_bytes(frame.body)
                    tensor = decode_activation(container)
                    result = self.model.forward_tail(tensor, container.split_index)
                    send(Frame(FrameType.RESULT, session_id, frame.seq, pack_result(result.data)))
                except (CodecError, ShapeMismatchError, InvalidSplitError) as exc:
                    send(
                        Frame(
                            FrameType.ERROR,
                            session_id,
                            frame.seq,
                            pack_error(ERR_PROCESSING, f"{type(exc).__name__}: {exc}"),
                        )
                    )
        except (TruncatedFrameError, OSError):
            pass
        finally:
            try:
                rfile.close()
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass


def serve_tail(
    model: StagedBackbone, profile_name: str, host: str = "127.0.0.1", port: int = 0
) -> TailServer:
    """Bind and return a started tail server (port 0 picks a free port)."""
    try:
        server = TailServer(model, profile_name, host, port)
    except OSError as exc:
        raise TransportError(f"cannot bind {host}:{port}: {exc}") from exc
    server.start()
    return server


# -- head client ---------------------------------------------------------------


@dataclass(frozen=True)
class HeadConfig:
    profile_name: str
    codec_level: int = 6
    quantized: bool = True
    timeout_s: float = 30.0
    inject_path: PathConfig | None = None
    seed: int = 0


@dataclass(frozen=True)
class FrameLog:
    seq: int
    ok: bool
    result: np.ndarray | None
    error: str | None
    head_ms: float
    codec_ms: float
    network_ms: float
    total_ms: float
    body_bytes: int


@dataclass
class HeadRun:
    split: int
    logs: list[FrameLog] = field(default_factory=list)

    @property
    def results(self) -> list[np.ndarray | None]:
        return [log.result for log in self.logs]


def _inject_delay(path: PathConfig | None, rng: SplitMix64) -> None:
    if path is None:
        return
    jitter = rng.uniform(-path.jitter_ms, path.jitter_ms) if path.jitter_ms > 0 else 0.0
    delay_ms = path.extra_oneway_ms + jitter + path.overhead_ms
    if delay_ms > 0:
        time.sleep(delay_ms / 1000.0)


def run_head(
    model: StagedBackbone,
    address: tuple[str, int],
    frames: list[Tensor],
    l: int,
    config: HeadConfig,
) -> HeadRun:
    """Execute frames at split l against a tail server; returns per-frame logs.

    Local mode (l == 0) never touches the network. Raw offload
    (l == num_stages + 1) ships the unmodified frame in the bit-exact
    container. In-band ERROR responses surface as failed frame logs and the
    run continues with the next frame.
    """
    server_split = model.config.server_split
    if not 0 <= l <= server_split:
        raise InvalidSplitError(f"split must be in 0..{server_split}, got {l}")
    run = HeadRun(split=l)

    if l == 0:
        for seq, frame in enumerate(frames, start=1):
            t0 = time.perf_counter()
            result = model.forward_full(frame)
            ms = (time.perf_counter() - t0) * 1e3
            run.logs.append(FrameLog(seq, True, result.as_array(), None, ms, 0.0, 0.0, ms, 0))
        return run

    session_id = SplitMix64(derive_seed(config.seed, "session")).next_u64()
    inject_rng = SplitMix64(derive_seed(config.seed, "inject"))
    try:
        conn = socket.create_connection(address, timeout=config.timeout_s)
    except OSError as exc:
        raise TransportError(f"cannot connect to {address[0]}:{address[1]}: {exc}") from exc
    rfile = conn.makefile("rb")
    try:
        conn.sendall(encode_frame(Frame(FrameType.HELLO, session_id, 0, pack_hello(config.profile_name))))
        ack = read_frame(rfile)
        if ack.ftype is FrameType.ERROR:
            code, msg = parse_error(ack.body)
            raise TransportError(f"handshake rejected: {msg}")
        if ack.ftype is not FrameType.HELLO:
            raise ProtocolError(f"expected HELLO ack, got {ack.ftype.name}")

        for seq, frame in enumerate(frames, start=1):
            t_start = time.perf_counter()
            if l == server_split:
                head_ms = 0.0
                t0 = time.perf_counter()
                container = encode_activation(frame, l, config.codec_level, quantized=False)
                codec_ms = (time.perf_counter() - t0) * 1e3
            else:
                t0 = time.perf_counter()
                activation = model.forward_head(frame, l)
                head_ms = (time.perf_counter() - t0) * 1e3
                t0 = time.perf_counter()
                container = encode_activation(activation, l, config.codec_level, config.quantized)
                codec_ms = (time.perf_counter() - t0) * 1e3
            body = container.to_bytes()
            t0 = time.perf_counter()
            _inject_delay(config.inject_path, inject_rng)
            conn.sendall(encode_frame(Frame(FrameType.ACTIVATION, session_id, seq, body)))
            reply = read_frame(rfile)
            _inject_delay(config.inject_path, inject_rng)
            network_ms = (time.perf_counter() - t0) * 1e3
            total_ms = (time.perf_counter() - t_start) * 1e3
            if reply.ftype is FrameType.RESULT and reply.seq == seq:
                run.logs.append(
                    FrameLog(seq, True, parse_result(reply.body), None, head_ms, codec_ms, network_ms, total_ms, len(body))
                )
            elif reply.ftype is FrameType.ERROR:
                code, msg = parse_error(reply.body)
                run.logs.append(
                    FrameLog(seq, False, None, msg, head_ms, codec_ms, network_ms, total_ms, len(body))
                )
            else:
                raise ProtocolError(
                    f"unexpected reply {reply.ftype.name} seq={reply.seq} for seq={seq}"
                )
        conn.sendall(encode_frame(Frame(FrameType.BYE, session_id, len(frames) + 1)))
    finally:
        try:
            rfile.close()
        except OSError:
            pass
        conn.close()
    return run
