"""Activation compression: per-tensor INT8 affine quantization plus DEFLATE.

The uplink payload is a self-describing container: quantization parameters,
shape, a zlib-wrapped DEFLATE stream of the INT8 buffer, and a CRC-32 over
the compressed bytes. A bypass mode ships the raw FP32 buffer through the
same container for bit-exact transport.

Container layout (all integers little-endian):

    magic "SACT" | version u8 | flags u8 | split_index u8 | ndim u8 |
    dims u32 x ndim | scale f32 | zero_point i32 | raw_len u32 |
    payload_len u32 | payload | crc32 u32

flags bit0 set means the payload inflates to an INT8 buffer; clear means a
raw little-endian FP32 buffer (quantization bypass).
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import (
    ContainerFormatError,
    CrcMismatchError,
    InflateFailureError,
    InvalidParameterError,
    LengthMismatchError,
    NonFiniteInputError,
)
from .model import Tensor

MAGIC = b"SACT"
VERSION = 1
FLAG_QUANTIZED = 0x01

_PREFIX = struct.Struct("<4sBBBB")
_PARAMS = struct.Struct("<fiII")
DEFAULT_LEVEL = 6


@dataclass(frozen=True)
class QuantParams:
    """Affine INT8 mapping q = round(x / scale) + zero_point."""

    scale: float
    zero_point: int

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidParameterError(f"scale must be positive, got {self.scale}")
        if not -(2**31) <= self.zero_point < 2**31:
            raise InvalidParameterError("zero_point not representable as i32")


@dataclass(frozen=True)
class CompressedActivation:
    split_index: int
    shape: tuple[int, ...]
    quant: QuantParams
    payload: bytes
    payload_crc32: int
    raw_len: int
    quantized: bool = True

    def numel(self) -> int:
        return reduce(lambda a, b: a * b, self.shape, 1)

    def to_bytes(self) -> bytes:
        flags = FLAG_QUANTIZED if self.quantized else 0
        head = _PREFIX.pack(MAGIC, VERSION, flags, self.split_index, len(self.shape))
        dims = struct.pack(f"<{len(self.shape)}I", *self.shape)
        params = _PARAMS.pack(
            self.quant.scale, self.quant.zero_point, self.raw_len, len(self.payload)
        )
        return head + dims + params + self.payload + struct.pack("<I", self.payload_crc32)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "CompressedActivation":
        if len(buf) < _PREFIX.size:
            raise ContainerFormatError("container shorter than fixed header")
        magic, version, flags, split_index, ndim = _PREFIX.unpack_from(buf, 0)
        if magic != MAGIC:
            raise ContainerFormatError(f"bad container magic {magic!r}")
        if version != VERSION:
            raise ContainerFormatError(f"unsupported container version {version}")
        off = _PREFIX.size
        dims_end = off + 4 * ndim
        if len(buf) < dims_end + _PARAMS.size:
            raise ContainerFormatError("container header truncated")
        shape = struct.unpack_from(f"<{ndim}I", buf, off)
        scale, zero_point, raw_len, payload_len = _PARAMS.unpack_from(buf, dims_end)
        off = dims_end + _PARAMS.size
        if len(buf) < off + payload_len + 4:
            # whatever bytes survived cannot match the stored checksum
            raise CrcMismatchError("container truncated inside payload")
        payload = buf[off : off + payload_len]
        (crc,) = struct.unpack_from("<I", buf, off + payload_len)
        return cls(
            split_index=split_index,
            shape=tuple(int(d) for d in shape),
            quant=QuantParams(scale, zero_point),
            payload=payload,
            payload_crc32=crc,
            raw_len=raw_len,
            quantized=bool(flags & FLAG_QUANTIZED),
        )


def quantize_int8(t: Tensor) -> tuple[np.ndarray, QuantParams]:
    """Per-tensor affine FP32 -> INT8.

    scale = (max - min) / 255 with the minimum mapping to -128. Constant
    tensors fall back to scale 1 / zero_point 0, so only integer-valued
    constants survive the round trip exactly; backbone activations never
    hit that case.
    """
    x = t.data
    if not np.isfinite(x).all():
        raise NonFiniteInputError("tensor contains NaN or Inf")
    lo = float(x.min())
    hi = float(x.max())
    if hi == lo:
        q = np.clip(np.rint(x), -128, 127).astype(np.int8)
        return q, QuantParams(1.0, 0)
    # store scale as f32 rounded up so 255 steps always cover [lo, hi] and the
    # half-step error bound holds strictly
    s32 = np.float32((hi - lo) / 255.0)
    if float(s32) * 255.0 < hi - lo:
        s32 = np.nextafter(s32, np.float32(np.inf))
    scale = float(s32)
    zero_point = int(-128 - np.rint(lo / scale))
    qp = QuantParams(scale, zero_point)
    q = np.clip(np.rint(x.astype(np.float64) / scale) + zero_point, -128, 127)
    return q.astype(np.int8), qp


def dequantize(buf: np.ndarray, q: QuantParams, shape: tuple[int, ...]) -> Tensor:
    n = reduce(lambda a, b: a * b, shape, 1)
    if buf.size != n:
        raise LengthMismatchError(f"buffer has {buf.size} values, shape needs {n}")
    x = ((buf.astype(np.float64) - q.zero_point) * q.scale).astype(np.float32)
    return Tensor(tuple(shape), x)


def encode_activation(
    t: Tensor,
    split_index: int,
    level: int = DEFAULT_LEVEL,
    quantized: bool = True,
) -> CompressedActivation:
    """Quantize (unless bypassed) and DEFLATE a tensor into a container."""
    if not 1 <= level <= 9:
        raise InvalidParameterError(f"compression level must be in 1..9, got {level}")
    if quantized:
        q, qp = quantize_int8(t)
        raw = q.tobytes()
    else:
        qp = QuantParams(1.0, 0)
        raw = t.data.astype("<f4", copy=False).tobytes()
    payload = zlib.compress(raw, level)
    return CompressedActivation(
        split_index=split_index,
        shape=t.shape,
        quant=qp,
        payload=payload,
        payload_crc32=zlib.crc32(payload),
        raw_len=len(raw),
        quantized=quantized,
    )


def decode_activation(c: CompressedActivation) -> Tensor:
    """CRC-check, inflate, and dequantize a container back into a tensor."""
    if zlib.crc32(c.payload) != c.payload_crc32:
        raise CrcMismatchError("payload checksum mismatch")
    try:
        raw = zlib.decompress(c.payload)
    except zlib.error as exc:
        raise InflateFailureError(f"inflate failed: {exc}") from exc
    if len(raw) != c.raw_len:
        raise LengthMismatchError(
            f"inflated to {len(raw)} bytes, container declares {c.raw_len}"
        )
    n = c.numel()
    if c.quantized:
        if c.raw_len != n:
            raise LengthMismatchError(
                f"INT8 buffer of {c.raw_len} bytes cannot fill shape {c.shape}"
            )
        return dequantize(np.frombuffer(raw, dtype=np.int8), c.quant, c.shape)
    if c.raw_len != 4 * n:
        raise LengthMismatchError(
            f"FP32 buffer of {c.raw_len} bytes cannot fill shape {c.shape}"
        )
    return Tensor(c.shape, np.frombuffer(raw, dtype="<f4"))
