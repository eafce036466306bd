"""Deterministic staged vision backbone with four patch-merging boundaries.

The backbone stands in for a hierarchical transformer at desk scale: a patch
embedding followed by stages whose transitions halve each spatial dimension
and double the channel count. Stage boundaries are the split candidates; a
head/tail pair cut at boundary ``l`` composes bit-exactly to the monolithic
forward pass, which is what split execution relies on. Weights are seeded
pseudo-random, so no training artifacts or ML framework are involved.

Split index convention: ``0`` runs everything on the device (nothing is
transmitted), ``1..num_stages`` cut after the corresponding stage, and
``num_stages + 1`` transmits the raw input for server-only execution.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import InvalidSplitError, ShapeMismatchError
from .rng import SplitMix64, derive_seed

SPLIT_LOCAL = 0


def _numel(shape: tuple[int, ...]) -> int:
    return reduce(lambda a, b: a * b, shape, 1)


@dataclass(frozen=True, eq=False)
class Tensor:
    """N-dimensional FP32 array: explicit shape plus a flat row-major buffer."""

    shape: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        if any(int(d) < 1 for d in self.shape):
            raise ShapeMismatchError(f"dimension sizes must be >= 1, got {self.shape}")
        if self.data.ndim != 1 or self.data.dtype != np.float32:
            raise ShapeMismatchError("tensor buffer must be a flat float32 array")
        if self.data.size != _numel(self.shape):
            raise ShapeMismatchError(
                f"buffer has {self.data.size} elements, shape {self.shape} "
                f"needs {_numel(self.shape)}"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Tensor":
        a = np.ascontiguousarray(arr, dtype=np.float32)
        return cls(tuple(int(d) for d in a.shape), a.reshape(-1))

    def as_array(self) -> np.ndarray:
        return self.data.reshape(self.shape)

    @property
    def nbytes(self) -> int:
        return self.data.size * 4


@dataclass(frozen=True)
class BackboneConfig:
    num_stages: int = 4
    patch_size: int = 4
    embed_channels: int = 96
    in_channels: int = 3
    readout_dim: int = 16
    seed: int = 42

    @property
    def server_split(self) -> int:
        return self.num_stages + 1

    @property
    def spatial_divisor(self) -> int:
        # merges happen between stages, so num_stages - 1 halvings after embedding
        return self.patch_size * 2 ** (self.num_stages - 1)


class StagedBackbone:
    """Pure, seeded backbone; all forward passes are deterministic functions."""

    def __init__(self, config: BackboneConfig | None = None):
        self.config = config or BackboneConfig()
        c = self.config
        if c.num_stages < 1 or c.patch_size < 1 or c.embed_channels < 1:
            raise ShapeMismatchError("backbone geometry fields must be positive")
        self._embed_w = self._weights("embed", c.embed_channels, c.in_channels * c.patch_size**2)
        self._stage_w = []
        ch = c.embed_channels
        for s in range(1, c.num_stages + 1):
            if s == 1:
                self._stage_w.append(self._weights(f"stage{s}", ch, ch))
            else:
                self._stage_w.append(self._weights(f"stage{s}", 2 * ch, ch))
                ch *= 2
        self._readout_w = self._weights("readout", c.readout_dim, ch)

    def _weights(self, tag: str, rows: int, fan_in: int) -> np.ndarray:
        rng = SplitMix64(derive_seed(self.config.seed, tag))
        w = rng.fill_uniform(rows * fan_in, -1.0, 1.0) / np.sqrt(fan_in)
        return w.reshape(rows, fan_in).astype(np.float32)

    # -- shape helpers -------------------------------------------------------

    def check_input_shape(self, shape: tuple[int, ...]) -> None:
        c = self.config
        if len(shape) != 3 or shape[0] != c.in_channels:
            raise ShapeMismatchError(
                f"expected input [channels={c.in_channels}, H, W], got {shape}"
            )
        div = c.spatial_divisor
        if shape[1] % div or shape[2] % div:
            raise ShapeMismatchError(
                f"spatial dims {shape[1]}x{shape[2]} must be divisible by {div}"
            )

    def boundary_shape(self, l: int, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        """Activation shape at stage boundary l for a given input shape."""
        c = self.config
        self.check_input_shape(input_shape)
        if not 1 <= l <= c.num_stages:
            raise InvalidSplitError(f"boundary index must be in 1..{c.num_stages}, got {l}")
        f = 2 ** (l - 1)
        return (
            c.embed_channels * f,
            input_shape[1] // c.patch_size // f,
            input_shape[2] // c.patch_size // f,
        )

    # -- forward passes ------------------------------------------------------

    def _embed(self, x: np.ndarray) -> np.ndarray:
        p = self.config.patch_size
        c, h, w = x.shape
        hp, wp = h // p, w // p
        # (c, hp, p, wp, p) -> (hp, wp, c, p, p) -> (hp*wp, c*p*p)
        patches = (
            x.reshape(c, hp, p, wp, p).transpose(1, 3, 0, 2, 4).reshape(hp * wp, c * p * p)
        )
        out = np.tanh(patches @ self._embed_w.T)
        # contiguous layout keeps summation order identical on both sides of a cut
        return np.ascontiguousarray(out.T.reshape(self.config.embed_channels, hp, wp))

    def _stage(self, s: int, a: np.ndarray) -> np.ndarray:
        if s > 1:
            a = 0.25 * (a[:, 0::2, 0::2] + a[:, 1::2, 0::2] + a[:, 0::2, 1::2] + a[:, 1::2, 1::2])
        c, h, w = a.shape
        cols = np.ascontiguousarray(a.reshape(c, h * w).T)
        out = np.tanh(cols @ self._stage_w[s - 1].T)
        return np.ascontiguousarray(out.T.reshape(-1, h, w))

    def _readout(self, a: np.ndarray) -> np.ndarray:
        pooled = a.reshape(a.shape[0], -1).mean(axis=1)
        return (self._readout_w @ pooled).astype(np.float32, copy=False)

    def forward_full(self, x: Tensor) -> Tensor:
        """Monolithic execution: embedding, all stages, detection readout."""
        self.check_input_shape(x.shape)
        a = self._embed(x.as_array())
        for s in range(1, self.config.num_stages + 1):
            a = self._stage(s, a)
        return Tensor.from_array(self._readout(a))

    def forward_head(self, x: Tensor, l: int) -> Tensor:
        """Device-side segment: stages 1..l, returning the boundary activation."""
        if not 1 <= l <= self.config.num_stages:
            raise InvalidSplitError(
                f"head cut must be in 1..{self.config.num_stages}, got {l}"
            )
        self.check_input_shape(x.shape)
        a = self._embed(x.as_array())
        for s in range(1, l + 1):
            a = self._stage(s, a)
        return Tensor.from_array(a)

    def forward_tail(self, activation: Tensor, l: int) -> Tensor:
        """Server-side segment: stages l+1..end plus readout.

        ``l == num_stages + 1`` executes the whole model on a raw input frame.
        """
        c = self.config
        if l == c.server_split:
            return self.forward_full(activation)
        if not 1 <= l <= c.num_stages:
            raise InvalidSplitError(
                f"tail entry must be in 1..{c.num_stages} or {c.server_split}, got {l}"
            )
        if len(activation.shape) != 3:
            raise ShapeMismatchError(f"activation must be rank 3, got {activation.shape}")
        ch, h, w = activation.shape
        expect_ch = c.embed_channels * 2 ** (l - 1)
        merges_left = c.num_stages - l
        if ch != expect_ch:
            raise ShapeMismatchError(
                f"boundary {l} expects {expect_ch} channels, got {ch}"
            )
        if h % 2**merges_left or w % 2**merges_left:
            raise ShapeMismatchError(
                f"boundary {l} spatial dims {h}x{w} not divisible by {2**merges_left}"
            )
        a = activation.as_array()
        for s in range(l + 1, c.num_stages + 1):
            a = self._stage(s, a)
        return Tensor.from_array(self._readout(a))
