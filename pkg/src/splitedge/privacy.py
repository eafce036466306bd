"""Privacy leakage as distance correlation between inputs and what is sent.

Uses the biased V-statistic form of distance correlation over Euclidean
distance matrices: both matrices are double-centered and dCor^2 is the mean
elementwise product normalized by the geometric mean of the distance
variances. Values are in [0, 1]; 0 for independent-ish data, 1 when the
transmitted representation is the input itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatchError, InvalidSplitError, SampleCountError
from .model import StagedBackbone, Tensor
from .rng import SplitMix64, derive_seed

MAX_COORDS = 4096


def _double_center(d: np.ndarray) -> np.ndarray:
    return d - d.mean(axis=0, keepdims=True) - d.mean(axis=1, keepdims=True) + d.mean()


def distance_correlation(x: np.ndarray, y: np.ndarray) -> float:
    """Distance correlation between paired sample matrices [n x p] and [n x q]."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"paired samples required, got {x.shape[0]} vs {y.shape[0]} rows"
        )
    if x.shape[0] < 2:
        raise SampleCountError("need at least 2 samples")
    a = _double_center(cdist(x, x))
    b = _double_center(cdist(y, y))
    dvar_x = float((a * a).mean())
    dvar_y = float((b * b).mean())
    denom = dvar_x * dvar_y
    if denom <= 0.0:
        return 0.0
    dcov2 = float((a * b).mean())
    r2 = dcov2 / np.sqrt(denom)
    return float(np.sqrt(max(r2, 0.0)))


def subsample_coords(flat: np.ndarray, max_coords: int = MAX_COORDS, seed: int = 0) -> np.ndarray:
    """Deterministic strided subsample of a flattened observation.

    Keeps cost O(n^2 * max_coords); the stride offset is seeded so different
    evaluations can probe different coordinate sets reproducibly.
    """
    n = flat.size
    if n <= max_coords:
        return flat
    stride = -(-n // max_coords)  # ceil
    offset = SplitMix64(derive_seed(seed, "subsample", n)).next_u64() % stride
    return flat[offset::stride][:max_coords]


@dataclass(frozen=True)
class LeakageScore:
    value: float
    split_index: int
    sample_count: int


def leakage_of_split(
    model: StagedBackbone,
    frames: list[Tensor],
    l: int,
    max_coords: int = MAX_COORDS,
    seed: int = 0,
) -> LeakageScore:
    """Leakage for split l over a set of frames.

    Local execution transmits nothing (0 by definition); raw-input offload
    transmits the frames themselves, whose self distance correlation is 1.
    Intermediate splits compare flattened inputs against flattened boundary
    activations. Channel state plays no role: leakage depends on what is
    transmitted, not on how it is carried.
    """
    server = model.config.server_split
    if not 0 <= l <= server:
        raise InvalidSplitError(f"split must be in 0..{server}, got {l}")
    if len(frames) < 2:
        raise SampleCountError("need at least 2 frames")
    if l == 0:
        return LeakageScore(0.0, l, len(frames))
    if l == server:
        return LeakageScore(1.0, l, len(frames))
    x = np.stack([subsample_coords(f.data, max_coords, seed) for f in frames])
    y = np.stack(
        [subsample_coords(model.forward_head(f, l).data, max_coords, seed) for f in frames]
    )
    return LeakageScore(distance_correlation(x, y), l, len(frames))
