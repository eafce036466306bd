"""Per-frame delay and device-energy evaluation from a calibrated profile.

Delay decomposes additively: device compute, codec, uplink transmission of
the split's payload at the current throughput, user-plane path delay, and
server compute. Device energy decomposes into compute plus an
interference-dependent transmission term interpolated from the profile's
per-level table. Local execution (split 0) touches the network in neither.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelState, PathConfig
from .profile import ModelProfile


@dataclass(frozen=True)
class DelayReport:
    split_index: int
    total_ms: float
    head_ms: float
    codec_ms: float
    tx_ms: float
    path_ms: float
    tail_ms: float


@dataclass(frozen=True)
class EnergyReport:
    split_index: int
    total_wh: float
    compute_wh: float
    tx_wh: float


def transmission_ms(payload_bytes: int, uplink_mbps: float) -> float:
    """Serialization time of a payload at the given uplink rate."""
    return 8.0 * payload_bytes / (uplink_mbps * 1000.0)


def e2e_delay(
    profile: ModelProfile,
    l: int,
    ch: ChannelState,
    path: PathConfig,
    path_delay_ms: float | None = None,
) -> DelayReport:
    """End-to-end per-frame delay for split l under a channel state.

    path_delay_ms overrides the deterministic mean path delay with a sampled
    value (for jittered runs); it is ignored for local execution.
    """
    sc = profile.require_split(l)
    payload = profile.payload_bytes(l)
    if l == 0:
        tx = 0.0
        path_ms = 0.0
    else:
        tx = transmission_ms(payload, ch.uplink_mbps)
        path_ms = path.mean_delay_ms(2) if path_delay_ms is None else path_delay_ms
    head = sc.head_compute_ms
    codec = sc.codec_ms
    tail = sc.tail_compute_ms
    total = head + codec + tx + path_ms + tail
    return DelayReport(l, total, head, codec, tx, path_ms, tail)


def ue_energy(profile: ModelProfile, l: int, ch: ChannelState) -> EnergyReport:
    """Device energy per frame: compute plus interference-dependent transmission."""
    sc = profile.require_split(l)
    if l == 0:
        tx = 0.0
    else:
        tx = float(
            np.interp(ch.interference_db, profile.tmap.grid_db, sc.tx_energy_wh)
        )
    compute = sc.head_energy_wh
    return EnergyReport(l, compute + tx, compute, tx)
