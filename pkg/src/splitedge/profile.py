"""Calibrated per-split cost profile: the data contract for the simulator.

A profile freezes, for every split candidate, the device/server compute
times, codec time, activation byte sizes, device energy, leakage score, and
a per-interference transmission-energy row, plus the shared
interference-to-throughput table. Every numeric group carries a provenance
label: ``paper`` (published measurement), ``calibrated`` (fitted so the cost
model reproduces published numbers), or ``placeholder`` (declared stand-in,
never presented as a measurement).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from .channel import ThroughputMap
from .errors import ProfileError
from .model import BackboneConfig

PROVENANCE_LABELS = ("paper", "calibrated", "placeholder", "measured")


@dataclass(frozen=True)
class SplitCosts:
    head_compute_ms: float
    tail_compute_ms: float
    codec_ms: float
    raw_activation_bytes: int
    compressed_activation_bytes: int
    head_energy_wh: float
    leakage: float
    tx_energy_wh: tuple[float, ...]


@dataclass(frozen=True)
class ModelProfile:
    name: str
    backbone: BackboneConfig
    frame_rate_fps: float
    input_bytes: int
    tmap: ThroughputMap
    splits: dict[int, SplitCosts]
    provenance: dict[str, str] = field(default_factory=dict)

    @property
    def server_split(self) -> int:
        return self.backbone.server_split

    @property
    def candidate_splits(self) -> tuple[int, ...]:
        return tuple(sorted(self.splits))

    def payload_bytes(self, l: int) -> int:
        """Uplink payload for split l: nothing, compressed activation, or raw frame."""
        self.require_split(l)
        if l == 0:
            return 0
        if l == self.server_split:
            return self.input_bytes
        return self.splits[l].compressed_activation_bytes

    def require_split(self, l: int) -> SplitCosts:
        from .errors import UnknownSplitError

        if l not in self.splits:
            raise UnknownSplitError(
                f"split {l} not in profile candidates {self.candidate_splits}"
            )
        return self.splits[l]

    def mean_tx_energy_wh(self, l: int) -> float:
        row = self.require_split(l).tx_energy_wh
        return sum(row) / len(row)

    def provenance_of(self, group: str) -> str:
        return self.provenance.get(group, "calibrated")

    def validate(self) -> None:
        server = self.server_split
        expected = tuple(range(server + 1))
        if self.candidate_splits != expected:
            raise ProfileError(
                f"profile must define splits {expected}, has {self.candidate_splits}"
            )
        grid_len = len(self.tmap.grid_db)
        for l, sc in self.splits.items():
            if min(sc.head_compute_ms, sc.tail_compute_ms, sc.codec_ms) < 0:
                raise ProfileError(f"split {l}: negative time component")
            if sc.head_energy_wh < 0:
                raise ProfileError(f"split {l}: negative energy")
            if not 0.0 <= sc.leakage <= 1.0:
                raise ProfileError(f"split {l}: leakage outside [0, 1]")
            if len(sc.tx_energy_wh) != grid_len:
                raise ProfileError(
                    f"split {l}: tx energy row must match the {grid_len}-level grid"
                )
            if any(v < 0 for v in sc.tx_energy_wh):
                raise ProfileError(f"split {l}: negative tx energy")
        if self.splits[server].raw_activation_bytes != self.input_bytes:
            raise ProfileError("server split must transmit exactly the raw input bytes")
        if self.splits[0].leakage != 0.0:
            raise ProfileError("local split must have zero leakage")
        if self.splits[server].leakage != 1.0:
            raise ProfileError("server split must have leakage 1")
        # device energy grows with the number of device-executed stages; the
        # local mode runs everything and tops the scale, raw offload is minimal
        stage_energy = [self.splits[l].head_energy_wh for l in range(1, server)]
        ordered = all(a <= b for a, b in zip(stage_energy, stage_energy[1:]))
        if not ordered or stage_energy[-1] > self.splits[0].head_energy_wh:
            raise ProfileError("head energy must be non-decreasing in device work")
        if self.splits[server].head_energy_wh > min(
            sc.head_energy_wh for sc in self.splits.values()
        ):
            raise ProfileError("server split head energy must be minimal")

    # -- serialization -------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "backbone": asdict(self.backbone),
            "frame_rate_fps": self.frame_rate_fps,
            "input_bytes": self.input_bytes,
            "interference_grid_db": list(self.tmap.grid_db),
            "throughput_mbps": list(self.tmap.mbps),
            "splits": {
                str(l): {**asdict(sc), "tx_energy_wh": list(sc.tx_energy_wh)}
                for l, sc in sorted(self.splits.items())
            },
            "provenance": dict(sorted(self.provenance.items())),
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ModelProfile":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProfileError(f"profile is not valid JSON: {exc}") from exc
        try:
            profile = cls(
                name=doc["name"],
                backbone=BackboneConfig(**doc["backbone"]),
                frame_rate_fps=float(doc["frame_rate_fps"]),
                input_bytes=int(doc["input_bytes"]),
                tmap=ThroughputMap(
                    tuple(float(v) for v in doc["interference_grid_db"]),
                    tuple(float(v) for v in doc["throughput_mbps"]),
                ),
                splits={
                    int(l): SplitCosts(
                        head_compute_ms=float(sc["head_compute_ms"]),
                        tail_compute_ms=float(sc["tail_compute_ms"]),
                        codec_ms=float(sc["codec_ms"]),
                        raw_activation_bytes=int(sc["raw_activation_bytes"]),
                        compressed_activation_bytes=int(sc["compressed_activation_bytes"]),
                        head_energy_wh=float(sc["head_energy_wh"]),
                        leakage=float(sc["leakage"]),
                        tx_energy_wh=tuple(float(v) for v in sc["tx_energy_wh"]),
                    )
                    for l, sc in doc["splits"].items()
                },
                provenance={str(k): str(v) for k, v in doc.get("provenance", {}).items()},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProfileError(f"profile field error: {exc}") from exc
        profile.validate()
        return profile

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "ModelProfile":
        p = Path(path)
        if not p.exists():
            raise ProfileError(f"profile file not found: {p}")
        return cls.from_json(p.read_text())


def load_default_profile() -> ModelProfile:
    """The shipped calibrated profile."""
    text = resources.files("splitedge.data").joinpath("profile.json").read_text()
    return ModelProfile.from_json(text)


def default_targets_text() -> str:
    """The shipped calibration targets document (JSON text)."""
    return resources.files("splitedge.data").joinpath("calibration_targets.json").read_text()
