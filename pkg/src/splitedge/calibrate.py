"""Fit the free cost-model parameters to the published measurement anchors.

The measured quantities behind the profile are end-to-end delays and device
energies; throughput, per-split compute, and transmission energy are not
reported directly, so they are identified from the anchors:

    delay(l, i) = C_l + B_l * u_i

with C_l the channel-independent compute+codec total, B_l the payload bits
in ms*Mbps units, and u_i the reciprocal throughput at interference level i.
Anchors quoted as a run "mean" pin the flat low-interference regime (the
run spends most of its time there), i.e. they constrain u at the two lowest
levels. A bounded least-squares over relative errors fits C_l, u_i, and the
compressed payload sizes (bounded to the published 5-6 MB band); weak
priors keep unanchored parameters at declared defaults. Energy tables are
then derived algebraically from the energy anchors and declared
compute-to-transmission ratio targets.

Anchors must reproduce within the configured tolerance or the fit is
rejected as infeasible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .channel import ThroughputMap
from .errors import InfeasibleFitError, InvalidParameterError
from .model import BackboneConfig
from .profile import ModelProfile, SplitCosts

PRIOR_WEIGHT = 1e-3
COUPLING_WEIGHT = 1e-2


@dataclass(frozen=True)
class AnchorResult:
    label: str
    target: float
    fitted: float
    rel_error: float
    source: str


@dataclass(frozen=True)
class CalibrationReport:
    anchors: tuple[AnchorResult, ...]
    max_rel_error: float
    provenance_note: str = "all anchors are published values; fitted parameters are calibrated artifacts"

    def format_table(self) -> str:
        lines = [f"{'anchor':<28}{'target':>12}{'fitted':>12}{'rel_err':>10}  source"]
        for a in self.anchors:
            lines.append(
                f"{a.label:<28}{a.target:>12.4f}{a.fitted:>12.4f}{a.rel_error:>10.4%}  {a.source}"
            )
        lines.append(f"max relative error: {self.max_rel_error:.4%}")
        return "\n".join(lines)


@dataclass
class _DelayAnchor:
    split: int
    at: str | float  # "mean" or an interference level in dB
    value: float
    source: str


def parse_targets(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParameterError(f"targets file is not valid JSON: {exc}") from exc
    for key in ("delay_anchors_ms", "energy_anchors_wh", "data"):
        if key not in doc:
            raise InvalidParameterError(f"targets file missing {key!r}")
    return doc


def _level_index(grid: list[float], level: float) -> int:
    for i, g in enumerate(grid):
        if abs(g - level) < 1e-9:
            return i
    raise InvalidParameterError(f"anchor level {level} dB not on grid {grid}")


def calibrate_profile(targets: dict) -> tuple[ModelProfile, CalibrationReport]:
    """Fit a profile to an anchor table; raises InfeasibleFitError on failure."""
    data = targets["data"]
    grid = [float(g) for g in data["interference_grid_db"]]
    n_levels = len(grid)
    if n_levels < 2:
        raise InvalidParameterError("interference grid needs >= 2 levels")
    backbone = BackboneConfig(**data["backbone"])
    server = backbone.server_split
    n_splits = server + 1
    input_bytes = int(data["input_bytes"])
    stage_splits = list(range(1, server))

    anchors = [
        _DelayAnchor(int(a["split"]), a["at"], float(a["value"]), a.get("source", ""))
        for a in targets["delay_anchors_ms"]
    ]
    energy_anchors = {int(a["split"]): float(a["value"]) for a in targets["energy_anchors_wh"]}
    energy_sources = {int(a["split"]): a.get("source", "") for a in targets["energy_anchors_wh"]}
    if not anchors or not energy_anchors:
        raise InfeasibleFitError("target table has no anchors to fit")
    for a in anchors:
        if a.split < 0 or a.split > server:
            raise InvalidParameterError(f"anchor split {a.split} outside 0..{server}")
        if a.at != "mean":
            _level_index(grid, float(a.at))

    # fixed design data
    payload_prior = {int(k): float(v) for k, v in data["payload_prior_bytes"].items()}
    raw_bytes = {int(k): int(v) for k, v in data["raw_activation_bytes"].items()}
    tail_ms = {int(k): float(v) for k, v in data["tail_compute_ms"].items()}
    codec_ms = {int(k): float(v) for k, v in data["codec_ms"].items()}
    ratio_targets = {int(k): float(v) for k, v in data["tx_compute_ratio"].items()}
    radio_power = [float(v) for v in data["radio_power_w"]]
    thr_prior = [float(v) for v in data["throughput_prior_mbps"]]
    compute_prior = {int(k): float(v) for k, v in data["compute_prior_ms"].items()}
    payload_band = [float(v) for v in data.get("payload_band_bytes", [5_000_000, 6_000_000])]
    max_rel = float(targets.get("fit", {}).get("max_anchor_rel_error", 0.05))

    # parameter vector: C_0..C_server | u_first | du_1..du_{n-1} | B_stage...
    n_c = n_splits
    n_u = n_levels
    idx_b0 = n_c + n_u

    u_prior = [1.0 / t for t in thr_prior]
    du_prior = [u_prior[0]] + [max(b - a, 0.0) for a, b in zip(u_prior, u_prior[1:])]

    x0 = np.array(
        [compute_prior.get(l, 1000.0) for l in range(n_splits)]
        + du_prior
        + [payload_prior[l] * 0.008 for l in stage_splits]
    )
    lo = np.array(
        [0.0] * n_c + [1e-6] + [0.0] * (n_u - 1) + [payload_band[0] * 0.008] * len(stage_splits)
    )
    hi = np.array(
        [1e6] * n_c + [1.0] * n_u + [payload_band[1] * 0.008] * len(stage_splits)
    )
    x0 = np.clip(x0, lo, hi)

    b_server = 8.0 * input_bytes / 1000.0

    def unpack(x: np.ndarray):
        c = x[:n_c]
        u = np.cumsum(x[n_c : n_c + n_u])
        b = {l: 0.0 for l in range(n_splits)}
        for j, l in enumerate(stage_splits):
            b[l] = x[idx_b0 + j]
        b[server] = b_server
        return c, u, b

    def model_delay(c, u, b, split: int, at) -> float:
        if split == 0:
            return float(c[0])
        if at == "mean":
            # run means are dominated by the flat low-interference regime
            return float(c[split] + b[split] * u[0])
        return float(c[split] + b[split] * u[_level_index(grid, float(at))])

    def residuals(x: np.ndarray) -> np.ndarray:
        c, u, b = unpack(x)
        res = []
        for a in anchors:
            if a.split != 0 and a.at == "mean":
                # pin both low-interference levels so the regime is genuinely flat
                for at in (grid[0], grid[1]):
                    res.append((model_delay(c, u, b, a.split, at) - a.value) / a.value)
            else:
                res.append((model_delay(c, u, b, a.split, a.at) - a.value) / a.value)
        # weak priors keep unanchored parameters identifiable
        for l in range(n_splits):
            prior = compute_prior.get(l, 1000.0)
            res.append(PRIOR_WEIGHT * (c[l] - prior) / max(prior, 1.0))
        for j in range(n_u):
            res.append(PRIOR_WEIGHT * (x[n_c + j] - du_prior[j]) / max(u_prior[0], 1e-9))
        for j, l in enumerate(stage_splits):
            prior_b = payload_prior[l] * 0.008
            res.append(PRIOR_WEIGHT * (x[idx_b0 + j] - prior_b) / prior_b)
        # splits without any delay anchor sit between their neighbours
        anchored = {a.split for a in anchors}
        for l in stage_splits:
            if l not in anchored and 1 <= l - 1 and l + 1 <= server - 1:
                res.append(COUPLING_WEIGHT * (c[l] - 0.5 * (c[l - 1] + c[l + 1])) / 1000.0)
        return np.array(res)

    fit = least_squares(residuals, x0, bounds=(lo, hi), method="trf", xtol=1e-14, ftol=1e-14)
    c, u, b = unpack(fit.x)

    # anchor reproduction check
    results = []
    for a in anchors:
        fitted = model_delay(c, u, b, a.split, a.at)
        rel = (fitted - a.value) / a.value
        at_label = a.at if a.at == "mean" else f"{a.at:g}dB"
        results.append(AnchorResult(f"delay split={a.split} @{at_label}", a.value, fitted, rel, a.source))

    # energy derivation: anchored totals, declared ratio targets in between
    if 0 not in energy_anchors or 1 not in energy_anchors or server not in energy_anchors:
        raise InfeasibleFitError("energy anchors for splits 0, 1, and server are required")
    e0 = energy_anchors[0]
    e1 = energy_anchors[1]
    e_server = energy_anchors[server]
    mean_tx = {0: 0.0}
    mean_tx[1] = e1 / (1.0 + ratio_targets[1])
    compute_wh = {0: e0, 1: e1 - mean_tx[1]}
    mean_tx[server] = mean_tx[1] * b[server] / b[1]
    compute_wh[server] = e_server - mean_tx[server]
    if compute_wh[server] <= 0:
        raise InfeasibleFitError("server energy anchor below the implied transmission energy")
    # device compute energy interpolates linearly in on-device time between
    # the split-1 and local anchors
    head_ms = {0: float(c[0]), server: 0.0}
    for l in stage_splits:
        head_ms[l] = float(c[l]) - tail_ms[l] - codec_ms[l]
        if head_ms[l] <= 0:
            raise InfeasibleFitError(
                f"fitted compute total for split {l} below declared tail+codec time"
            )
    t1 = head_ms[1] + codec_ms[1]
    t0 = head_ms[0]
    slope = (e0 - compute_wh[1]) / (t0 - t1)
    for l in stage_splits[1:]:
        t_l = head_ms[l] + codec_ms[l]
        compute_wh[l] = compute_wh[1] + slope * (t_l - t1)
        mean_tx[l] = compute_wh[l] / ratio_targets[l]
    # per-level transmission energy: time-on-air times radio power, normalized
    # so each split's mean over the grid matches its derived mean
    shape = np.array([u_i * p for u_i, p in zip(u, radio_power)])
    weights = shape / shape.mean()

    for l, target_wh in energy_anchors.items():
        total = compute_wh[l] + mean_tx[l]
        rel = (total - target_wh) / target_wh
        results.append(
            AnchorResult(f"energy split={l}", target_wh, total, rel, energy_sources[l])
        )

    max_err = max(abs(r.rel_error) for r in results)
    report = CalibrationReport(tuple(results), max_err)
    if max_err > max_rel:
        raise InfeasibleFitError(
            "calibration cannot reproduce anchors within "
            f"{max_rel:.1%} (worst {max_err:.2%}):\n" + report.format_table()
        )

    leakage = {int(k): float(v["value"]) for k, v in targets["leakage"].items()}
    leakage.update({int(k): float(v) for k, v in targets.get("leakage_placeholders", {}).items()})

    splits = {}
    for l in range(n_splits):
        if l == 0:
            raw, comp = 0, 0
        elif l == server:
            raw, comp = input_bytes, input_bytes
        else:
            raw, comp = raw_bytes[l], int(round(b[l] * 125.0))
        splits[l] = SplitCosts(
            head_compute_ms=head_ms[l],
            tail_compute_ms=float(c[server]) if l == server else tail_ms.get(l, 0.0),
            codec_ms=codec_ms.get(l, 0.0),
            raw_activation_bytes=raw,
            compressed_activation_bytes=comp,
            head_energy_wh=compute_wh[l],
            leakage=leakage[l],
            tx_energy_wh=tuple(float(mean_tx[l] * w) for w in weights),
        )

    provenance = {
        "input_bytes": "paper",
        "throughput_mbps": "calibrated",
        "head_compute_ms": "calibrated",
        "tail_compute_ms": "placeholder",
        "codec_ms": "placeholder",
        "raw_activation_bytes": "placeholder",
        "compressed_activation_bytes.1": "calibrated",
        "tx_energy_wh": "calibrated",
        "head_energy_wh.0": "paper",
        "head_energy_wh": "calibrated",
        "leakage.0": "paper",
        "leakage.1": "paper",
        f"leakage.{server}": "paper",
        "leakage": "placeholder",
        "delay_anchors": "paper",
    }
    for l in stage_splits[1:]:
        provenance[f"compressed_activation_bytes.{l}"] = "placeholder"

    profile = ModelProfile(
        name=targets.get("name", "calibrated-profile"),
        backbone=backbone,
        frame_rate_fps=float(data.get("frame_rate_fps", 10.0)),
        input_bytes=input_bytes,
        tmap=ThroughputMap(tuple(grid), tuple(float(1.0 / u_i) for u_i in u)),
        splits=splits,
        provenance=provenance,
    )
    profile.validate()
    return profile, report
