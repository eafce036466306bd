"""Adaptive split selection over the candidate set.

The decision function scores every candidate with a weighted sum of
normalized objectives: delay and device energy are divided by their
fully-local baselines so the weights are unit-free, and leakage is already
in [0, 1]. Optional hard constraints filter candidates first. The weighted
sum is a declared stand-in for the control entity's optimizer, whose exact
formulation is not public; the candidate set is tiny, so selection is an
exhaustive enumeration and the full per-candidate breakdown is part of the
decision.

When no candidate satisfies the constraints the selector degrades instead
of failing: it picks the candidate with the smallest worst-case relative
constraint violation and flags the decision, because a live pipeline must
always choose some execution mode.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

from .channel import ChannelState, ChannelTrace, PathConfig, estimate_throughput, path_delay_sample
from .costs import e2e_delay, ue_energy
from .errors import InvalidParameterError
from .profile import ModelProfile
from .rng import derive_seed

_TIE_REL = 1e-12


@dataclass(frozen=True)
class ObjectiveWeights:
    w_delay: float
    w_privacy: float
    w_energy: float
    max_delay_ms: float | None = None
    max_leakage: float | None = None
    max_energy_wh: float | None = None

    def __post_init__(self):
        if min(self.w_delay, self.w_privacy, self.w_energy) < 0:
            raise InvalidParameterError("weights must be non-negative")
        total = self.w_delay + self.w_privacy + self.w_energy
        if abs(total - 1.0) > 1e-9:
            raise InvalidParameterError(f"weights must sum to 1, got {total}")

    @classmethod
    def normalized(cls, w_delay: float, w_privacy: float, w_energy: float, **constraints) -> "ObjectiveWeights":
        total = w_delay + w_privacy + w_energy
        if total <= 0:
            raise InvalidParameterError("at least one weight must be positive")
        return cls(w_delay / total, w_privacy / total, w_energy / total, **constraints)


@dataclass(frozen=True)
class CandidateScore:
    split_index: int
    delay_ms: float
    leakage: float
    energy_wh: float
    objective: float
    feasible: bool
    violation: float  # worst relative constraint violation, 0 when feasible


@dataclass(frozen=True)
class SplitDecision:
    chosen_split: int
    objective_value: float
    candidates: tuple[CandidateScore, ...]
    estimator_mbps_used: float
    degraded: bool

    def score_of(self, l: int) -> CandidateScore:
        for c in self.candidates:
            if c.split_index == l:
                return c
        raise InvalidParameterError(f"split {l} not among evaluated candidates")


def select_split(
    profile: ModelProfile,
    ch_estimate_mbps: float,
    path: PathConfig,
    weights: ObjectiveWeights,
) -> SplitDecision:
    """Pick the feasible candidate minimizing the weighted normalized objective.

    Ties break toward lower leakage, then lower split index. With no feasible
    candidate, returns the least-violating one with the degraded flag set.
    """
    state = ChannelState(
        profile.tmap.implied_interference(ch_estimate_mbps), ch_estimate_mbps
    )
    t_ref = e2e_delay(profile, 0, state, path).total_ms
    e_ref = ue_energy(profile, 0, state).total_wh
    scores = []
    for l in profile.candidate_splits:
        delay = e2e_delay(profile, l, state, path).total_ms
        energy = ue_energy(profile, l, state).total_wh
        leak = profile.splits[l].leakage
        objective = (
            weights.w_delay * delay / t_ref
            + weights.w_privacy * leak
            + weights.w_energy * energy / e_ref
        )
        violation = 0.0
        if weights.max_delay_ms is not None and delay > weights.max_delay_ms:
            violation = max(violation, (delay - weights.max_delay_ms) / weights.max_delay_ms)
        if weights.max_leakage is not None and leak > weights.max_leakage:
            limit = max(weights.max_leakage, 1e-12)
            violation = max(violation, (leak - weights.max_leakage) / limit)
        if weights.max_energy_wh is not None and energy > weights.max_energy_wh:
            violation = max(violation, (energy - weights.max_energy_wh) / weights.max_energy_wh)
        scores.append(CandidateScore(l, delay, leak, energy, objective, violation == 0.0, violation))

    feasible = [s for s in scores if s.feasible]
    degraded = not feasible
    if feasible:
        best_obj = min(s.objective for s in feasible)
        ties = [s for s in feasible if s.objective <= best_obj + _TIE_REL * max(abs(best_obj), 1.0)]
        chosen = min(ties, key=lambda s: (s.leakage, s.split_index))
    else:
        least = min(s.violation for s in scores)
        ties = [s for s in scores if s.violation <= least + _TIE_REL * max(least, 1.0)]
        chosen = min(ties, key=lambda s: (s.leakage, s.split_index))
    return SplitDecision(
        chosen_split=chosen.split_index,
        objective_value=chosen.objective,
        candidates=tuple(scores),
        estimator_mbps_used=ch_estimate_mbps,
        degraded=degraded,
    )


@dataclass(frozen=True)
class TimelineEntry:
    timestamp_ms: float
    interference_db: float
    estimated_mbps: float
    chosen_split: int
    predicted_ms: float
    realized_ms: float
    leakage: float
    energy_wh: float
    degraded: bool


def adaptive_run(
    profile: ModelProfile,
    trace: ChannelTrace,
    weights: ObjectiveWeights,
    estimator_noise_pct: float,
    path: PathConfig,
    seed: int = 0,
    hysteresis: float = 0.0,
) -> list[TimelineEntry]:
    """One decision per trace sample, driven by the noisy throughput estimate.

    Predicted delay uses the estimate and the mean path delay; realized delay
    uses the true channel and sampled path jitter, so estimation error shows
    up as a predicted-versus-realized gap. Optional hysteresis keeps the
    previous split unless the new candidate improves the objective by the
    given fraction.
    """
    if not trace.samples:
        raise InvalidParameterError("trace has no samples")
    if hysteresis < 0:
        raise InvalidParameterError("hysteresis must be >= 0")
    timeline = []
    prev: SplitDecision | None = None
    for k, state in enumerate(trace.samples):
        est = estimate_throughput(state, estimator_noise_pct, derive_seed(seed, "est", k))
        decision = select_split(profile, est, path, weights)
        if (
            prev is not None
            and hysteresis > 0
            and decision.chosen_split != prev.chosen_split
            and not decision.degraded
        ):
            held = decision.score_of(prev.chosen_split)
            if held.feasible and decision.objective_value > held.objective * (1.0 - hysteresis):
                decision = SplitDecision(
                    chosen_split=held.split_index,
                    objective_value=held.objective,
                    candidates=decision.candidates,
                    estimator_mbps_used=decision.estimator_mbps_used,
                    degraded=False,
                )
        l = decision.chosen_split
        predicted = e2e_delay(
            profile, l, ChannelState(profile.tmap.implied_interference(est), est), path
        ).total_ms
        jitter = path_delay_sample(path, 2, derive_seed(seed, "jitter", k)) if l != 0 else 0.0
        realized = e2e_delay(profile, l, state, path, path_delay_ms=jitter).total_ms
        timeline.append(
            TimelineEntry(
                timestamp_ms=state.timestamp_ms,
                interference_db=state.interference_db,
                estimated_mbps=est,
                chosen_split=l,
                predicted_ms=predicted,
                realized_ms=realized,
                leakage=decision.score_of(l).leakage,
                energy_wh=ue_energy(profile, l, state).total_wh,
                degraded=decision.degraded,
            )
        )
        prev = decision
    return timeline


TIMELINE_HEADER = (
    "timestamp_ms,interference_db,estimated_mbps,chosen_l,predicted_ms,"
    "realized_ms,leakage,energy_wh,degraded"
)


def timeline_to_csv(timeline: list[TimelineEntry]) -> str:
    buf = io.StringIO()
    buf.write(TIMELINE_HEADER + "\n")
    for e in timeline:
        buf.write(
            f"{e.timestamp_ms!r},{e.interference_db!r},{e.estimated_mbps!r},"
            f"{e.chosen_split},{e.predicted_ms!r},{e.realized_ms!r},"
            f"{e.leakage!r},{e.energy_wh!r},{int(e.degraded)}\n"
        )
    return buf.getvalue()
