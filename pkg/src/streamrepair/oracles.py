"""Stateful partial test oracles over a prediction stream.

Each oracle checks a necessary condition on decoder output (or input) and
emits a :class:`FaultEvent` when it is violated.  Detection is causal: the
engine walks the stream in index order and every event depends only on
records up to its ``end_index``.  Detection always runs on raw decoder
outputs; corrected streams are re-checked separately.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import CONTINUOUS, DISCRETE, PredictionRecord, label_kind


class FaultType(str, enum.Enum):
    ILLEGAL_TRANSITION = "illegal_transition"
    TEMPORAL_INCONSISTENCY_DISCRETE = "temporal_inconsistency_discrete"
    TEMPORAL_INCONSISTENCY_CONTINUOUS = "temporal_inconsistency_continuous"
    RAPID_MOTION = "rapid_motion"
    OUT_OF_BOUNDS = "out_of_bounds"
    MULTIMODAL_INCONSISTENCY = "multimodal_inconsistency"
    INPUT_ARTIFACT = "input_artifact"


#: Fault taxonomy: every fault type belongs to exactly one category.
TAXONOMY = {
    FaultType.INPUT_ARTIFACT: "input_validation",
    FaultType.ILLEGAL_TRANSITION: "temporal_validation",
    FaultType.TEMPORAL_INCONSISTENCY_DISCRETE: "temporal_validation",
    FaultType.TEMPORAL_INCONSISTENCY_CONTINUOUS: "temporal_validation",
    FaultType.RAPID_MOTION: "temporal_validation",
    FaultType.MULTIMODAL_INCONSISTENCY: "consistency",
    FaultType.OUT_OF_BOUNDS: "domain_knowledge",
}

DISCRETE_TYPES = frozenset(
    {
        FaultType.ILLEGAL_TRANSITION,
        FaultType.TEMPORAL_INCONSISTENCY_DISCRETE,
        FaultType.MULTIMODAL_INCONSISTENCY,
    }
)
CONTINUOUS_TYPES = frozenset(
    {
        FaultType.TEMPORAL_INCONSISTENCY_CONTINUOUS,
        FaultType.RAPID_MOTION,
        FaultType.OUT_OF_BOUNDS,
    }
)


@dataclass(frozen=True)
class FaultEvent:
    """A detected fault over the inclusive execution-index range [start, end]."""

    fault_type: FaultType
    start_index: int
    end_index: int
    oracle_id: str
    detail: str = ""

    def __post_init__(self):
        if self.start_index > self.end_index:
            raise ValueError("event start must not exceed end")

    def to_json_dict(self) -> dict:
        return {
            "type": self.fault_type.value,
            "start": self.start_index,
            "end": self.end_index,
            "oracle_id": self.oracle_id,
            "detail": self.detail,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FaultEvent":
        return cls(
            fault_type=FaultType(d["type"]),
            start_index=int(d["start"]),
            end_index=int(d["end"]),
            oracle_id=str(d.get("oracle_id", "")),
            detail=str(d.get("detail", "")),
        )


@dataclass(frozen=True)
class OracleConfig:
    """Thresholds and relations shared by the oracle engine and heuristics.

    ``legal`` maps each state to the set of states reachable in one step;
    self-transitions must be legal.  ``window`` covers both the discrete
    flicker oracle (fires when adjacent state changes in the window reach
    ``flicker_changes``) and the continuous total-variation oracle.  ``bounds``
    are closed intervals per output dimension.  ``wake_state``/``sleep_state``
    designate the corrective targets for multimodal inconsistencies.
    """

    legal: Optional[dict] = None
    window: int = 10
    flicker_changes: int = 4
    tv_threshold: Optional[float] = None
    step_threshold: Optional[float] = None
    bounds: Optional[tuple] = None  # ((lo, hi), ...) per dimension
    aux: Optional[object] = None  # AuxiliaryBinaryClassifier-like, .predict(features)
    aux_map: Optional[dict] = None  # state -> "awake" | "asleep"
    wake_state: Optional[str] = None
    sleep_state: Optional[str] = None
    activity_low: Optional[float] = None
    activity_high: Optional[float] = None

    def __post_init__(self):
        if self.legal is not None:
            frozen = {s: frozenset(t) for s, t in self.legal.items()}
            object.__setattr__(self, "legal", frozen)
        if self.bounds is not None:
            object.__setattr__(self, "bounds", tuple((float(lo), float(hi)) for lo, hi in self.bounds))
        self.validate()

    def validate(self) -> None:
        errors = []
        if self.window < 2:
            errors.append("window must be >= 2")
        if self.flicker_changes < 2:
            errors.append("flicker_changes must be >= 2")
        if self.tv_threshold is not None and self.tv_threshold <= 0:
            errors.append("tv_threshold must be positive")
        if self.step_threshold is not None and self.step_threshold <= 0:
            errors.append("step_threshold must be positive")
        if self.bounds is not None:
            for d, (lo, hi) in enumerate(self.bounds):
                if not lo < hi:
                    errors.append(f"bounds dimension {d}: lo must be < hi")
        if self.legal is not None:
            for s, targets in self.legal.items():
                if s not in targets:
                    errors.append(f"self-transition must be legal for state {s!r}")
        if self.activity_low is not None and self.activity_high is not None:
            if not self.activity_low < self.activity_high:
                errors.append("activity_low must be < activity_high")
        if self.aux_map is not None:
            bad = [v for v in self.aux_map.values() if v not in ("awake", "asleep")]
            if bad:
                errors.append("aux_map values must be 'awake' or 'asleep'")
            if self.wake_state is not None and self.aux_map.get(self.wake_state) != "awake":
                errors.append("wake_state must map to 'awake'")
            if self.sleep_state is not None and self.aux_map.get(self.sleep_state) != "asleep":
                errors.append("sleep_state must map to 'asleep'")
            if self.legal is not None:
                # Multimodal corrections must not introduce illegal transitions.
                if self.wake_state is not None:
                    for s in self.legal:
                        if self.wake_state not in self.legal[s]:
                            errors.append(f"wake_state must be reachable from {s!r}")
                if self.sleep_state is not None:
                    for s, verdict in self.aux_map.items():
                        if verdict == "awake" and s in self.legal and self.sleep_state not in self.legal[s]:
                            errors.append(f"sleep_state must be reachable from awake state {s!r}")
        if errors:
            raise ValueError("; ".join(errors))

    def enabled_types(self, kind: Optional[str] = None) -> tuple:
        """Fault types whose configuration is present, in enum order.

        ``kind`` restricts the result to oracles applicable to that output
        kind (the discrete flicker oracle is always configured via defaults,
        so filtering matters when auto-enabling).
        """
        enabled = [FaultType.TEMPORAL_INCONSISTENCY_DISCRETE]  # window/k always configured
        if self.legal is not None:
            enabled.append(FaultType.ILLEGAL_TRANSITION)
        if self.tv_threshold is not None:
            enabled.append(FaultType.TEMPORAL_INCONSISTENCY_CONTINUOUS)
        if self.step_threshold is not None:
            enabled.append(FaultType.RAPID_MOTION)
        if self.bounds is not None:
            enabled.append(FaultType.OUT_OF_BOUNDS)
        if self.aux is not None and self.aux_map is not None:
            enabled.append(FaultType.MULTIMODAL_INCONSISTENCY)
        if self.activity_low is not None and self.activity_high is not None:
            enabled.append(FaultType.INPUT_ARTIFACT)
        if kind == DISCRETE:
            enabled = [t for t in enabled if t not in CONTINUOUS_TYPES]
        elif kind == CONTINUOUS:
            enabled = [t for t in enabled if t not in DISCRETE_TYPES]
        return tuple(t for t in FaultType if t in enabled)


def is_legal(legal: dict, prev: str, cur: str) -> bool:
    """Whether the consecutive state pair (prev, cur) is allowed; unknown states raise."""
    if prev not in legal:
        raise ValueError(f"state {prev!r} not in legality relation")
    if cur not in legal:
        raise ValueError(f"state {cur!r} not in legality relation")
    return cur in legal[prev]


# ---------------------------------------------------------------------------
# Step oracles.  Each returns a FaultEvent or None; index arguments locate
# the flagged executions on the stream.
# ---------------------------------------------------------------------------


def illegal_transition_step(prev, cur, legal, start_index=0, end_index=1) -> Optional[FaultEvent]:
    """Fault iff the consecutive state pair (prev, cur) is illegal."""
    if is_legal(legal, prev, cur):
        return None
    return FaultEvent(
        FaultType.ILLEGAL_TRANSITION,
        start_index,
        end_index,
        "illegal_transition",
        f"{prev}->{cur}",
    )


def temporal_inconsistency_discrete_step(window, k, start_index=0, end_index=None) -> Optional[FaultEvent]:
    """Fault iff adjacent state changes within the full window reach ``k``."""
    window = list(window)
    if end_index is None:
        end_index = len(window) - 1
    changes = sum(1 for a, b in zip(window, window[1:]) if a != b)
    if changes < k:
        return None
    return FaultEvent(
        FaultType.TEMPORAL_INCONSISTENCY_DISCRETE,
        start_index,
        end_index,
        "flicker",
        f"{changes} changes",
    )


def temporal_inconsistency_continuous_step(window, tv_threshold, start_index=0, end_index=None) -> Optional[FaultEvent]:
    """Fault iff the window's total variation (sum of step norms) exceeds the threshold."""
    window = [np.asarray(w, dtype=float) for w in window]
    if end_index is None:
        end_index = len(window) - 1
    tv = float(sum(np.linalg.norm(b - a) for a, b in zip(window, window[1:])))
    if tv <= tv_threshold:
        return None
    return FaultEvent(
        FaultType.TEMPORAL_INCONSISTENCY_CONTINUOUS,
        start_index,
        end_index,
        "total_variation",
        f"tv={tv:.6g}",
    )


def rapid_motion_step(prev, cur, step_threshold, start_index=0, end_index=1) -> Optional[FaultEvent]:
    """Fault iff the Euclidean step from prev to cur exceeds the threshold (strictly)."""
    prev = np.asarray(prev, dtype=float)
    cur = np.asarray(cur, dtype=float)
    if prev.shape != cur.shape:
        raise ValueError(f"dimension mismatch: {prev.shape} vs {cur.shape}")
    dist = float(np.linalg.norm(cur - prev))
    if dist <= step_threshold:
        return None
    return FaultEvent(
        FaultType.RAPID_MOTION,
        start_index,
        end_index,
        "rapid_motion",
        f"step={dist:.6g}",
    )


def out_of_bounds_step(cur, bounds, index=0) -> Optional[FaultEvent]:
    """Fault iff any coordinate falls outside its closed interval."""
    cur = np.asarray(cur, dtype=float)
    violations = [
        d for d, (lo, hi) in enumerate(bounds) if not (lo <= cur[d] <= hi)
    ]
    if not violations:
        return None
    return FaultEvent(
        FaultType.OUT_OF_BOUNDS,
        index,
        index,
        "out_of_bounds",
        f"dims={violations}",
    )


def multimodal_inconsistency_step(decoded, aux_input, aux, aux_map, index=0) -> Optional[FaultEvent]:
    """Fault iff the decoded state disagrees with the auxiliary classifier's verdict."""
    if decoded not in aux_map:
        raise ValueError(f"state {decoded!r} has no awake/asleep mapping")
    verdict = aux.predict(aux_input)
    if aux_map[decoded] == verdict:
        return None
    return FaultEvent(
        FaultType.MULTIMODAL_INCONSISTENCY,
        index,
        index,
        "multimodal",
        f"decoded={aux_map[decoded]},aux={verdict}",
    )


def input_artifact_step(features, activity_low, activity_high, index=0) -> Optional[FaultEvent]:
    """Fault iff the mean input activity is below/above the artifact thresholds."""
    mean = float(np.mean(np.asarray(features, dtype=float)))
    if mean < activity_low:
        detail = "hypoactivity"
    elif mean > activity_high:
        detail = "hyperactivity"
    else:
        return None
    return FaultEvent(FaultType.INPUT_ARTIFACT, index, index, "input_artifact", detail)


def run_oracles(
    stream: Sequence[PredictionRecord],
    config: OracleConfig,
    enabled: Optional[Sequence[FaultType]] = None,
) -> list:
    """Run every enabled oracle over the stream, returning events ordered by end index.

    Detectors are independent: each type's events do not depend on which other
    types are enabled.  The stream must be in strictly increasing index order.
    """
    events: list = []
    if not stream:
        return events

    kind = label_kind(stream[0].output)
    enabled = tuple(config.enabled_types(kind) if enabled is None else enabled)
    for t in enabled:
        if t in DISCRETE_TYPES and kind != DISCRETE:
            raise ValueError(f"oracle {t.value} requires discrete outputs")
        if t in CONTINUOUS_TYPES and kind != CONTINUOUS:
            raise ValueError(f"oracle {t.value} requires continuous outputs")

    type_order = {t: i for i, t in enumerate(FaultType)}
    window: list = []
    window_indices: list = []
    prev_rec: Optional[PredictionRecord] = None
    prev_index = None
    for rec in stream:
        if prev_index is not None and rec.index <= prev_index:
            raise ValueError(f"stream not in index order at index {rec.index}")
        prev_index = rec.index

        window.append(rec.output)
        window_indices.append(rec.index)
        if len(window) > config.window:
            window.pop(0)
            window_indices.pop(0)

        step_events = []
        if FaultType.ILLEGAL_TRANSITION in enabled and prev_rec is not None:
            step_events.append(
                illegal_transition_step(
                    prev_rec.output, rec.output, config.legal, prev_rec.index, rec.index
                )
            )
        if FaultType.TEMPORAL_INCONSISTENCY_DISCRETE in enabled and len(window) == config.window:
            step_events.append(
                temporal_inconsistency_discrete_step(
                    window, config.flicker_changes, window_indices[0], rec.index
                )
            )
        if FaultType.TEMPORAL_INCONSISTENCY_CONTINUOUS in enabled and len(window) == config.window:
            step_events.append(
                temporal_inconsistency_continuous_step(
                    window, config.tv_threshold, window_indices[0], rec.index
                )
            )
        if FaultType.RAPID_MOTION in enabled and prev_rec is not None:
            step_events.append(
                rapid_motion_step(
                    prev_rec.output, rec.output, config.step_threshold, prev_rec.index, rec.index
                )
            )
        if FaultType.OUT_OF_BOUNDS in enabled:
            step_events.append(out_of_bounds_step(rec.output, config.bounds, rec.index))
        if FaultType.MULTIMODAL_INCONSISTENCY in enabled:
            step_events.append(
                multimodal_inconsistency_step(rec.output, rec.input, config.aux, config.aux_map, rec.index)
            )
        if FaultType.INPUT_ARTIFACT in enabled:
            step_events.append(
                input_artifact_step(rec.input, config.activity_low, config.activity_high, rec.index)
            )

        events.extend(sorted((e for e in step_events if e is not None), key=lambda e: type_order[e.fault_type]))
        prev_rec = rec

    return events


def count_by_type(events: Sequence[FaultEvent]) -> dict:
    """Event counts per fault type (all types present, zero-filled)."""
    counts = {t: 0 for t in FaultType}
    for e in events:
        counts[e.fault_type] += 1
    return counts


def events_to_jsonl(events: Sequence[FaultEvent], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(json.dumps(e.to_json_dict(), sort_keys=True) + "\n")


def events_from_jsonl(path) -> list:
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                events.append(FaultEvent.from_json_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed event line ({exc})") from None
    return events
