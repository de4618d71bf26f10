"""Data acquisition strategies and decoder retraining.

Four strategies: fault-based (sample the acquisition pool according to the
fault/task coincidence distribution computed from corrected outputs), the
same without corrective heuristics (distribution from raw outputs), natural
(uniform sampling), and corrected-only (retrain directly on the heuristically
corrected predictions).  Acquisition-pool task labels come from ground truth:
during a collection session the task being performed is known.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import Sample, largest_remainder_allocation
from .heuristics import CorrectionRecord
from .localization import TaskDistribution, fault_task_distribution
from .oracles import FaultEvent
from .slicing import SliceAssignment, SliceFamily

logger = logging.getLogger(__name__)


class Strategy(str, enum.Enum):
    FAULT_BASED = "fault_based"
    NATURAL = "natural"
    CORRECTED_ONLY = "corrected_only"
    FAULT_BASED_NO_HEURISTICS = "fault_based_no_heuristics"


@dataclass(frozen=True)
class AcquisitionPlan:
    """How to acquire retraining data: strategy, sample budget, optional distribution."""

    strategy: Strategy
    n: int
    seed: int
    distribution: Optional[TaskDistribution] = None
    floor: float = 0.0

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("acquisition sample count must be positive")


def sample_by_distribution(
    samples: Sequence[Sample],
    tasks: Sequence[str],
    distribution: TaskDistribution,
    n: int,
    seed: int,
) -> list:
    """Sample ``min(n, len(samples))`` items honoring the task distribution.

    Per-task targets come from largest-remainder allocation of ``n * p``;
    sampling within each task bucket is uniform without replacement.  When a
    bucket runs out, its unmet demand is reallocated proportionally to the
    remaining availability of the other buckets.
    """
    if not samples:
        raise ValueError("acquisition set is empty")
    if len(tasks) != len(samples):
        raise ValueError("tasks must parallel the acquisition samples")
    rng = np.random.default_rng(seed)
    n = min(n, len(samples))

    buckets: dict = {}
    for i, task in enumerate(tasks):
        buckets.setdefault(task, []).append(i)

    all_tasks = sorted(set(buckets) | set(distribution.probabilities))
    weights = [distribution.probabilities.get(t, 0.0) for t in all_tasks]
    targets = dict(zip(all_tasks, largest_remainder_allocation(n, weights)))
    taken = {t: min(targets[t], len(buckets.get(t, []))) for t in all_tasks}

    while True:
        shortfall = n - sum(taken.values())
        if shortfall == 0:
            break
        remaining = {t: len(buckets.get(t, [])) - taken[t] for t in all_tasks}
        pool = sorted(t for t, r in remaining.items() if r > 0)
        if not pool:
            break
        extra = largest_remainder_allocation(shortfall, [remaining[t] for t in pool])
        for t, e in zip(pool, extra):
            taken[t] += min(e, remaining[t])

    chosen: list = []
    for t in sorted(taken):
        if taken[t] == 0:
            continue
        bucket = buckets[t]
        picks = rng.choice(len(bucket), size=taken[t], replace=False)
        chosen.extend(bucket[int(p)] for p in picks)
    chosen.sort()
    return [samples[i] for i in chosen]


def sample_natural(samples: Sequence[Sample], n: int, seed: int) -> list:
    """Uniform without-replacement sample; task frequencies follow the data's own."""
    if not samples:
        raise ValueError("acquisition set is empty")
    rng = np.random.default_rng(seed)
    n = min(n, len(samples))
    picks = sorted(int(p) for p in rng.choice(len(samples), size=n, replace=False))
    return [samples[i] for i in picks]


def corrected_only_dataset(
    stream: Sequence,
    corrections: Sequence[CorrectionRecord],
) -> list:
    """One sample per correction: the input at that index labeled with the corrected output."""
    if not corrections:
        raise ValueError("no corrections; corrected-only retraining is inapplicable")
    by_index = {rec.index: rec for rec in stream}
    out = []
    for c in corrections:
        if c.index not in by_index:
            raise ValueError(f"correction at index {c.index} outside the stream")
        rec = by_index[c.index]
        out.append(Sample(index=rec.index, features=rec.input, label=c.corrected))
    return out


@dataclass(frozen=True, eq=False)
class ObservationArtifacts:
    """Everything the observation phase produced that repair strategies consume."""

    stream: tuple
    events: tuple
    corrected_stream: tuple
    corrections: tuple

    @classmethod
    def build(cls, stream, events, corrected_stream, corrections) -> "ObservationArtifacts":
        return cls(tuple(stream), tuple(events), tuple(corrected_stream), tuple(corrections))


def _task_assignments(stream, task_family: SliceFamily) -> list:
    labels = task_family.labels_for_stream(stream)
    return [SliceAssignment(rec.index, task_family.id, lab) for rec, lab in zip(stream, labels)]


def execute_repair(
    baseline,
    plan: AcquisitionPlan,
    train: Sequence[Sample],
    acquisition: Sequence[Sample],
    observation: ObservationArtifacts,
    task_family: SliceFamily,
):
    """Run one acquisition strategy and retrain the baseline decoder.

    Returns ``(repaired_decoder, info)`` where ``info`` records the acquired
    sample indices, the distribution used (when any), and whether a fault-based
    plan fell back to natural sampling because no faults were observed.
    """
    info: dict = {
        "strategy": plan.strategy.value,
        "n_requested": plan.n,
        "fallback_natural": False,
        "distribution": None,
    }

    if plan.strategy == Strategy.CORRECTED_ONLY:
        acquired = corrected_only_dataset(observation.stream, observation.corrections)
        info["acquired_indices"] = [s.index for s in acquired]
        return baseline.retrain(acquired, train), info

    if plan.strategy == Strategy.NATURAL:
        acquired = sample_natural(acquisition, plan.n, plan.seed)
        info["acquired_indices"] = [s.index for s in acquired]
        return baseline.retrain(acquired, train), info

    if plan.strategy in (Strategy.FAULT_BASED, Strategy.FAULT_BASED_NO_HEURISTICS):
        source = (
            observation.corrected_stream
            if plan.strategy == Strategy.FAULT_BASED
            else observation.stream
        )
        distribution = plan.distribution
        if distribution is None:
            try:
                distribution = fault_task_distribution(
                    observation.events,
                    _task_assignments(source, task_family),
                    labels=task_family.labels,
                    floor=plan.floor,
                )
            except ValueError:
                logger.warning(
                    "%s: no fault-covered executions; falling back to natural sampling",
                    plan.strategy.value,
                )
                info["fallback_natural"] = True
                acquired = sample_natural(acquisition, plan.n, plan.seed)
                info["acquired_indices"] = [s.index for s in acquired]
                return baseline.retrain(acquired, train), info
        info["distribution"] = distribution.to_json_dict()
        tasks = task_family.labels_for_values([s.label for s in acquisition])
        acquired = sample_by_distribution(acquisition, tasks, distribution, plan.n, plan.seed)
        info["acquired_indices"] = [s.index for s in acquired]
        return baseline.retrain(acquired, train), info

    raise ValueError(f"unknown strategy {plan.strategy!r}")
