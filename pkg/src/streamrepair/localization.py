"""Fault/slice coincidence statistics, independence testing, and task distributions.

The Chi-squared machinery is self-contained: the survival function is the
regularized upper incomplete gamma Q(df/2, x/2), computed by the standard
series / continued-fraction split with relative termination 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .oracles import FaultEvent
from .slicing import SliceAssignment

_TOL = 1e-12
_MAX_ITER = 500


def _lower_gamma_series(a: float, x: float) -> float:
    # P(a, x) by series expansion; converges fast for x < a + 1.
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _TOL:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError("incomplete gamma series failed to converge")


def _upper_gamma_cf(a: float, x: float) -> float:
    # Q(a, x) by modified Lentz continued fraction; converges fast for x >= a + 1.
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _TOL:
            return h * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError("incomplete gamma continued fraction failed to converge")


def regularized_gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a)."""
    if a <= 0:
        raise ValueError("shape parameter must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _lower_gamma_series(a, x)))
    return min(1.0, max(0.0, _upper_gamma_cf(a, x)))


def chi_square_survival(x: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if x < 0:
        raise ValueError("chi-square statistic must be non-negative")
    return regularized_gamma_q(df / 2.0, x / 2.0)


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Slice labels vs. fault presence; one count per execution considered."""

    row_labels: tuple
    counts: np.ndarray  # shape (rows, 2): [fault-present, fault-absent]
    fault_type: Optional[str] = None
    family: Optional[str] = None

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=int)
        if counts.ndim != 2 or counts.shape != (len(self.row_labels), 2):
            raise ValueError("counts must have shape (len(row_labels), 2)")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_json_dict(self) -> dict:
        return {
            "rows": list(self.row_labels),
            "columns": ["fault_present", "fault_absent"],
            "counts": self.counts.tolist(),
            "fault_type": self.fault_type,
            "family": self.family,
        }


@dataclass(frozen=True)
class IndependenceResult:
    """Pearson chi-square result; ``testable`` is False for degenerate tables."""

    statistic: Optional[float]
    df: Optional[int]
    p_value: Optional[float]
    testable: bool = True

    def to_json_dict(self) -> dict:
        return {
            "chi2": self.statistic,
            "df": self.df,
            "p": self.p_value,
            "testable": self.testable,
        }


UNTESTABLE = IndependenceResult(statistic=None, df=None, p_value=None, testable=False)


def covered_mask(events: Sequence[FaultEvent], indices: Sequence[int]) -> np.ndarray:
    """Boolean mask over ``indices``: True where an index lies in any event range."""
    idx = np.asarray(indices, dtype=int)
    mask = np.zeros(len(idx), dtype=bool)
    for e in events:
        mask |= (idx >= e.start_index) & (idx <= e.end_index)
    return mask


def build_contingency(
    events: Sequence[FaultEvent],
    assignments: Sequence[SliceAssignment],
    stream_length: int,
    row_labels: Optional[Sequence[str]] = None,
) -> ContingencyTable:
    """Count executions per (slice label, fault present/absent) cell.

    ``assignments`` must cover every execution of the stream exactly once for
    a single family; an execution is fault-present iff its index falls inside
    any supplied event's inclusive range.
    """
    if len(assignments) != stream_length:
        raise ValueError(
            f"assignments cover {len(assignments)} executions, stream has {stream_length}"
        )
    families = {a.family for a in assignments}
    if len(families) > 1:
        raise ValueError(f"assignments span multiple families: {sorted(families)}")
    indices = [a.index for a in assignments]
    if len(set(indices)) != len(indices):
        raise ValueError("duplicate execution indices in assignments")
    lo, hi = min(indices), max(indices)
    for e in events:
        if e.end_index < lo or e.start_index > hi:
            raise ValueError(f"event [{e.start_index}, {e.end_index}] outside execution range")

    labels = tuple(row_labels) if row_labels is not None else tuple(sorted({a.label for a in assignments}))
    row_of = {label: i for i, label in enumerate(labels)}
    counts = np.zeros((len(labels), 2), dtype=int)
    mask = covered_mask(events, indices)
    for a, present in zip(assignments, mask):
        if a.label not in row_of:
            raise ValueError(f"assignment label {a.label!r} not in row labels {labels}")
        counts[row_of[a.label], 0 if present else 1] += 1

    family = next(iter(families)) if families else None
    types = {e.fault_type.value for e in events}
    fault_type = types.pop() if len(types) == 1 else None
    return ContingencyTable(row_labels=labels, counts=counts, fault_type=fault_type, family=family)


def chi_squared_test(table: ContingencyTable) -> IndependenceResult:
    """Pearson test of independence; zero-marginal rows/columns are dropped first.

    Tables with fewer than two surviving rows or columns are reported as
    explicitly untestable rather than as a silent p = 1.
    """
    counts = table.counts.astype(float)
    if counts.sum() <= 0:
        return UNTESTABLE
    counts = counts[counts.sum(axis=1) > 0][:, :]
    counts = counts[:, counts.sum(axis=0) > 0]
    if counts.shape[0] < 2 or counts.shape[1] < 2:
        return UNTESTABLE
    row = counts.sum(axis=1, keepdims=True)
    col = counts.sum(axis=0, keepdims=True)
    expected = row @ col / counts.sum()
    statistic = float(((counts - expected) ** 2 / expected).sum())
    df = (counts.shape[0] - 1) * (counts.shape[1] - 1)
    return IndependenceResult(statistic=statistic, df=df, p_value=chi_square_survival(statistic, df))


@dataclass(frozen=True, eq=False)
class TaskDistribution:
    """Normalized probabilities over task labels (sums to 1 within 1e-12)."""

    probabilities: dict

    def __post_init__(self):
        probs = {str(k): float(v) for k, v in self.probabilities.items()}
        if any(v < 0 for v in probs.values()):
            raise ValueError("probabilities must be non-negative")
        total = sum(probs.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1, got {total}")
        object.__setattr__(self, "probabilities", probs)

    def to_json_dict(self) -> dict:
        return {k: self.probabilities[k] for k in sorted(self.probabilities)}


def _apply_floor(probs: dict, floor: float) -> dict:
    # Raise sub-floor tasks to exactly the floor, rescaling the rest; iterate
    # because rescaling can push further tasks below the floor.
    if floor <= 0:
        return probs
    if floor * len(probs) > 1.0 + 1e-12:
        raise ValueError(f"floor {floor} infeasible for {len(probs)} tasks")
    floored: set = set()
    while True:
        new_floored = {t for t, p in probs.items() if t not in floored and p < floor}
        if not new_floored:
            return probs
        floored |= new_floored
        free_mass = 1.0 - floor * len(floored)
        free_total = sum(p for t, p in probs.items() if t not in floored)
        out = {}
        for t, p in probs.items():
            if t in floored:
                out[t] = floor
            else:
                out[t] = p * free_mass / free_total if free_total > 0 else free_mass / (len(probs) - len(floored))
        probs = out


def fault_task_distribution(
    events: Sequence[FaultEvent],
    assignments: Sequence[SliceAssignment],
    labels: Optional[Sequence[str]] = None,
    floor: float = 0.0,
) -> TaskDistribution:
    """Coincidence distribution of tasks over fault-covered executions.

    ``assignments`` are the task-family assignments (normally computed from
    heuristically corrected outputs).  Raises when no execution is covered;
    callers fall back to the natural distribution.
    """
    labels = tuple(labels) if labels is not None else tuple(sorted({a.label for a in assignments}))
    indices = [a.index for a in assignments]
    mask = covered_mask(events, indices)
    if not mask.any():
        raise ValueError("no fault-covered executions; coincidence distribution undefined")
    counts = {label: 0 for label in labels}
    for a, present in zip(assignments, mask):
        if present:
            if a.label not in counts:
                raise ValueError(f"task label {a.label!r} not in label set {labels}")
            counts[a.label] += 1
    total = sum(counts.values())
    probs = {t: c / total for t, c in counts.items()}
    probs = _apply_floor(probs, floor)
    total = sum(probs.values())
    return TaskDistribution({t: p / total for t, p in probs.items()})


def localization_report(
    events: Sequence[FaultEvent],
    assignments_by_family: dict,
    stream_length: int,
    row_labels_by_family: Optional[dict] = None,
    task_family: Optional[str] = None,
    task_labels: Optional[Sequence[str]] = None,
    floor: float = 0.0,
) -> dict:
    """Per-(fault type, family) tables and tests, plus task distributions.

    ``assignments_by_family`` maps family id to that family's per-execution
    assignments.  The pooled task distribution (all fault types combined) and
    the per-type distributions are computed against ``task_family`` when given.
    """
    by_type: dict = {}
    for e in events:
        by_type.setdefault(e.fault_type, []).append(e)

    tables: dict = {}
    for fault_type in sorted(by_type, key=lambda t: t.value):
        tables[fault_type.value] = {}
        for family_id in sorted(assignments_by_family):
            rows = (row_labels_by_family or {}).get(family_id)
            table = build_contingency(
                by_type[fault_type], assignments_by_family[family_id], stream_length, rows
            )
            result = chi_squared_test(table)
            tables[fault_type.value][family_id] = {
                "table": table.to_json_dict(),
                "test": result.to_json_dict(),
            }

    report = {"tables": tables, "task_distribution": None, "per_type_task_distributions": {}}
    if task_family is not None and task_family in assignments_by_family:
        task_assignments = assignments_by_family[task_family]
        try:
            pooled = fault_task_distribution(events, task_assignments, task_labels, floor)
            report["task_distribution"] = pooled.to_json_dict()
        except ValueError:
            report["task_distribution"] = None
        for fault_type in sorted(by_type, key=lambda t: t.value):
            try:
                dist = fault_task_distribution(by_type[fault_type], task_assignments, task_labels, floor)
                report["per_type_task_distributions"][fault_type.value] = dist.to_json_dict()
            except ValueError:
                report["per_type_task_distributions"][fault_type.value] = None
    return report
