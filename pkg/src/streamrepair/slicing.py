"""Slice functions: map every execution to exactly one label per slice family.

Output families read decoder outputs (raw or corrected, whichever stream is
supplied); input families read the raw inputs.  Every family is total over
its domain.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import Label, PredictionRecord

INPUT = "input"
OUTPUT = "output"

COMPASS_8 = ("E", "NE", "N", "NW", "W", "SW", "S", "SE")
COMPASS_4 = ("E", "N", "W", "S")
STATIONARY = "Stationary"


@dataclass(frozen=True)
class SliceAssignment:
    """Exactly one label for one (execution, family) pair."""

    index: int
    family: str
    label: str


class SliceFamily:
    """A total mapping from executions to a finite label set."""

    id: str
    kind: str
    labels: tuple

    def labels_for_values(self, values: Sequence) -> list:
        """Label a sequence of raw values (outputs for output families, inputs for input ones)."""
        raise NotImplementedError

    def labels_for_stream(self, stream: Sequence[PredictionRecord]) -> list:
        source = [r.input for r in stream] if self.kind == INPUT else [r.output for r in stream]
        return self.labels_for_values(source)


class ClassTaskFamily(SliceFamily):
    """Identity mapping from discrete output classes to tasks (a bijection on S)."""

    kind = OUTPUT

    def __init__(self, states: Sequence[str], family_id: str = "task"):
        self.id = family_id
        self.labels = tuple(sorted(states))
        self._known = frozenset(self.labels)

    def labels_for_values(self, values: Sequence) -> list:
        out = []
        for v in values:
            if v not in self._known:
                raise ValueError(f"class {v!r} not in state set {self.labels}")
            out.append(v)
        return out


class DirectionFamily(SliceFamily):
    """Movement direction between consecutive outputs, discretized into compass bins.

    Bins are centered on multiples of 360/bins degrees and half-open
    [center - width/2, center + width/2).  Steps shorter than
    ``stationary_eps`` (and the first execution, which has no predecessor)
    map to Stationary.
    """

    kind = OUTPUT

    def __init__(self, bins: int = 8, stationary_eps: float = 1e-9, family_id: str = "direction"):
        if bins not in (4, 8):
            raise ValueError("direction bins must be 4 or 8")
        self.id = family_id
        self.bins = bins
        self.stationary_eps = float(stationary_eps)
        compass = COMPASS_8 if bins == 8 else COMPASS_4
        self.labels = (STATIONARY,) + compass
        self._compass = compass

    def bin_of_angle(self, angle_deg: float) -> str:
        width = 360.0 / self.bins
        idx = int(math.floor(((angle_deg + width / 2.0) % 360.0) / width))
        return self._compass[idx]

    def labels_for_values(self, values: Sequence) -> list:
        out = []
        prev = None
        for v in values:
            v = np.asarray(v, dtype=float)
            if prev is None:
                out.append(STATIONARY)
            else:
                delta = v - prev
                if float(np.linalg.norm(delta)) < self.stationary_eps:
                    out.append(STATIONARY)
                else:
                    angle = math.degrees(math.atan2(delta[1], delta[0])) % 360.0
                    out.append(self.bin_of_angle(angle))
            prev = v
        return out


class QuadrantFamily(SliceFamily):
    """Quadrant of the output relative to the bounds midpoint (half-open split).

    Points on a midline belong to the higher quadrant; out-of-bounds points
    still map by sign relative to the midpoint.
    """

    kind = OUTPUT

    def __init__(self, bounds: Sequence, family_id: str = "quadrant"):
        if len(bounds) != 2:
            raise ValueError("quadrant slicing needs 2-D bounds")
        self.id = family_id
        self.bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        self.mid = tuple((lo + hi) / 2.0 for lo, hi in self.bounds)
        self.labels = ("NE", "NW", "SW", "SE")

    def labels_for_values(self, values: Sequence) -> list:
        out = []
        for v in values:
            v = np.asarray(v, dtype=float)
            east = v[0] >= self.mid[0]
            north = v[1] >= self.mid[1]
            out.append(("NE" if east else "NW") if north else ("SE" if east else "SW"))
        return out


class ActivityFamily(SliceFamily):
    """Mean input activity bucketed as Hypo/Normal/Hyper (strict thresholds)."""

    kind = INPUT
    labels = ("Hypo", "Normal", "Hyper")

    def __init__(self, activity_low: float, activity_high: float, family_id: str = "input_activity"):
        if not activity_low < activity_high:
            raise ValueError("activity_low must be < activity_high")
        self.id = family_id
        self.low = float(activity_low)
        self.high = float(activity_high)

    def labels_for_values(self, values: Sequence) -> list:
        out = []
        for v in values:
            mean = float(np.mean(np.asarray(v, dtype=float)))
            out.append("Hypo" if mean < self.low else ("Hyper" if mean > self.high else "Normal"))
        return out


def slice_discrete_output(output: str, states: Sequence[str]) -> str:
    return ClassTaskFamily(states).labels_for_values([output])[0]


def slice_direction(prev, cur, stationary_eps: float, bins: int = 8) -> str:
    fam = DirectionFamily(bins=bins, stationary_eps=stationary_eps)
    if prev is None:
        return STATIONARY
    return fam.labels_for_values([prev, cur])[1]


def slice_quadrant(cur, bounds) -> str:
    return QuadrantFamily(bounds).labels_for_values([cur])[0]


def slice_input_activity(features, activity_low: float, activity_high: float) -> str:
    return ActivityFamily(activity_low, activity_high).labels_for_values([features])[0]


def assign_slices(stream: Sequence[PredictionRecord], families: Sequence[SliceFamily]) -> list:
    """One SliceAssignment per (execution, family); |families| * len(stream) in total."""
    assignments = []
    for fam in families:
        labels = fam.labels_for_stream(stream)
        assignments.extend(
            SliceAssignment(index=rec.index, family=fam.id, label=label)
            for rec, label in zip(stream, labels)
        )
    return assignments


def assignments_to_csv(assignments: Sequence[SliceAssignment], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "family", "label"])
        for a in assignments:
            writer.writerow([a.index, a.family, a.label])


def assignments_from_csv(path) -> list:
    assignments = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["index", "family", "label"]:
            raise ValueError(f"{path}: expected header 'index,family,label'")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            assignments.append(SliceAssignment(index=int(row[0]), family=row[1], label=row[2]))
    return assignments
