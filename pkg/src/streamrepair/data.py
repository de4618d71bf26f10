"""Core records, labeled datasets, deterministic four-way splitting, and prediction streams.

A dataset is an ordered sequence of :class:`Sample` objects with strictly
increasing indices and a constant feature dimension.  Labels are either
discrete (a class identifier string) or continuous (a fixed-dimension float
vector); a single dataset never mixes the two kinds.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

Label = Union[str, np.ndarray]

DISCRETE = "discrete"
CONTINUOUS = "continuous"

PART_NAMES = ("train", "observe", "acquire", "test")


def _frozen_array(values) -> np.ndarray:
    out = np.array(values, dtype=float)
    out.setflags(write=False)
    return out


def label_kind(label: Label) -> str:
    """Return ``"discrete"`` for string labels, ``"continuous"`` for vectors."""
    return DISCRETE if isinstance(label, str) else CONTINUOUS


@dataclass(frozen=True, eq=False)
class Sample:
    """One time bin: per-channel features plus the ground-truth label."""

    index: int
    features: np.ndarray
    label: Label

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"sample index must be non-negative, got {self.index}")
        object.__setattr__(self, "features", _frozen_array(self.features))
        if not isinstance(self.label, str):
            object.__setattr__(self, "label", _frozen_array(self.label))


@dataclass(frozen=True, eq=False)
class PredictionRecord:
    """One decoder execution on the stream: input, prediction, optional truth."""

    index: int
    input: np.ndarray
    output: Label
    truth: Optional[Label] = None

    def __post_init__(self):
        object.__setattr__(self, "input", _frozen_array(self.input))
        if not isinstance(self.output, str):
            object.__setattr__(self, "output", _frozen_array(self.output))
        if self.truth is not None and not isinstance(self.truth, str):
            object.__setattr__(self, "truth", _frozen_array(self.truth))

    def with_output(self, output: Label) -> "PredictionRecord":
        return PredictionRecord(self.index, self.input, output, self.truth)


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    """Disjoint train/observe/acquire/test parts covering the input dataset."""

    train: tuple
    observe: tuple
    acquire: tuple
    test: tuple
    seed: int
    mode: str

    def parts(self) -> dict:
        return {name: getattr(self, name) for name in PART_NAMES}


def validate_dataset(samples: Sequence[Sample]) -> str:
    """Check index monotonicity, feature-dim constancy, and a single label kind.

    Returns the dataset's label kind.
    """
    if not samples:
        raise ValueError("dataset is empty")
    dim = samples[0].features.shape
    kind = label_kind(samples[0].label)
    prev_index = None
    for s in samples:
        if prev_index is not None and s.index <= prev_index:
            raise ValueError(f"sample indices not strictly increasing at index {s.index}")
        prev_index = s.index
        if s.features.shape != dim:
            raise ValueError(f"inconsistent feature dimension at index {s.index}")
        if label_kind(s.label) != kind:
            raise ValueError(f"mixed label kinds at index {s.index}")
    return kind


def largest_remainder_allocation(total: int, weights: Sequence[float]) -> list:
    """Split ``total`` into integer counts proportional to ``weights``.

    Uses largest-remainder rounding; ties go to the lower position, so the
    result is deterministic.
    """
    wsum = float(sum(weights))
    if wsum <= 0:
        raise ValueError("weights must sum to a positive value")
    quotas = [total * float(w) / wsum for w in weights]
    counts = [int(math.floor(q)) for q in quotas]
    shortfall = total - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:shortfall]:
        counts[i] += 1
    return counts


def split_dataset(
    samples: Sequence[Sample],
    ratio: Sequence[float] = (6, 2, 1, 1),
    seed: int = 0,
    mode: str = "contiguous",
    discard_fraction: float = 0.0,
) -> DatasetSplit:
    """Partition a dataset into train/observe/acquire/test parts.

    Sizes follow ``ratio`` via largest-remainder allocation.  Both modes keep
    every part in original index order (temporal oracles need in-order data):

    * ``contiguous`` cuts four blocks from a seeded rotation of the sequence
      in the fixed order train, observe, test, acquire: the test block is
      kept temporally separated from both training-block boundaries, and the
      acquisition block (which simulates a fresh collection session) sits at
      the rotation seam;
    * ``shuffled`` instead permutes which block becomes which part.

    ``discard_fraction`` drops a seeded uniform subset before splitting.
    """
    validate_dataset(samples)
    if len(ratio) != len(PART_NAMES):
        raise ValueError(f"ratio must have {len(PART_NAMES)} entries")
    if any(r < 0 for r in ratio):
        raise ValueError("ratio entries must be non-negative")
    if sum(ratio) <= 0:
        raise ValueError("ratio must sum to a positive value")
    if mode not in ("contiguous", "shuffled"):
        raise ValueError(f"unknown split mode {mode!r}")
    if not 0.0 <= discard_fraction < 1.0:
        raise ValueError("discard_fraction must be in [0, 1)")

    rng = np.random.default_rng(seed)
    kept = list(samples)
    if discard_fraction > 0.0:
        n_drop = int(math.floor(discard_fraction * len(kept)))
        drop = set(rng.choice(len(kept), size=n_drop, replace=False).tolist())
        kept = [s for i, s in enumerate(kept) if i not in drop]
    n = len(kept)
    if n == 0:
        raise ValueError("dataset is empty after discarding")

    counts = largest_remainder_allocation(n, ratio)
    empty = [PART_NAMES[i] for i, c in enumerate(counts) if c == 0]
    if empty:
        raise ValueError(f"ratio {tuple(ratio)} produces empty part(s): {', '.join(empty)}")

    offset = int(rng.integers(n))
    rotated = kept[offset:] + kept[:offset]
    if mode == "shuffled":
        role_order = [int(i) for i in rng.permutation(len(PART_NAMES))]
    else:
        role_order = [0, 1, 3, 2]  # train, observe, test, acquire

    parts = {}
    cursor = 0
    for role in role_order:
        size = counts[role]
        block = rotated[cursor : cursor + size]
        cursor += size
        parts[PART_NAMES[role]] = tuple(sorted(block, key=lambda s: s.index))

    return DatasetSplit(seed=seed, mode=mode, **parts)


def make_stream(part: Sequence[Sample], decoder) -> list:
    """Run the decoder over one split part, producing one record per sample.

    Truth labels are carried alongside for later precision scoring.
    """
    if not decoder.is_fitted:
        raise ValueError("decoder is not fitted")
    for i, s in enumerate(part):
        if s.features.shape[0] != decoder.n_features:
            raise ValueError(
                f"feature dimension mismatch at index {s.index} "
                f"(position {i}): got {s.features.shape[0]}, "
                f"decoder expects {decoder.n_features}"
            )
    outputs = decoder.predict_series([s.features for s in part])
    return [
        PredictionRecord(index=s.index, input=s.features, output=out, truth=s.label)
        for s, out in zip(part, outputs)
    ]


# ---------------------------------------------------------------------------
# CSV dataset format
#
# Header: index,f0,f1,...,fK followed by either `label` (discrete) or
# `label_x,label_y` (continuous).  UTF-8, comma separators, `.` decimal point.
# ---------------------------------------------------------------------------


def _check_feature_header(cols: Sequence[str]) -> int:
    for i, name in enumerate(cols):
        if name != f"f{i}":
            raise ValueError(f"expected feature column 'f{i}', got {name!r}")
    if not cols:
        raise ValueError("dataset has no feature columns")
    return len(cols)


def load_dataset_csv(path) -> list:
    """Load samples from the CSV dataset format; label kind is inferred from the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if not header or header[0] != "index":
            raise ValueError(f"{path}: first column must be 'index'")
        if header[-2:] == ["label_x", "label_y"]:
            kind = CONTINUOUS
            n_features = _check_feature_header(header[1:-2])
        elif header[-1] == "label":
            kind = DISCRETE
            n_features = _check_feature_header(header[1:-1])
        else:
            raise ValueError(f"{path}: header must end in 'label' or 'label_x,label_y'")

        samples = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            index = int(row[0])
            features = np.array([float(v) for v in row[1 : 1 + n_features]])
            if kind == DISCRETE:
                label: Label = row[-1]
            else:
                label = np.array([float(row[-2]), float(row[-1])])
            samples.append(Sample(index=index, features=features, label=label))
    validate_dataset(samples)
    return samples


def save_dataset_csv(samples: Sequence[Sample], path) -> None:
    """Write samples in the CSV dataset format (deterministic shortest-repr floats)."""
    kind = validate_dataset(samples)
    n_features = samples[0].features.shape[0]
    header = ["index"] + [f"f{i}" for i in range(n_features)]
    header += ["label"] if kind == DISCRETE else ["label_x", "label_y"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in samples:
            row = [str(s.index)] + [repr(float(v)) for v in s.features]
            if kind == DISCRETE:
                row.append(s.label)
            else:
                row += [repr(float(v)) for v in s.label]
            writer.writerow(row)


def dataset_states(samples: Sequence[Sample]) -> tuple:
    """Sorted state set of a discrete dataset."""
    if label_kind(samples[0].label) != DISCRETE:
        raise ValueError("state set is only defined for discrete datasets")
    return tuple(sorted({s.label for s in samples}))
