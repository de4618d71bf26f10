"""Seeded synthetic scenario generators for desk-scale pipeline runs.

The discrete generator emits a legality-respecting latent task sequence with
geometric dwell times and per-state Gaussian features; class-imbalance
weights control per-task frequency, and optional artifact segments overwrite
the features with hypo-/hyperactive constants (bookkeeping retained so tests
can assert exact detection).  The continuous generator emits a reflecting
random walk inside bounds with features mixed from position and velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import Sample


@dataclass(frozen=True, eq=False)
class GeneratedDataset:
    """Samples plus generator bookkeeping (artifact indices are exact)."""

    samples: tuple
    artifact_indices: tuple = ()


@dataclass(frozen=True, eq=False)
class DiscreteScenario:
    """Parameters of the discrete latent-task generator."""

    states: tuple
    legal: dict  # state -> iterable of legal successors (self included)
    feature_means: dict  # state -> feature vector
    weights: Optional[dict] = None  # state -> relative frequency (uniform when None)
    dwell: float = 0.9  # stay probability per step
    noise: float = 1.0
    drift: Optional[dict] = None  # state -> radius of one slow feature-mean cycle
    artifact_rate: float = 0.0
    artifact_segment: int = 3
    artifact_low_value: float = -8.0
    artifact_high_value: float = 8.0
    length: int = 1000
    seed: int = 0

    def __post_init__(self):
        states = tuple(sorted(self.states))
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "legal", {s: frozenset(t) for s, t in self.legal.items()})
        if self.weights is not None:
            object.__setattr__(self, "weights", dict(self.weights))
        if self.drift is not None:
            object.__setattr__(self, "drift", {s: float(r) for s, r in self.drift.items()})
        self.validate()

    def validate(self) -> None:
        if len(self.states) < 2:
            raise ValueError("need at least two states")
        if not 0.0 <= self.dwell < 1.0:
            raise ValueError("dwell must be in [0, 1)")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if not 0.0 <= self.artifact_rate < 1.0:
            raise ValueError("artifact_rate must be in [0, 1)")
        if self.length <= 0:
            raise ValueError("length must be positive")
        for s in self.states:
            if s not in self.legal:
                raise ValueError(f"state {s!r} missing from legality relation")
            if s not in self.legal[s]:
                raise ValueError(f"self-transition must be legal for state {s!r}")
            if s not in self.feature_means:
                raise ValueError(f"state {s!r} missing from feature_means")
        if self.drift:
            dim = len(next(iter(self.feature_means.values())))
            if dim < 2:
                raise ValueError("feature drift needs at least two feature dimensions")
            for s in self.drift:
                if s not in set(self.states):
                    raise ValueError(f"drift state {s!r} not in state set")
        # every state must be reachable from every other, else generation stalls
        for start in self.states:
            seen = {start}
            frontier = [start]
            while frontier:
                cur = frontier.pop()
                for nxt in self.legal[cur]:
                    if nxt not in seen:
                        seen.add(nxt)
                        frontier.append(nxt)
            if seen != set(self.states):
                unreachable = sorted(set(self.states) - seen)
                raise ValueError(f"states unreachable from {start!r}: {unreachable}")

    def weight_vector(self) -> np.ndarray:
        if self.weights is None:
            return np.full(len(self.states), 1.0 / len(self.states))
        w = np.array([float(self.weights.get(s, 0.0)) for s in self.states])
        if (w < 0).any() or w.sum() <= 0:
            raise ValueError("weights must be non-negative with positive sum")
        return w / w.sum()


def gen_discrete(scenario: DiscreteScenario) -> GeneratedDataset:
    """Generate a labeled discrete dataset; deterministic for a fixed seed.

    At each step the latent task stays with probability ``dwell``; otherwise
    the next task is drawn from the imbalance weights restricted to legal
    successors (self included), so with a complete legality relation the
    empirical task frequencies track the weights.

    ``drift`` models slow non-stationarity: a drifting state's feature mean
    travels one full circle of the given radius (in the first two feature
    dimensions) across the dataset, so any contiguous block of the data sees
    only an arc of that state's feature positions.
    """
    rng = np.random.default_rng(scenario.seed)
    states = scenario.states
    w = scenario.weight_vector()
    state_idx = {s: i for i, s in enumerate(states)}

    cur = states[int(rng.choice(len(states), p=w))]
    labels = []
    for _ in range(scenario.length):
        labels.append(cur)
        if rng.random() >= scenario.dwell:
            allowed = sorted(scenario.legal[cur])
            probs = np.array([w[state_idx[s]] for s in allowed])
            if probs.sum() <= 0:
                probs = np.full(len(allowed), 1.0 / len(allowed))
            else:
                probs = probs / probs.sum()
            cur = allowed[int(rng.choice(len(allowed), p=probs))]

    dim = len(next(iter(scenario.feature_means.values())))
    means = {s: np.asarray(scenario.feature_means[s], dtype=float) for s in states}
    features = np.stack([means[lab] for lab in labels])
    if scenario.drift:
        phase = 2.0 * math.pi * np.arange(scenario.length) / scenario.length
        offsets = np.column_stack([np.cos(phase), np.sin(phase)])
        for s, radius in scenario.drift.items():
            rows = np.array([lab == s for lab in labels])
            features[rows, 0] += radius * offsets[rows, 0]
            features[rows, 1] += radius * offsets[rows, 1]
    features = features + scenario.noise * rng.standard_normal((scenario.length, dim))

    artifact_indices: list = []
    if scenario.artifact_rate > 0:
        n_segments = int(round(scenario.artifact_rate * scenario.length / scenario.artifact_segment))
        occupied = np.zeros(scenario.length, dtype=bool)
        placed = 0
        attempts = 0
        while placed < n_segments and attempts < 50 * max(1, n_segments):
            attempts += 1
            start = int(rng.integers(0, max(1, scenario.length - scenario.artifact_segment)))
            span = slice(start, start + scenario.artifact_segment)
            if occupied[span].any():
                continue
            occupied[span] = True
            value = scenario.artifact_low_value if placed % 2 == 0 else scenario.artifact_high_value
            features[span] = value
            artifact_indices.extend(range(start, start + scenario.artifact_segment))
            placed += 1
        artifact_indices.sort()

    samples = tuple(
        Sample(index=t, features=features[t], label=labels[t]) for t in range(scenario.length)
    )
    return GeneratedDataset(samples=samples, artifact_indices=tuple(artifact_indices))


@dataclass(frozen=True, eq=False)
class ContinuousScenario:
    """Parameters of the reflecting random-walk generator."""

    bounds: tuple = ((0.0, 1.0), (0.0, 1.0))
    step_sigma: float = 0.02
    mixing: Optional[tuple] = None  # feature_dim x 4 matrix over [pos, vel]; identity when None
    noise: float = 0.0
    length: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bounds", tuple((float(lo), float(hi)) for lo, hi in self.bounds))
        if self.mixing is not None:
            object.__setattr__(self, "mixing", tuple(tuple(float(v) for v in row) for row in self.mixing))
        self.validate()

    def validate(self) -> None:
        if self.step_sigma <= 0:
            raise ValueError("step_sigma must be positive")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if self.length <= 0:
            raise ValueError("length must be positive")
        if len(self.bounds) != 2:
            raise ValueError("bounds must be 2-D")
        for d, (lo, hi) in enumerate(self.bounds):
            if not lo < hi:
                raise ValueError(f"bounds dimension {d}: lo must be < hi")
        if self.mixing is not None and any(len(row) != 4 for row in self.mixing):
            raise ValueError("mixing matrix must have 4 columns (pos_x, pos_y, vel_x, vel_y)")

    def mixing_matrix(self) -> np.ndarray:
        if self.mixing is None:
            return np.eye(4)
        return np.array(self.mixing, dtype=float)


def _reflect(value: float, lo: float, hi: float) -> float:
    # Fold into [lo, hi] with mirror reflection (period 2 * span).
    span = hi - lo
    v = (value - lo) % (2.0 * span)
    return lo + (v if v <= span else 2.0 * span - v)


def gen_continuous(scenario: ContinuousScenario) -> GeneratedDataset:
    """Generate a bounded random-walk dataset; deterministic for a fixed seed.

    Steps are Gaussian with their norm clipped at 3 * step_sigma, so the
    consecutive label distance never exceeds that bound; reflection at the
    bounds only shrinks displacements.
    """
    rng = np.random.default_rng(scenario.seed)
    lo = np.array([b[0] for b in scenario.bounds])
    hi = np.array([b[1] for b in scenario.bounds])
    M = scenario.mixing_matrix()

    pos = lo + (hi - lo) * rng.random(2)
    positions = np.zeros((scenario.length, 2))
    velocities = np.zeros((scenario.length, 2))
    for t in range(scenario.length):
        positions[t] = pos
        if t + 1 < scenario.length:
            step = scenario.step_sigma * rng.standard_normal(2)
            norm = float(np.linalg.norm(step))
            cap = 3.0 * scenario.step_sigma
            if norm > cap:
                step *= cap / norm
            nxt = np.array(
                [_reflect(pos[d] + step[d], lo[d], hi[d]) for d in range(2)]
            )
            velocities[t + 1] = nxt - pos
            pos = nxt

    state = np.hstack([positions, velocities])
    features = state @ M.T
    if scenario.noise > 0:
        features = features + scenario.noise * rng.standard_normal(features.shape)

    samples = tuple(
        Sample(index=t, features=features[t], label=positions[t]) for t in range(scenario.length)
    )
    return GeneratedDataset(samples=samples)
