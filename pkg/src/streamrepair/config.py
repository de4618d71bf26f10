"""Run configuration: a single JSON document describing a whole experiment.

The document is validated exhaustively (every problem reported, not just the
first) before any computation.  All randomness flows from the single master
seed; trial seeds are derived as ``seed + trial_index``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from typing import Optional, Sequence

from .data import CONTINUOUS, DISCRETE, dataset_states, load_dataset_csv
from .decoders import (
    AuxiliaryBinaryClassifier,
    NearestCentroidClassifier,
    SoftmaxClassifier,
    WienerCascade,
)
from .oracles import FaultType, OracleConfig
from .repair import Strategy
from .slicing import ActivityFamily, ClassTaskFamily, DirectionFamily, QuadrantFamily
from .synthetic import ContinuousScenario, DiscreteScenario, gen_continuous, gen_discrete


class ConfigError(ValueError):
    """Raised with the full list of validation problems."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))


DEFAULTS = {
    "split": {"ratio": [6, 2, 1, 1], "mode": "contiguous", "discard_fraction": 0.0},
    "oracles": {"window": 10, "flicker_changes": 4},
    "slices": {"direction_bins": 8, "input_activity": True},
    "acquisition": {"n": 500, "strategies": ["fault_based", "natural"], "floor": 0.0},
    "artifacts": {"events": True, "corrections": True, "localization": True},
    "trials": 10,
    "seed": 0,
    "out_dir": "out",
}

_VALID_STRATEGIES = {s.value for s in Strategy}
_VALID_FAULT_TYPES = {t.value for t in FaultType}
_VALID_DECODERS = {"softmax", "nearest_centroid", "wiener_cascade"}


def _merged(document: dict) -> dict:
    out = copy.deepcopy(DEFAULTS)
    for key, value in document.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key].update(value)
        else:
            out[key] = value
    return out


def validate_config(document: dict) -> list:
    """Return the full list of validation problems (empty when valid)."""
    problems: list = []
    d = _merged(document)

    dataset = d.get("dataset")
    if not isinstance(dataset, dict):
        problems.append("dataset: required object with 'csv' or 'synthetic'")
        dataset = {}
    has_csv = "csv" in dataset
    has_synth = "synthetic" in dataset
    if has_csv == has_synth:
        problems.append("dataset: exactly one of 'csv' or 'synthetic' must be given")
    synth_kind = None
    if has_synth:
        synth = dataset.get("synthetic") or {}
        synth_kind = synth.get("kind")
        if synth_kind not in (DISCRETE, CONTINUOUS):
            problems.append("dataset.synthetic.kind: must be 'discrete' or 'continuous'")

    decoder = d.get("decoder")
    if not isinstance(decoder, dict) or decoder.get("type") not in _VALID_DECODERS:
        problems.append(f"decoder.type: must be one of {sorted(_VALID_DECODERS)}")
    else:
        if synth_kind == DISCRETE and decoder["type"] == "wiener_cascade":
            problems.append("decoder: wiener_cascade requires a continuous dataset")
        if synth_kind == CONTINUOUS and decoder["type"] in ("softmax", "nearest_centroid"):
            problems.append(f"decoder: {decoder['type']} requires a discrete dataset")
        if decoder.get("retrain_mode", "concat") == "incremental" and decoder["type"] != "softmax":
            problems.append("decoder.retrain_mode: incremental is only available for softmax")

    oracles = d.get("oracles", {})
    if not isinstance(oracles, dict):
        problems.append("oracles: must be an object")
        oracles = {}
    enabled = oracles.get("enabled")
    if enabled is not None:
        for t in enabled:
            if t not in _VALID_FAULT_TYPES:
                problems.append(f"oracles.enabled: unknown fault type {t!r}")
    if oracles.get("window", 10) < 2:
        problems.append("oracles.window: must be >= 2")
    if oracles.get("flicker_changes", 4) < 2:
        problems.append("oracles.flicker_changes: must be >= 2")
    for key in ("tv_threshold", "step_threshold"):
        if oracles.get(key) is not None and oracles[key] <= 0:
            problems.append(f"oracles.{key}: must be positive")
    bounds = oracles.get("bounds")
    if bounds is not None:
        try:
            for pair in bounds:
                lo, hi = pair
                if not float(lo) < float(hi):
                    problems.append("oracles.bounds: lo must be < hi per dimension")
        except (TypeError, ValueError):
            problems.append("oracles.bounds: must be a list of [lo, hi] pairs")
    lo_t, hi_t = oracles.get("activity_low"), oracles.get("activity_high")
    if (lo_t is None) != (hi_t is None):
        problems.append("oracles: activity_low and activity_high must be given together")
    elif lo_t is not None and not lo_t < hi_t:
        problems.append("oracles: activity_low must be < activity_high")

    states = d.get("states")
    legal = oracles.get("legal")
    if legal is not None:
        if states:
            known = set(states)
            for s, targets in legal.items():
                if s not in known:
                    problems.append(f"oracles.legal: state {s!r} not in declared state set")
                for t in targets:
                    if t not in known:
                        problems.append(f"oracles.legal: successor {t!r} not in declared state set")
            for s in known:
                if s not in legal:
                    problems.append(f"oracles.legal: missing entry for state {s!r}")
                elif s not in legal[s]:
                    problems.append(f"oracles.legal: self-transition must be legal for {s!r}")
    aux_map = oracles.get("aux_map")
    if (aux_map is None) != (oracles.get("aux") is None):
        problems.append("oracles: aux and aux_map must be given together")
    if aux_map is not None:
        for s, v in aux_map.items():
            if v not in ("awake", "asleep"):
                problems.append(f"oracles.aux_map[{s!r}]: must be 'awake' or 'asleep'")
        if states:
            for s in states:
                if s not in aux_map:
                    problems.append(f"oracles.aux_map: missing entry for state {s!r}")
        for key, want in (("wake_state", "awake"), ("sleep_state", "asleep")):
            ref = oracles.get(key)
            if ref is None:
                problems.append(f"oracles.{key}: required when aux_map is configured")
            elif aux_map.get(ref) != want:
                problems.append(f"oracles.{key}: {ref!r} must map to {want!r}")

    slices = d.get("slices", {})
    task_family = slices.get("task_family")
    if task_family not in (None, "class", "direction", "quadrant"):
        problems.append("slices.task_family: must be 'class', 'direction', or 'quadrant'")
    if slices.get("direction_bins", 8) not in (4, 8):
        problems.append("slices.direction_bins: must be 4 or 8")
    if task_family == "quadrant" and bounds is None:
        problems.append("slices.task_family=quadrant requires oracles.bounds")
    if task_family == "direction" and oracles.get("step_threshold") is None and slices.get("stationary_eps") is None:
        problems.append("slices.task_family=direction requires oracles.step_threshold or slices.stationary_eps")

    acquisition = d.get("acquisition", {})
    if acquisition.get("n", 500) <= 0:
        problems.append("acquisition.n: must be positive")
    strategies = acquisition.get("strategies", [])
    if not strategies:
        problems.append("acquisition.strategies: at least one strategy required")
    for s in strategies:
        if s not in _VALID_STRATEGIES:
            problems.append(f"acquisition.strategies: unknown strategy {s!r}")
    if not 0.0 <= acquisition.get("floor", 0.0) < 1.0:
        problems.append("acquisition.floor: must be in [0, 1)")

    split = d.get("split", {})
    ratio = split.get("ratio", [6, 2, 1, 1])
    if len(ratio) != 4 or any(r < 0 for r in ratio) or sum(ratio) <= 0:
        problems.append("split.ratio: must be four non-negative numbers with positive sum")
    if split.get("mode", "contiguous") not in ("contiguous", "shuffled"):
        problems.append("split.mode: must be 'contiguous' or 'shuffled'")
    if not 0.0 <= split.get("discard_fraction", 0.0) < 1.0:
        problems.append("split.discard_fraction: must be in [0, 1)")

    if not isinstance(d.get("trials", 10), int) or d.get("trials", 10) <= 0:
        problems.append("trials: must be a positive integer")
    if not isinstance(d.get("seed", 0), int):
        problems.append("seed: must be an integer")

    return problems


def resolve_config(document: dict) -> dict:
    """Merge defaults and validate; raises ConfigError listing every problem."""
    problems = validate_config(document)
    if problems:
        raise ConfigError(problems)
    return _merged(document)


# ---------------------------------------------------------------------------
# Builders: construct runtime objects from a resolved config document.
# ---------------------------------------------------------------------------


def build_samples(cfg: dict):
    """Load or generate the dataset; returns (samples, kind, states)."""
    dataset = cfg["dataset"]
    if "csv" in dataset:
        samples = load_dataset_csv(dataset["csv"])
        kind = DISCRETE if isinstance(samples[0].label, str) else CONTINUOUS
    else:
        synth = dict(dataset["synthetic"])
        kind = synth.pop("kind")
        if kind == DISCRETE:
            generated = gen_discrete(DiscreteScenario(**synth))
        else:
            generated = gen_continuous(ContinuousScenario(**synth))
        samples = list(generated.samples)
    states = None
    if kind == DISCRETE:
        states = tuple(cfg.get("states") or dataset_states(samples))
    return samples, kind, states


def build_decoder(cfg: dict, states: Optional[Sequence[str]]):
    spec = dict(cfg["decoder"])
    kind = spec.pop("type")
    if kind == "softmax":
        return SoftmaxClassifier(states=tuple(states), **spec)
    if kind == "nearest_centroid":
        return NearestCentroidClassifier(states=tuple(states), **spec)
    if kind == "wiener_cascade":
        return WienerCascade(**spec)
    raise ValueError(f"unknown decoder type {kind!r}")


def build_oracle_config(cfg: dict) -> OracleConfig:
    o = cfg.get("oracles", {})
    aux = None
    if o.get("aux") is not None:
        aux = AuxiliaryBinaryClassifier.from_json_dict({"type": "aux_binary", **o["aux"]})
    return OracleConfig(
        legal=o.get("legal"),
        window=o.get("window", 10),
        flicker_changes=o.get("flicker_changes", 4),
        tv_threshold=o.get("tv_threshold"),
        step_threshold=o.get("step_threshold"),
        bounds=None if o.get("bounds") is None else tuple(tuple(b) for b in o["bounds"]),
        aux=aux,
        aux_map=o.get("aux_map"),
        wake_state=o.get("wake_state"),
        sleep_state=o.get("sleep_state"),
        activity_low=o.get("activity_low"),
        activity_high=o.get("activity_high"),
    )


def enabled_fault_types(cfg: dict, oracle_config: OracleConfig, kind: str) -> tuple:
    explicit = cfg.get("oracles", {}).get("enabled")
    if explicit is not None:
        return tuple(t for t in FaultType if t.value in set(explicit))
    return oracle_config.enabled_types(kind)


def build_families(cfg: dict, kind: str, states: Optional[Sequence[str]], oracle_config: OracleConfig):
    """Construct the slice families; returns (families, task_family)."""
    s = cfg.get("slices", {})
    families = []
    task_name = s.get("task_family") or ("class" if kind == DISCRETE else "direction")

    if kind == DISCRETE:
        task = ClassTaskFamily(states)
        families.append(task)
    else:
        eps = s.get("stationary_eps")
        if eps is None:
            eps = 0.1 * (oracle_config.step_threshold or 1e-8)
        direction = DirectionFamily(bins=s.get("direction_bins", 8), stationary_eps=eps)
        families.append(direction)
        quadrant = None
        if oracle_config.bounds is not None:
            quadrant = QuadrantFamily(oracle_config.bounds)
            families.append(quadrant)
        task = quadrant if task_name == "quadrant" else direction

    if s.get("input_activity", True) and oracle_config.activity_low is not None:
        families.append(ActivityFamily(oracle_config.activity_low, oracle_config.activity_high))

    return families, task


def load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        document = json.load(fh)
    return resolve_config(document)
