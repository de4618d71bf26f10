"""Metrics and the multi-trial experiment runner.

Each trial: split, fit the baseline, run oracles over the observation stream,
apply corrective heuristics, localize faults, execute every configured repair
strategy, and evaluate everything on the test set.  Trials are seeded as
``master_seed + trial_index`` and averaged; strategy deltas are compared with
a paired two-sided t-test across trials (the t survival function is the
regularized incomplete beta, hand-rolled like the chi-square kernel).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import (
    build_decoder,
    build_families,
    build_oracle_config,
    build_samples,
    enabled_fault_types,
    resolve_config,
)
from .data import CONTINUOUS, DISCRETE, label_kind, make_stream, split_dataset
from .heuristics import apply_corrections
from .localization import localization_report
from .oracles import FaultType, count_by_type, run_oracles
from .repair import AcquisitionPlan, ObservationArtifacts, Strategy, execute_repair
from .slicing import assign_slices

_TOL = 1e-12
_MAX_ITER = 500


def fault_frequency(events: Sequence, stream_length: int) -> float:
    """Summed event count across types divided by stream length."""
    if stream_length <= 0:
        raise ValueError("stream length must be positive")
    return len(events) / stream_length


def oracle_precision(events: Sequence, stream: Sequence, delta_err: Optional[float] = None):
    """Fraction of detections whose range covers at least one misprediction.

    Continuous streams count a misprediction when the output/truth distance
    exceeds ``delta_err``.  Returns None when there are no detections (the
    metric is undefined, not zero).
    """
    if not events:
        return None
    by_index = {}
    for rec in stream:
        by_index[rec.index] = rec
    true_detections = 0
    for e in events:
        hit = False
        for idx in range(e.start_index, e.end_index + 1):
            rec = by_index.get(idx)
            if rec is None:
                continue
            if rec.truth is None:
                raise ValueError(f"missing truth at flagged index {idx}")
            if isinstance(rec.output, str):
                wrong = rec.output != rec.truth
            else:
                if delta_err is None:
                    raise ValueError("continuous precision requires delta_err")
                wrong = float(np.linalg.norm(rec.output - rec.truth)) > delta_err
            if wrong:
                hit = True
                break
        true_detections += 1 if hit else 0
    return true_detections / len(events)


def performance(stream: Sequence, kind: Optional[str] = None) -> float:
    """Accuracy for discrete streams; MSE (mean over dimensions and time) for continuous."""
    if not stream:
        raise ValueError("empty stream")
    kinds = {label_kind(r.output) for r in stream}
    if len(kinds) != 1:
        raise ValueError("mixed output kinds in stream")
    found = kinds.pop()
    if kind is not None and kind != found:
        raise ValueError(f"stream kind is {found}, expected {kind}")
    for r in stream:
        if r.truth is None:
            raise ValueError(f"missing truth at index {r.index}")
    if found == DISCRETE:
        return sum(1 for r in stream if r.output == r.truth) / len(stream)
    se = [np.mean((np.asarray(r.output) - np.asarray(r.truth)) ** 2) for r in stream]
    return float(np.mean(se))


def heuristic_efficacy(raw_stream: Sequence, corrected_stream: Sequence):
    """Performance of raw vs. corrected outputs against truth: (before, after)."""
    if len(raw_stream) != len(corrected_stream):
        raise ValueError("streams must have equal length")
    return performance(raw_stream), performance(corrected_stream)


def _beta_cf(a: float, b: float, x: float) -> float:
    # Modified Lentz continued fraction for the incomplete beta.
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _TOL:
            return h
    raise ArithmeticError("incomplete beta continued fraction failed to converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), the CDF of the Beta(a, b) distribution at x."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must be in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return min(1.0, max(0.0, front * _beta_cf(a, b, x) / a))
    return min(1.0, max(0.0, 1.0 - front * _beta_cf(b, a, 1.0 - x) / b))


def student_t_two_sided_p(t: float, df: int) -> float:
    """P(|T| >= t) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    t = abs(float(t))
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def paired_t_test(a: Sequence[float], b: Sequence[float]):
    """Two-sided paired t-test; returns (t, p).

    Zero-variance differences use the degenerate convention: p = 1 when the
    mean difference is zero, otherwise p = 0.
    """
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    if len(a) < 2:
        raise ValueError("paired t-test needs at least two pairs")
    diffs = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    mean = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    n = len(diffs)
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = mean / (sd / math.sqrt(n))
    return t, student_t_two_sided_p(t, n - 1)


# ---------------------------------------------------------------------------
# Multi-trial experiment runner
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrialReport:
    """One trial's metrics; ``error`` is set when a stage aborted the trial.

    ``events`` and ``corrections`` carry the raw observation-phase artifacts
    for sidecar files; they are not part of the JSON report.
    """

    seed: int
    observation: Optional[dict] = None
    localization: Optional[dict] = None
    baseline: Optional[dict] = None
    strategies: Optional[dict] = None
    split_sizes: Optional[dict] = None
    error: Optional[str] = None
    events: tuple = ()
    corrections: tuple = ()

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "split_sizes": self.split_sizes,
            "observation": self.observation,
            "localization": self.localization,
            "baseline": self.baseline,
            "strategies": self.strategies,
            "error": self.error,
        }


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """All trials plus aggregates and pairwise significance tests."""

    trials: tuple
    aggregates: dict
    significance: dict
    config: dict

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "trials": [t.to_json_dict() for t in self.trials],
            "aggregates": self.aggregates,
            "significance": self.significance,
        }


def _test_metrics(stream, events, enabled, delta_err, kind) -> dict:
    counts = count_by_type(events)
    per_type = {t.value: counts[t] for t in enabled}
    summed = sum(per_type.values())
    return {
        "fault_counts": per_type,
        "summed_faults": summed,
        "frequency": summed / len(stream) if stream else 0.0,
        "performance": performance(stream, kind),
    }


def run_single_trial(document: dict, trial_index: int) -> TrialReport:
    """Run one seeded trial of the full pipeline; errors abort only this trial."""
    cfg = resolve_config(document)
    trial_seed = cfg["seed"] + trial_index
    try:
        return _run_single_trial_inner(cfg, trial_seed)
    except Exception as exc:  # noqa: BLE001 - reported per-trial by contract
        return TrialReport(seed=trial_seed, error=f"{type(exc).__name__}: {exc}")


def _run_single_trial_inner(cfg: dict, trial_seed: int) -> TrialReport:
    samples, kind, states = build_samples(cfg)
    oracle_cfg = build_oracle_config(cfg)
    enabled = enabled_fault_types(cfg, oracle_cfg, kind)
    families, task_family = build_families(cfg, kind, states, oracle_cfg)
    delta_err = cfg.get("delta_err")
    if delta_err is None and oracle_cfg.step_threshold is not None:
        delta_err = oracle_cfg.step_threshold / 2.0

    split = split_dataset(
        samples,
        ratio=cfg["split"]["ratio"],
        seed=trial_seed,
        mode=cfg["split"]["mode"],
        discard_fraction=cfg["split"]["discard_fraction"],
    )
    decoder = build_decoder(cfg, states)
    baseline = decoder.fit(split.train)

    obs_stream = make_stream(split.observe, baseline)
    events = run_oracles(obs_stream, oracle_cfg, enabled)
    corrected_stream, corrections = apply_corrections(obs_stream, events, oracle_cfg, enabled)

    assignments_by_family = {}
    row_labels = {}
    for fam in families:
        # output families read the corrected outputs, input families the raw inputs
        assignments_by_family[fam.id] = assign_slices(corrected_stream, [fam])
        row_labels[fam.id] = fam.labels
    localization = localization_report(
        events,
        assignments_by_family,
        len(obs_stream),
        row_labels_by_family=row_labels,
        task_family=task_family.id,
        task_labels=task_family.labels,
        floor=cfg["acquisition"]["floor"],
    )

    counts = count_by_type(events)
    before, after = heuristic_efficacy(obs_stream, corrected_stream)
    observation = {
        "length": len(obs_stream),
        "fault_counts": {t.value: counts[t] for t in enabled},
        "summed_faults": sum(counts[t] for t in enabled),
        "frequency": fault_frequency([e for e in events if e.fault_type in enabled], len(obs_stream)),
        "precision": {
            t.value: oracle_precision([e for e in events if e.fault_type == t], obs_stream, delta_err)
            for t in enabled
        },
        "heuristic_efficacy": {"before": before, "after": after},
        "n_corrections": len(corrections),
    }

    test_stream = make_stream(split.test, baseline)
    test_events = run_oracles(test_stream, oracle_cfg, enabled)
    baseline_metrics = _test_metrics(test_stream, test_events, enabled, delta_err, kind)

    artifacts = ObservationArtifacts.build(obs_stream, events, corrected_stream, corrections)
    strategies = {}
    for name in cfg["acquisition"]["strategies"]:
        plan = AcquisitionPlan(
            strategy=Strategy(name),
            n=cfg["acquisition"]["n"],
            seed=trial_seed,
            floor=cfg["acquisition"]["floor"],
        )
        repaired, info = execute_repair(
            baseline, plan, split.train, split.acquire, artifacts, task_family
        )
        r_stream = make_stream(split.test, repaired)
        r_events = run_oracles(r_stream, oracle_cfg, enabled)
        metrics = _test_metrics(r_stream, r_events, enabled, delta_err, kind)
        metrics["n_acquired"] = len(info["acquired_indices"])
        metrics["fallback_natural"] = info["fallback_natural"]
        metrics["distribution"] = info["distribution"]
        strategies[name] = metrics

    return TrialReport(
        seed=trial_seed,
        split_sizes={name: len(part) for name, part in split.parts().items()},
        observation=observation,
        localization=localization,
        baseline=baseline_metrics,
        strategies=strategies,
        events=tuple(events),
        corrections=tuple(corrections),
    )


def _mean_std(values: Sequence[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.sum() / len(arr))
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return {"mean": mean, "std": std, "values": [float(v) for v in values]}


def _aggregate(trials: Sequence[TrialReport], strategy_names: Sequence[str]) -> dict:
    ok = [t for t in trials if t.error is None]
    if not ok:
        return {"n_trials": len(trials), "n_failed": len(trials)}
    agg: dict = {"n_trials": len(trials), "n_failed": len(trials) - len(ok)}
    agg["observation"] = {
        "summed_faults": _mean_std([t.observation["summed_faults"] for t in ok]),
        "frequency": _mean_std([t.observation["frequency"] for t in ok]),
    }
    agg["baseline"] = {
        "summed_faults": _mean_std([t.baseline["summed_faults"] for t in ok]),
        "frequency": _mean_std([t.baseline["frequency"] for t in ok]),
        "performance": _mean_std([t.baseline["performance"] for t in ok]),
    }
    agg["strategies"] = {}
    for name in strategy_names:
        agg["strategies"][name] = {
            "summed_faults": _mean_std([t.strategies[name]["summed_faults"] for t in ok]),
            "frequency": _mean_std([t.strategies[name]["frequency"] for t in ok]),
            "performance": _mean_std([t.strategies[name]["performance"] for t in ok]),
        }
    return agg


def _significance(trials: Sequence[TrialReport], strategy_names: Sequence[str]) -> dict:
    ok = [t for t in trials if t.error is None]
    if len(ok) < 2:
        return {}
    systems = {"baseline": lambda t: t.baseline}
    for name in strategy_names:
        systems[name] = lambda t, _n=name: t.strategies[_n]
    out: dict = {}
    for metric in ("summed_faults", "performance"):
        out[metric] = {}
        names = sorted(systems)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                va = [systems[a](t)[metric] for t in ok]
                vb = [systems[b](t)[metric] for t in ok]
                t_stat, p = paired_t_test(va, vb)
                out[metric][f"{a}_vs_{b}"] = {
                    "t": None if math.isinf(t_stat) else t_stat,
                    "p": p,
                }
    return out


def run_trials(document: dict, parallel: int = 1) -> ExperimentReport:
    """Run the configured number of seeded trials and aggregate the results."""
    cfg = resolve_config(document)
    n_trials = cfg["trials"]
    if parallel > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [pool.submit(run_single_trial, cfg, i) for i in range(n_trials)]
            trials = tuple(f.result() for f in futures)
    else:
        trials = tuple(run_single_trial(cfg, i) for i in range(n_trials))

    strategy_names = list(cfg["acquisition"]["strategies"])
    return ExperimentReport(
        trials=trials,
        aggregates=_aggregate(trials, strategy_names),
        significance=_significance(trials, strategy_names),
        config=cfg,
    )
