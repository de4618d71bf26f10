"""Canonical synthetic experiment configurations.

The skewed discrete scenario is the repair testbed.  Two common tasks (A, B)
and one rare task (C) emit Gaussian features on the decoder's channels
(columns 0-1); a separate auxiliary channel (column 2) carries an awake/asleep
group signal that the decoder never sees.  Task C's feature mean drifts
slowly across the dataset, so the training block always misses part of C's
feature range: the baseline mispredicts C there, the auxiliary oracle flags
every such execution, and the corrective heuristic rewrites it to the asleep
state, concentrating the fault-based task distribution on C.  Acquiring C
samples teaches the unseen feature range; natural sampling mostly acquires
the already-learned common tasks.
"""

from __future__ import annotations

import copy

SKEWED_STATES = ("A", "B", "C")


def skewed_discrete_config(
    seed: int = 7,
    trials: int = 10,
    length: int = 10000,
    n_acquire: int = 500,
    strategies=("fault_based", "natural", "corrected_only", "fault_based_no_heuristics"),
    out_dir: str = "out/skewed",
) -> dict:
    """Repair testbed: rare, drifting task C with an auxiliary consistency channel."""
    return {
        "dataset": {
            "synthetic": {
                "kind": "discrete",
                "states": list(SKEWED_STATES),
                "legal": {s: list(SKEWED_STATES) for s in SKEWED_STATES},
                "feature_means": {
                    "A": [-3.5, 0.0, 2.5],
                    "B": [3.5, 0.0, 2.5],
                    "C": [0.0, 3.4, -2.5],
                },
                "weights": {"A": 0.44, "B": 0.44, "C": 0.12},
                "drift": {"C": 2.2},
                "dwell": 0.93,
                "noise": 0.85,
                "length": length,
                "seed": seed,
            }
        },
        "states": list(SKEWED_STATES),
        "decoder": {
            "type": "softmax",
            "learning_rate": 0.2,
            "epochs": 300,
            "l2": 1e-4,
            "incremental_epochs": 10,
            "retrain_mode": "incremental",
            "columns": [0, 1],
        },
        "oracles": {
            "window": 10,
            "flicker_changes": 4,
            "aux": {"threshold": 0.0, "columns": [2], "above": "awake"},
            "aux_map": {"A": "awake", "B": "awake", "C": "asleep"},
            "wake_state": "A",
            "sleep_state": "C",
        },
        "slices": {"task_family": "class"},
        "acquisition": {"n": n_acquire, "strategies": list(strategies), "floor": 0.0},
        "split": {"ratio": [6, 2, 1, 1], "mode": "contiguous", "discard_fraction": 0.0},
        "trials": trials,
        "seed": seed,
        "out_dir": out_dir,
    }


def continuous_demo_config(
    seed: int = 11,
    trials: int = 10,
    length: int = 6000,
    n_acquire: int = 300,
    strategies=("fault_based", "natural"),
    out_dir: str = "out/continuous",
) -> dict:
    """Cursor-style scenario: bounded random walk decoded by a Wiener cascade."""
    return {
        "dataset": {
            "synthetic": {
                "kind": "continuous",
                "bounds": [[0.0, 1.0], [0.0, 1.0]],
                "step_sigma": 0.02,
                "noise": 0.05,
                "length": length,
                "seed": seed,
            }
        },
        "decoder": {
            "type": "wiener_cascade",
            "lags": 2,
            "degree": 1,
            "ridge": 1e-6,
            "retrain_mode": "concat",
        },
        "oracles": {
            "window": 10,
            "tv_threshold": 0.6,
            "step_threshold": 0.12,
            "bounds": [[0.0, 1.0], [0.0, 1.0]],
        },
        "slices": {"task_family": "quadrant"},
        "acquisition": {"n": n_acquire, "strategies": list(strategies), "floor": 0.0},
        "split": {"ratio": [6, 2, 1, 1], "mode": "contiguous", "discard_fraction": 0.0},
        "trials": trials,
        "seed": seed,
        "out_dir": out_dir,
    }
