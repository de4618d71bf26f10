"""Config-driven command-line entry point.

Subcommands: ``generate`` (emit a synthetic dataset as CSV plus a manifest),
``run`` (execute the multi-trial experiment and write report files), and
``localize`` (standalone fault localization from an events file and a slices
file).  Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .config import ConfigError, build_samples, resolve_config
from .data import save_dataset_csv
from .heuristics import corrections_to_jsonl
from .localization import localization_report
from .oracles import events_from_jsonl, events_to_jsonl
from .slicing import assignments_from_csv


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_config(path: str, seed_override, out_override) -> dict:
    with open(path, encoding="utf-8") as fh:
        document = json.load(fh)
    if seed_override is not None:
        document["seed"] = seed_override
    if out_override is not None:
        document["out_dir"] = out_override
    return resolve_config(document)


def cmd_generate(cfg: dict) -> int:
    if "synthetic" not in cfg["dataset"]:
        print("generate requires a synthetic dataset configuration", file=sys.stderr)
        return 1
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    samples, kind, _states = build_samples(cfg)
    csv_path = out_dir / "dataset.csv"
    save_dataset_csv(samples, csv_path)
    digest = hashlib.sha256(csv_path.read_bytes()).hexdigest()
    manifest = {
        "kind": kind,
        "length": len(samples),
        "seed": cfg["dataset"]["synthetic"].get("seed", 0),
        "parameters": cfg["dataset"]["synthetic"],
        "sha256": digest,
    }
    _write_json(out_dir / "manifest.json", manifest)
    print(f"wrote {csv_path} ({len(samples)} rows) and manifest.json")
    return 0


def cmd_run(cfg: dict, parallel: int) -> int:
    from .evaluation import run_trials

    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    report = run_trials(cfg, parallel=parallel)
    _write_json(out_dir / "experiment.json", report.to_json_dict())

    artifacts = cfg["artifacts"]
    if artifacts.get("events", True):
        for i, trial in enumerate(report.trials):
            events_to_jsonl(trial.events, out_dir / f"events_trial{i}.jsonl")
    if artifacts.get("corrections", True):
        for i, trial in enumerate(report.trials):
            corrections_to_jsonl(trial.corrections, out_dir / f"corrections_trial{i}.jsonl")
    if artifacts.get("localization", True):
        loc = {
            "trials": [
                {"seed": t.seed, "localization": t.localization}
                for t in report.trials
                if t.error is None
            ]
        }
        _write_json(out_dir / "localization.json", loc)

    failed = [t for t in report.trials if t.error is not None]
    if failed:
        for t in failed:
            print(f"trial seed={t.seed} failed: {t.error}", file=sys.stderr)
        return 2
    print(f"wrote {out_dir / 'experiment.json'} ({len(report.trials)} trials)")
    return 0


def cmd_localize(events_path: str, slices_path: str, out_dir: str) -> int:
    events = events_from_jsonl(events_path)
    assignments = assignments_from_csv(slices_path)
    by_family: dict = {}
    for a in assignments:
        by_family.setdefault(a.family, []).append(a)
    if not by_family:
        print("slices file contains no assignments", file=sys.stderr)
        return 2
    lengths = {fam: len(rows) for fam, rows in by_family.items()}
    if len(set(lengths.values())) != 1:
        print(f"families cover different execution counts: {lengths}", file=sys.stderr)
        return 2
    stream_length = next(iter(lengths.values()))
    report = localization_report(events, by_family, stream_length)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "localization.json", report)
    print(f"wrote {out / 'localization.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamrepair",
        description="Detect, localize, and repair faults in a streaming decoder pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate a synthetic dataset CSV plus manifest")
    p_gen.add_argument("--config", required=True, help="path to the JSON run configuration")
    p_gen.add_argument("--seed", type=int, default=None, help="override the master seed")
    p_gen.add_argument("--out", default=None, help="override the output directory")

    p_run = sub.add_parser("run", help="run the configured multi-trial experiment")
    p_run.add_argument("--config", required=True, help="path to the JSON run configuration")
    p_run.add_argument("--seed", type=int, default=None, help="override the master seed")
    p_run.add_argument("--out", default=None, help="override the output directory")
    p_run.add_argument(
        "--parallel-trials", type=int, default=1, help="run trials in N worker processes"
    )

    p_loc = sub.add_parser("localize", help="localize faults from an events file and a slices file")
    p_loc.add_argument("--events", required=True, help="fault events (JSON lines)")
    p_loc.add_argument("--slices", required=True, help="slice assignments (CSV: index,family,label)")
    p_loc.add_argument("--out", default="out", help="output directory")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "localize":
            return cmd_localize(args.events, args.slices, args.out)
        cfg = _load_config(args.config, args.seed, args.out)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "run":
            return cmd_run(cfg, parallel=args.parallel_trials)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
