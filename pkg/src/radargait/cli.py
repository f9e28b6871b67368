"""Command-line entry points: simulate, run, replay, stats."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .core import save_rpm
from .experiment import (ExperimentConfig, radar_config_for, replay,
                         run_experiment, synthesizer_for)
from .gait import GaitParameterSet
from .pipeline import PipelineConfig
from .stats import AgreementReport
from .synth import GaitModel, NoiseModel, TrialProtocol, save_truth, simulate_walk


def _add_common(p):
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--modality", choices=("uwb", "fmcw", "both"), default="both")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="radargait",
        description="Synthetic-walker radar gait analysis toolkit",
    )
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", help="simulate one trial and store the "
                                        "recordings plus truth sidecar")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="run the full multi-trial experiment")
    _add_common(p)
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel trial workers")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="reprocess a stored recording")
    p.add_argument("recording", type=Path)
    p.add_argument("--truth", type=Path, help="truth sidecar for scoring")
    _add_common(p)
    p.add_argument("--emit-rdt", action="store_true")
    p.add_argument("--confidence-threshold", type=float,
                   help="walking-detector threshold override")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("stats", help="agreement statistics between the two "
                                     "modalities of a strides.csv")
    p.add_argument("strides_csv", type=Path)
    p.add_argument("--parameter", choices=GaitParameterSet.PARAMETER_NAMES,
                   help="restrict to one parameter")
    p.set_defaults(func=cmd_stats)
    return ap


def _experiment_config(args) -> ExperimentConfig:
    import dataclasses
    cfg = (ExperimentConfig.from_json(args.config) if args.config
           else ExperimentConfig())
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _experiment_config(args)
    out = args.out or Path("simulated")
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.master_seed))
    model = GaitModel(trial_duration=cfg.trial_duration, **cfg.model_overrides)
    sim_seed = int(rng.integers(0, 2 ** 31))
    truth = simulate_walk(model, TrialProtocol(), seed=sim_seed)
    mods = cfg.modalities if args.modality == "both" else (args.modality,)
    for name in mods:
        nseed = int(rng.integers(0, 2 ** 31))
        profiles = synthesizer_for(name)(
            truth, radar_config_for(name), NoiseModel(snr_db=cfg.snr_db),
            seed=nseed)
        save_rpm(out / f"trial000_{name}.rpm", profiles)
        print(f"wrote {out / f'trial000_{name}.rpm'}")
    save_truth(out / "trial000_truth.json", truth)
    print(f"wrote {out / 'trial000_truth.json'}")
    return 0


def _rdt_csv_sink(path: Path):
    fh = open(path, "w", encoding="utf-8")
    fh.write("frame_time,range,velocity,magnitude\n")

    def sink(cube):
        # keep the dump tractable: only cells above a tenth of the frame max
        for i in range(cube.n_frames):
            fr = cube.frames[i]
            keep = np.argwhere(fr > 0.1 * fr.max())
            for r, d in keep:
                fh.write(f"{cube.frame_times[i]!r},{cube.range_axis[r]!r},"
                         f"{cube.velocity_axis[d]!r},{fr[r, d]!r}\n")

    sink.close = fh.close
    return sink


def cmd_run(args) -> int:
    import dataclasses
    cfg = _experiment_config(args)
    if args.modality != "both":
        cfg = dataclasses.replace(cfg, modalities=(args.modality,))
    out = args.out or Path("experiment")
    report = run_experiment(cfg, out_dir=out, jobs=args.jobs)
    print(f"{len(report.trials)} trials, {report.n_failed} failed; "
          f"reports in {out}")
    for t in report.trials:
        if t.error is None and all(s.n_strides == 0 for s in t.scores.values()):
            print(f"warning: trial {t.trial} produced no strides",
                  file=sys.stderr)
    for m, per in report.pooled_accuracy.items():
        print(f"[{m}] " + "  ".join(f"{k}={per[k]:.2f}%" for k in sorted(per)))
    return 0


def cmd_replay(args) -> int:
    pipeline = PipelineConfig()
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        pipeline = ExperimentConfig.from_dict(doc).pipeline
    if args.confidence_threshold is not None:
        import dataclasses
        pipeline = dataclasses.replace(
            pipeline, walking=dataclasses.replace(
                pipeline.walking,
                confidence_threshold=args.confidence_threshold))
    sink = None
    if args.emit_rdt:
        out = args.out or Path(".")
        out.mkdir(parents=True, exist_ok=True)
        sink = _rdt_csv_sink(Path(out) / "rdt_frames.csv")
    try:
        res = replay(args.recording, truth_path=args.truth, pipeline=pipeline,
                     out_dir=args.out, rdt_sink=sink)
    finally:
        if sink is not None:
            sink.close()
    if hasattr(res, "parameter_accuracy"):
        print(f"lag = {res.lag!r} s, strides = {res.n_strides} "
              f"(truth {res.n_true_strides})")
        for k, v in sorted(res.parameter_accuracy.items()):
            print(f"{k}_accuracy = {v:.2f}%")
    else:
        print(f"strides = {res.parameters.n_strides}, "
              f"segments = {len(res.segments)}")
    return 0


def cmd_stats(args) -> int:
    with open(args.strides_csv, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print("no strides", file=sys.stderr)
        return 1
    mods = sorted({r["modality"] for r in rows})
    if len(mods) != 2:
        print(f"need exactly 2 modalities in the file, found {mods}",
              file=sys.stderr)
        return 1
    names = ([args.parameter] if args.parameter
             else list(GaitParameterSet.PARAMETER_NAMES))
    by_key = {}
    for r in rows:
        key = (r["trial"], round(float(r["start_time"]), 2))
        by_key.setdefault(key, {})[r["modality"]] = r
    for name in names:
        xa, xb = [], []
        for pair in by_key.values():
            if len(pair) == 2:
                xa.append(float(pair[mods[0]][name]))
                xb.append(float(pair[mods[1]][name]))
        if len(xa) < 3:
            print(f"[{name}] fewer than 3 matched strides, skipped")
            continue
        rep = AgreementReport.from_pairs(xa, xb)
        print(f"[{name}] " + "  ".join(rep.summary_lines()))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
