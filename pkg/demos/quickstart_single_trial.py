"""Simulate one walking trial, run the pipeline on both radar modalities
and print stride-level results side by side.

Usage: python demos/quickstart_single_trial.py [seed]
"""

import sys

import numpy as np

from radargait import (GaitModel, NoiseModel, RadarConfig, TrialProtocol,
                       simulate_walk, synthesize_fmcw, synthesize_uwb)
from radargait.pipeline import process_recording


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7
    model = GaitModel(trial_duration=30.0)
    truth = simulate_walk(model, TrialProtocol(), seed=seed)
    print(f"simulated {truth.time[-1]:.1f} s walk, "
          f"{truth.true_events.hs_times.size} true heel strikes, "
          f"target speed {model.walking_speed:.2f} m/s")

    noise = NoiseModel(snr_db=20.0)
    recordings = {
        "uwb": synthesize_uwb(truth, RadarConfig.uwb_default(), noise,
                              seed=seed + 1),
        "fmcw": synthesize_fmcw(truth, RadarConfig.fmcw_default(), noise,
                                seed=seed + 2),
    }

    true_pp = truth.true_parameters
    print(f"\n{'':14s}{'truth':>10s}{'uwb':>10s}{'fmcw':>10s}")
    results = {m: process_recording(p) for m, p in recordings.items()}
    for name in ("stride_time", "stride_length", "walking_speed",
                 "stance_time", "swing_time"):
        row = [float(np.mean(getattr(true_pp, name)))]
        for m in ("uwb", "fmcw"):
            pp = results[m].parameters
            row.append(float(np.mean(getattr(pp, name)))
                       if pp.n_strides else float("nan"))
        print(f"{name:14s}" + "".join(f"{v:10.3f}" for v in row))
    for m, res in results.items():
        print(f"\n{m}: {res.parameters.n_strides} strides in "
              f"{len(res.mask.segments)} walking segment(s)")


if __name__ == "__main__":
    main()
