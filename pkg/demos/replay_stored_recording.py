"""Record a trial to disk, then reprocess it offline from the .rpm file.

Demonstrates the storage round trip: simulate -> save range-profile matrix
plus truth sidecar -> reload -> score. The replayed accuracies track the
live run because the pipeline is deterministic given the stored samples.

Usage: python demos/replay_stored_recording.py [out_dir]
"""

import sys
from pathlib import Path

from radargait import (GaitModel, NoiseModel, RadarConfig, TrialProtocol,
                       replay, save_rpm, save_truth, simulate_walk,
                       synthesize_uwb)


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("replay_demo")
    out.mkdir(parents=True, exist_ok=True)

    truth = simulate_walk(GaitModel(trial_duration=30.0), TrialProtocol(),
                          seed=11)
    profiles = synthesize_uwb(truth, RadarConfig.uwb_default(),
                              NoiseModel(snr_db=20.0), seed=12)
    rpm = out / "uwb.rpm"
    sidecar = out / "truth.json"
    save_rpm(rpm, profiles)
    save_truth(sidecar, truth)
    print(f"wrote {rpm} ({rpm.stat().st_size / 1e6:.1f} MB) and {sidecar}")

    score = replay(rpm, sidecar, out_dir=out)
    print(f"\nreplayed {score.n_strides} strides "
          f"(truth has {score.n_true_strides}); lag {score.lag * 1e3:.1f} ms")
    for name, acc in sorted(score.parameter_accuracy.items()):
        print(f"  {name:16s} {acc:6.2f}% accurate")
    print(f"\nper-stride CSVs written to {out}/")


if __name__ == "__main__":
    main()
