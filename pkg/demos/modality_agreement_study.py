"""Run a small multi-trial experiment and report cross-modality agreement.

This is a scaled-down version of the full validation experiment: a few
seeded trials, both modalities, then Pearson/ICC/Bland-Altman agreement on
stride-matched parameters.

Usage: python demos/modality_agreement_study.py [n_trials]
"""

import sys

from radargait import ExperimentConfig, run_experiment


def main() -> None:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 3
    cfg = ExperimentConfig(n_trials=n, trial_duration=30.0)
    print(f"running {n} trials x {len(cfg.modalities)} modalities "
          f"at {cfg.snr_db:.0f} dB SNR ...")
    report = run_experiment(cfg)

    print("\npooled accuracy vs. ground truth (%):")
    params = sorted(next(iter(report.pooled_accuracy.values())))
    header = f"{'parameter':16s}" + "".join(
        f"{m:>10s}" for m in cfg.modalities)
    print(header)
    for name in params:
        cells = "".join(f"{report.pooled_accuracy[m][name]:10.2f}"
                        for m in cfg.modalities)
        gap = report.accuracy_gap.get(name)
        tail = f"  gap={gap:5.2f}" if gap is not None else ""
        print(f"{name:16s}{cells}{tail}")

    print("\ninter-modality agreement on stride-matched values:")
    for name, rep in sorted(report.cross_modality.items()):
        for line in rep.summary_lines():
            print(f"  {name}: {line}")
        print()


if __name__ == "__main__":
    main()
