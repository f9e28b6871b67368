"""Multi-trial experiment runner: synthesize both modalities from shared
kinematic truth, process each with the identical pipeline, and score
accuracy against the truth plus agreement between the modalities.

Per-trial gait parameters are drawn from configured ranges so the
cross-modality agreement statistics have between-trial variance to work
with.  Everything is driven by one master seed; reports are byte-identical
across reruns.
"""

from __future__ import annotations

import dataclasses
import json
import traceback
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Modality, RadarConfig, RangeProfileMatrix, load_rpm, save_rpm
from .gait import AlignmentError, GaitParameterSet, align_streams
from .pipeline import PipelineConfig, PipelineResult, process_recording
from .stats import (AgreementReport, accuracy_percent, pair_nearest,
                    pearson_r)
from .synth import (GaitModel, KinematicTruth, NoiseModel, TrialProtocol,
                    load_truth, save_truth, simulate_walk, synthesize_fmcw,
                    synthesize_uwb)

MODALITY_NAMES = ("uwb", "fmcw")


@dataclass(frozen=True)
class ExperimentConfig:
    n_trials: int = 10
    master_seed: int = 42
    snr_db: float = 20.0
    trial_duration: float = 30.0
    walking_speed_range: tuple[float, float] = (0.80, 0.92)
    stride_time_range: tuple[float, float] = (1.00, 1.20)
    duty_factor_range: tuple[float, float] = (0.58, 0.63)
    modalities: tuple[str, ...] = MODALITY_NAMES
    save_recordings: bool = False
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    model_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        for m in self.modalities:
            if m not in MODALITY_NAMES:
                raise ValueError(f"unknown modality {m!r}")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            doc = json.load(fh)
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        pipe_doc = doc.pop("pipeline", {})
        pipeline = PipelineConfig(
            **{
                k: (dataclasses.replace(getattr(PipelineConfig(), k), **v)
                    if isinstance(v, dict) else v)
                for k, v in pipe_doc.items()
            }
        )
        for key in ("walking_speed_range", "stride_time_range",
                    "duty_factor_range", "modalities"):
            if key in doc:
                doc[key] = tuple(doc[key])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(
                f"unknown experiment option(s): {', '.join(sorted(unknown))}")
        return cls(pipeline=pipeline, **doc)


def radar_config_for(name: str) -> RadarConfig:
    return RadarConfig.uwb_default() if name == "uwb" else RadarConfig.fmcw_default()


def synthesizer_for(name: str):
    return synthesize_uwb if name == "uwb" else synthesize_fmcw


@dataclass
class TrialScore:
    """Accuracy of one modality's pipeline output against the shared truth."""

    trial: int
    modality: str
    lag: float
    n_strides: int
    n_true_strides: int
    event_time_accuracy: dict[str, float]      # kind -> mean %
    event_range_accuracy: dict[str, float]
    parameter_accuracy: dict[str, float]       # name -> mean %
    parameter_means: dict[str, float]
    true_parameter_means: dict[str, float]
    n_segments: int
    n_true_segments: int
    boundary_error: float                      # worst |boundary - truth| [s]
    fidelity: dict[str, float]                 # stream -> Pearson r in-mask
    matched_stride_start: np.ndarray           # truth-timebase stride keys
    matched_stride_values: dict[str, np.ndarray]
    result: PipelineResult


@dataclass
class TrialRecord:
    trial: int
    model: GaitModel
    scores: dict[str, TrialScore]
    error: str | None = None


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    trials: list[TrialRecord]
    cross_modality: dict[str, AgreementReport]
    accuracy_gap: dict[str, float]
    pooled_accuracy: dict[str, dict[str, float]]  # modality -> name -> mean %

    @property
    def n_failed(self) -> int:
        return sum(1 for t in self.trials if t.error is not None)


def _true_mask_runs(mask: np.ndarray, rate: float) -> list[tuple[float, float]]:
    edges = np.flatnonzero(np.diff(np.concatenate(([0], mask.view(np.int8), [0]))))
    return [(a / rate, (b - 1) / rate) for a, b in edges.reshape(-1, 2)]


def score_trial(trial: int, modality: str, result: PipelineResult,
                truth: KinematicTruth) -> TrialScore:
    """Align the pipeline output to the truth and score every criterion."""
    return score_against(trial, modality, result, truth.merged_feet,
                         truth.true_events, truth.true_parameters,
                         truth.true_walking_mask, truth.sample_rate,
                         ref_torso=truth.torso)


def score_against(trial: int, modality: str, result: PipelineResult,
                  ref_feet, tev, tp, true_mask, mask_rate,
                  ref_torso=None) -> TrialScore:
    """Score a pipeline result against reference feet trajectory, events,
    parameters and walking mask (from a live simulation or a sidecar)."""
    feet = result.feet
    ref_speed = np.interp(feet.time, ref_feet.time, ref_feet.speed)
    # outside the walking bouts the feet track is noise-driven; zero both
    # streams there so the alignment is set by the gait pattern alone
    est_speed = np.where(result.mask.sample_at(feet.time), feet.speed, 0.0)
    # trigger-latency scale search window; anything past half a stride lets
    # the search lock onto the next step of these nearly periodic trials
    try:
        lag = align_streams(est_speed, ref_speed, feet.sample_rate, max_lag=0.25)
    except AlignmentError:
        # nothing to align (e.g. no walking in either stream): score at zero
        # lag so a stationary trial still yields a zero-stride report
        lag = 0.0
    # a feature at truth time t appears in the radar stream at t - lag
    shift = -lag

    # trajectory fidelity: Pearson r on frames inside the true walking mask
    # (outside it the extracted tracks are unconstrained by the scene)
    mask_t = np.arange(np.asarray(true_mask).size) / mask_rate
    walk = np.interp(feet.time + lag, mask_t,
                     np.asarray(true_mask, dtype=float)) > 0.5
    fidelity = {}
    if np.count_nonzero(walk) >= 3:
        tq = feet.time[walk] + lag
        fidelity["feet_velocity"] = pearson_r(
            feet.velocity[walk],
            np.interp(tq, ref_feet.time, ref_feet.velocity))[0]
        if ref_torso is not None:
            fidelity["torso_range"] = pearson_r(
                result.torso.range[walk],
                np.interp(tq, ref_torso.time, ref_torso.range))[0]
            fidelity["torso_velocity"] = pearson_r(
                result.torso.velocity[walk],
                np.interp(tq, ref_torso.time, ref_torso.velocity))[0]
    stride_period = float(np.median(tp.stride_time)) if tp.n_strides else 1.0
    # events repeat every half stride (alternating feet): a tolerance any
    # looser than a quarter stride lets a missed event trigger a cascade of
    # off-by-one pairings
    tol = 0.25 * stride_period

    ev = result.events
    ev_time_acc, ev_range_acc = {}, {}
    for kind, et, er, tt, tr in (
        ("hs", ev.hs_times, ev.hs_ranges, tev.hs_times, tev.hs_ranges),
        ("to", ev.to_times, ev.to_ranges, tev.to_times, tev.to_ranges),
    ):
        ei, ri = pair_nearest(et, tt + shift, tol)
        if ei.size == 0:
            ev_time_acc[kind] = 0.0
            ev_range_acc[kind] = 0.0
            continue
        ev_time_acc[kind] = float(np.mean([
            accuracy_percent(et[i], tt[j] + shift) for i, j in zip(ei, ri)
        ]))
        ev_range_acc[kind] = float(np.mean([
            accuracy_percent(er[i], tr[j]) for i, j in zip(ei, ri)
        ]))

    pp = result.parameters
    ei, ri = pair_nearest(pp.start_time, tp.start_time + shift, tol)
    par_acc, par_mean, true_mean = {}, {}, {}
    matched_vals = {}
    for name in GaitParameterSet.PARAMETER_NAMES:
        est = pp.values(name)
        ref = tp.values(name)
        par_mean[name] = float(est.mean()) if est.size else float("nan")
        true_mean[name] = float(ref.mean()) if ref.size else float("nan")
        if ei.size:
            par_acc[name] = float(np.mean([
                accuracy_percent(est[i], ref[j]) for i, j in zip(ei, ri)
            ]))
            matched_vals[name] = est[ei]
        else:
            par_acc[name] = 0.0
            matched_vals[name] = np.array([])
    matched_start = tp.start_time[ri] if ei.size else np.array([])

    true_runs = _true_mask_runs(true_mask, mask_rate)
    est_runs = result.mask.segments
    boundary = float("inf")
    if len(est_runs) == len(true_runs) and est_runs:
        boundary = max(
            max(abs(ea - (ta + shift)), abs(eb - (tb + shift)))
            for (ea, eb), (ta, tb) in zip(est_runs, true_runs)
        )

    return TrialScore(
        trial=trial, modality=modality, lag=lag,
        n_strides=pp.n_strides, n_true_strides=tp.n_strides,
        event_time_accuracy=ev_time_acc, event_range_accuracy=ev_range_acc,
        parameter_accuracy=par_acc, parameter_means=par_mean,
        true_parameter_means=true_mean,
        n_segments=len(est_runs), n_true_segments=len(true_runs),
        boundary_error=boundary,
        fidelity=fidelity,
        matched_stride_start=matched_start,
        matched_stride_values=matched_vals,
        result=result,
    )


def _draw_model(cfg: ExperimentConfig, rng: np.random.Generator) -> GaitModel:
    kw = dict(
        walking_speed=float(rng.uniform(*cfg.walking_speed_range)),
        stride_time=float(rng.uniform(*cfg.stride_time_range)),
        duty_factor=float(rng.uniform(*cfg.duty_factor_range)),
        trial_duration=cfg.trial_duration,
    )
    kw.update(cfg.model_overrides)
    return GaitModel(**kw)


def run_trial(cfg: ExperimentConfig, trial: int, seed_seq: np.random.SeedSequence,
              out_dir: Path | None = None) -> TrialRecord:
    rng = np.random.default_rng(seed_seq)
    model = _draw_model(cfg, rng)
    sim_seed, *noise_seeds = [int(s) for s in
                              rng.integers(0, 2 ** 31, size=1 + len(cfg.modalities))]
    protocol = TrialProtocol()
    truth = simulate_walk(model, protocol, seed=sim_seed)

    scores = {}
    for name, nseed in zip(cfg.modalities, noise_seeds):
        config = radar_config_for(name)
        profiles = synthesizer_for(name)(
            truth, config, NoiseModel(snr_db=cfg.snr_db), seed=nseed)
        if out_dir is not None and cfg.save_recordings:
            save_rpm(out_dir / f"trial{trial:03d}_{name}.rpm", profiles)
        result = process_recording(profiles, cfg.pipeline)
        scores[name] = score_trial(trial, name, result, truth)
    if out_dir is not None and cfg.save_recordings:
        save_truth(out_dir / f"trial{trial:03d}_truth.json", truth)
    return TrialRecord(trial=trial, model=model, scores=scores)


def _run_trial_guarded(args) -> TrialRecord:
    cfg, i, child, out_path = args
    try:
        return run_trial(cfg, i, child, out_path)
    except Exception as exc:  # noqa: BLE001 - per-trial isolation
        warnings.warn(f"trial {i} failed: {exc}")
        rec = TrialRecord(trial=i, model=_draw_model(
            cfg, np.random.default_rng(child)), scores={})
        rec.error = "".join(traceback.format_exception_only(exc)).strip()
        return rec


def run_experiment(cfg: ExperimentConfig | None = None,
                   out_dir=None, jobs: int = 1) -> ExperimentReport:
    cfg = cfg or ExperimentConfig()
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    root = np.random.SeedSequence(cfg.master_seed)
    children = root.spawn(cfg.n_trials)
    work = [(cfg, i, children[i], out_path) for i in range(cfg.n_trials)]
    if jobs > 1:
        import concurrent.futures
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            trials = list(pool.map(_run_trial_guarded, work))
    else:
        trials = [_run_trial_guarded(w) for w in work]
    if all(t.error is not None for t in trials):
        raise RuntimeError("all trials failed")

    cross, gaps = _cross_modality(cfg, trials)
    pooled = _pooled_accuracy(cfg, trials)
    report = ExperimentReport(config=cfg, trials=trials, cross_modality=cross,
                              accuracy_gap=gaps, pooled_accuracy=pooled)
    if out_path is not None:
        write_report_files(report, out_path)
    return report


def _matched_pairs(trials: list[TrialRecord], mod_a: str, mod_b: str,
                   name: str) -> tuple[np.ndarray, np.ndarray]:
    """Stride-matched parameter estimates across modalities.

    Both modalities' strides already carry truth-timebase keys (the matched
    true stride start), so strides pair exactly across modalities.
    """
    xa, xb = [], []
    for t in trials:
        if mod_a not in t.scores or mod_b not in t.scores:
            continue
        sa, sb = t.scores[mod_a], t.scores[mod_b]
        ia = {round(float(s), 6): k for k, s in enumerate(sa.matched_stride_start)}
        for k, s in enumerate(sb.matched_stride_start):
            j = ia.get(round(float(s), 6))
            if j is not None:
                xa.append(sa.matched_stride_values[name][j])
                xb.append(sb.matched_stride_values[name][k])
    return np.asarray(xa), np.asarray(xb)


def _cross_modality(cfg: ExperimentConfig, trials: list[TrialRecord]):
    cross: dict[str, AgreementReport] = {}
    gaps: dict[str, float] = {}
    if len(cfg.modalities) < 2:
        return cross, gaps
    a, b = cfg.modalities[:2]
    for name in GaitParameterSet.PARAMETER_NAMES:
        xa, xb = _matched_pairs(trials, a, b, name)
        if xa.size >= 3 and np.std(xa) > 0 and np.std(xb) > 0:
            cross[name] = AgreementReport.from_pairs(xa, xb)
        acc_a = [t.scores[a].parameter_accuracy[name] for t in trials
                 if a in t.scores]
        acc_b = [t.scores[b].parameter_accuracy[name] for t in trials
                 if b in t.scores]
        if acc_a and acc_b:
            gaps[name] = abs(float(np.mean(acc_a)) - float(np.mean(acc_b)))
    return cross, gaps


def _pooled_accuracy(cfg: ExperimentConfig, trials: list[TrialRecord]):
    pooled: dict[str, dict[str, float]] = {}
    for m in cfg.modalities:
        per: dict[str, float] = {}
        for name in GaitParameterSet.PARAMETER_NAMES:
            vals = [t.scores[m].parameter_accuracy[name] for t in trials
                    if m in t.scores]
            per[name] = float(np.mean(vals)) if vals else float("nan")
        for kind in ("hs", "to"):
            tvals = [t.scores[m].event_time_accuracy[kind] for t in trials
                     if m in t.scores]
            rvals = [t.scores[m].event_range_accuracy[kind] for t in trials
                     if m in t.scores]
            per[f"{kind}_time"] = float(np.mean(tvals)) if tvals else float("nan")
            per[f"{kind}_range"] = float(np.mean(rvals)) if rvals else float("nan")
        pooled[m] = per
    return pooled


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        # plain-float repr: shortest round-trip form, no numpy scalar tags
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[list]):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_report_files(report: ExperimentReport, out_dir: Path):
    out_dir = Path(out_dir)
    par_names = GaitParameterSet.PARAMETER_NAMES

    rows = []
    for t in report.trials:
        for m, s in sorted(t.scores.items()):
            rows.append(
                [t.trial, m, t.model.walking_speed, t.model.stride_time,
                 t.model.duty_factor, s.lag, s.n_strides, s.n_true_strides,
                 s.n_segments, s.n_true_segments, s.boundary_error,
                 s.event_time_accuracy["hs"], s.event_time_accuracy["to"],
                 s.event_range_accuracy["hs"], s.event_range_accuracy["to"]]
                + [s.parameter_accuracy[n] for n in par_names]
            )
        if t.error is not None:
            rows.append([t.trial, "error", t.error] + [""] * (16 + len(par_names) - 3))
    _write_csv(
        out_dir / "trials.csv",
        ["trial", "modality", "walking_speed", "stride_time", "duty_factor",
         "lag_s", "n_strides", "n_true_strides", "n_segments",
         "n_true_segments", "boundary_error_s", "hs_time_acc", "to_time_acc",
         "hs_range_acc", "to_range_acc"] + [f"{n}_acc" for n in par_names],
        rows,
    )

    rows = []
    for t in report.trials:
        for m, s in sorted(t.scores.items()):
            pp = s.result.parameters
            for k in range(pp.n_strides):
                rows.append([t.trial, m, int(pp.segment[k]), pp.start_time[k]]
                            + [float(pp.values(n)[k]) for n in par_names])
    _write_csv(out_dir / "strides.csv",
               ["trial", "modality", "segment", "start_time"] + list(par_names),
               rows)

    rows = []
    for t in report.trials:
        for m, s in sorted(t.scores.items()):
            ev = s.result.events
            for kind, times, rngs, segs in (
                ("hs", ev.hs_times, ev.hs_ranges, ev.hs_segments),
                ("to", ev.to_times, ev.to_ranges, ev.to_segments),
            ):
                for tt, rr, sg in zip(times, rngs, segs):
                    rows.append([t.trial, m, kind, float(tt), float(rr), int(sg)])
    _write_csv(out_dir / "events.csv",
               ["trial", "modality", "kind", "time_s", "range_m", "segment"],
               rows)

    rows = []
    for name, rep in sorted(report.cross_modality.items()):
        ba = rep.bland_altman
        rows.append([name, rep.n_pairs, rep.pearson_r, rep.pearson_p,
                     rep.icc_2_1, ba.bias, ba.sd_diff, ba.loa_low, ba.loa_high,
                     rep.mw_u, rep.mw_p,
                     report.accuracy_gap.get(name, float("nan"))])
    _write_csv(out_dir / "agreement.csv",
               ["parameter", "n_pairs", "pearson_r", "pearson_p", "icc_2_1",
                "bias", "sd_diff", "loa_low", "loa_high", "mw_u", "mw_p",
                "mean_accuracy_gap"],
               rows)

    lines = [f"trials: {len(report.trials)} ({report.n_failed} failed)"]
    for m in report.config.modalities:
        per = report.pooled_accuracy[m]
        lines.append(f"[{m}] " + "  ".join(
            f"{k}={per[k]:.2f}%" for k in sorted(per)))
    for name, rep in sorted(report.cross_modality.items()):
        lines.append(f"[{name}] " + "  ".join(rep.summary_lines()))
    for name, gap in sorted(report.accuracy_gap.items()):
        lines.append(f"[{name}] mean accuracy gap = {gap!r}%")
    (out_dir / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def replay(recording_path, truth_path=None,
           pipeline: PipelineConfig | None = None, out_dir=None,
           rdt_sink=None) -> TrialScore | PipelineResult:
    """Reprocess a stored recording offline.

    With a truth sidecar the result is scored exactly like one experiment
    trial (and per-recording CSVs are written when ``out_dir`` is given);
    without one, the raw :class:`PipelineResult` is returned.
    """
    profiles = load_rpm(recording_path)
    modality = profiles.config.modality.name.lower()
    result = process_recording(profiles, pipeline or PipelineConfig(),
                               rdt_sink=rdt_sink)
    if truth_path is None:
        return result
    rec = load_truth(truth_path)
    score = score_against(0, modality, result, rec.merged_feet, rec.events,
                          rec.parameters, rec.walking_mask,
                          rec.mask_sample_rate, ref_torso=rec.torso)
    if out_dir is not None:
        cfg = ExperimentConfig(n_trials=1, modalities=(modality,),
                               pipeline=pipeline or PipelineConfig())
        model = GaitModel(**{k: v for k, v in rec.model.items()
                             if k in GaitModel.__dataclass_fields__})
        rep = ExperimentReport(
            config=cfg,
            trials=[TrialRecord(trial=0, model=model,
                                scores={modality: score})],
            cross_modality={}, accuracy_gap={},
            pooled_accuracy=_pooled_accuracy(
                cfg, [TrialRecord(trial=0, model=model,
                                  scores={modality: score})]),
        )
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report_files(rep, out)
    return score
