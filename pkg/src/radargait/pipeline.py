"""End-to-end processing of a range-profile recording into gait parameters.

One shared path for both modalities: clutter removal -> short-time Doppler
cube -> contrast enhancement -> torso/feet trajectories -> walking-segment
detection -> event detection -> per-stride parameters.  The Doppler cube is
processed in frame batches so long recordings never materialize the full
[N_frames, N_range, N_doppler] array.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter1d

from .core import RangeProfileMatrix, Trajectory
from .doppler import (EnvelopeConfig, RDTCube, StftConfig, build_rdt,
                      feet_envelopes, fill_low_confidence, naka_rushton,
                      torso_peaks)
from .gait import (GaitEvents, GaitParameterSet, WalkSegConfig, WalkingMask,
                   _close_gaps, _drop_short_runs, detect_events,
                   estimate_parameters, walking_confidence, walking_mask)
from .preprocess import ClutterFilterConfig, remove_clutter

_FRAME_BATCH = 512


@dataclass(frozen=True)
class PipelineConfig:
    clutter: ClutterFilterConfig = field(default_factory=ClutterFilterConfig)
    stft: StftConfig = field(default_factory=StftConfig)
    envelope: EnvelopeConfig = field(default_factory=EnvelopeConfig)
    walking: WalkSegConfig = field(default_factory=WalkSegConfig)
    event_prominence_fraction: float = 0.1
    event_min_spacing: float = 0.4     # [s]
    contrast_exponent: float = 2.0


@dataclass
class PipelineResult:
    """Everything the pipeline extracts from one recording."""

    torso: Trajectory
    feet: Trajectory
    confidence_time: np.ndarray
    confidence: np.ndarray
    mask: WalkingMask
    events: GaitEvents
    parameters: GaitParameterSet

    @property
    def segments(self) -> list[tuple[float, float]]:
        return self.mask.segments


def extract_trajectories(profiles: RangeProfileMatrix,
                         cfg: PipelineConfig | None = None,
                         rdt_sink=None) -> tuple[Trajectory, Trajectory]:
    """Clutter removal, batched Doppler processing, trajectory extraction.

    ``rdt_sink``, if given, is called with each enhanced :class:`RDTCube`
    batch (for debug dumps); batches cover the recording in order.
    """
    cfg = cfg or PipelineConfig()
    clean = remove_clutter(profiles, cfg.clutter)

    config = profiles.config
    fs = config.slow_time_rate
    win = cfg.stft.window_samples(fs)
    hop = cfg.stft.hop_samples(fs)
    if clean.n_slow < win:
        raise ValueError("recording shorter than one Doppler window")
    n_frames = (clean.n_slow - win) // hop + 1

    t_rng = np.empty(n_frames)
    t_vel = np.empty(n_frames)
    t_low = np.empty(n_frames, dtype=bool)
    f_upper = np.empty(n_frames)
    f_rng = np.empty(n_frames)
    f_low = np.empty(n_frames, dtype=bool)
    times = np.empty(n_frames)

    mid_range = 0.5 * config.max_range
    carry_rng = mid_range      # torso fill state across batches
    carry_vel = 0.0
    have_carry = False
    direction = 1.0

    for f0 in range(0, n_frames, _FRAME_BATCH):
        f1 = min(n_frames, f0 + _FRAME_BATCH)
        s0 = f0 * hop
        s1 = (f1 - 1) * hop + win
        sub = RangeProfileMatrix(
            samples=clean.samples[s0:s1], config=config,
            start_time=clean.start_time + s0 / fs)
        cube = build_rdt(sub, cfg.stft)
        if rdt_sink is not None:
            # contrast enhancement is for display: it is monotone per frame,
            # so peak locations in the dump match the extraction below
            rdt_sink(naka_rushton(cube, exponent=cfg.contrast_exponent))
        times[f0:f1] = cube.frame_times

        rng, vel, low = torso_peaks(cube)
        t_low[f0:f1] = low
        # sequential forward fill so the feet gate follows the filled track
        for k in range(low.size):
            if low[k]:
                rng[k] = carry_rng
                vel[k] = carry_vel
            else:
                carry_rng, carry_vel = rng[k], vel[k]
                have_carry = True
        t_rng[f0:f1] = rng
        t_vel[f0:f1] = vel

        upper, _, frng, flow, direction = feet_envelopes(
            cube, cfg.envelope, rng, vel, prev_direction=direction)
        f_upper[f0:f1] = upper
        f_rng[f0:f1] = frng
        f_low[f0:f1] = flow

    if have_carry and t_low[0]:
        # recording started degenerate: backfill the head from the first
        # confident frame instead of the mid-range placeholder
        first = int(np.argmax(~t_low))
        t_rng[:first] = t_rng[first]
        t_vel[:first] = t_vel[first]

    torso = Trajectory(time=times, range=t_rng, velocity=t_vel,
                       low_confidence=t_low)
    feet = Trajectory(
        time=times,
        range=fill_low_confidence(f_rng, f_low, float(np.median(t_rng))),
        velocity=fill_low_confidence(f_upper, f_low, 0.0),
        low_confidence=f_low,
    )
    return torso, feet


def _trim_noise_edges(mask: WalkingMask, feet: Trajectory,
                      walking: WalkSegConfig) -> WalkingMask:
    """Remove noise-like stretches the detector grew a walking run into.

    The envelope extractor flags frames without a discernible Doppler line
    as low-confidence; a walking bout cannot extend over them.  Windows
    dominated by such frames are cleared, brief dropouts inside a bout are
    closed again, and fragments too short to be a bout are discarded.
    """
    if mask.times.size == 0 or not mask.values.any():
        return mask
    frac = np.interp(mask.times, feet.time,
                     uniform_filter1d(feet.low_confidence.astype(float),
                                      size=max(1, int(round(0.2 * feet.sample_rate)))))
    v = mask.values & (frac <= 0.5)
    if mask.times.size > 1:
        dt = float(np.mean(np.diff(mask.times)))
        v = _close_gaps(v, int(np.ceil(walking.max_gap / dt)))
        v = _drop_short_runs(v, int(np.ceil(walking.min_segment_duration / dt)))
    return WalkingMask(times=mask.times, values=v)


def _refine_edges_with_torso(mask: WalkingMask, torso: Trajectory,
                             walking: WalkSegConfig,
                             search: float = 1.2,
                             split_gap: float = 1.0,
                             band: float = 1.5,
                             speed_floor: float = 0.1) -> WalkingMask:
    """Snap walking-bout boundaries to the torso translation.

    The feet-periodicity detector localizes bouts but blurs their edges:
    the first and last strides of a traversal are slower and less regular,
    so confidence fades up to a stride early or late.  The torso range rate
    is a much sharper cue -- near the bout's median speed throughout a
    traversal and near zero while standing or turning -- so each detected
    boundary is moved to the torso speed crossing of half the bout median.
    Interior sub-speed stretches longer than ``split_gap`` split a bout
    (a torso at rest for that long is not mid-traversal).  Edge extension
    additionally requires the speed to stay below ``band`` times the bout
    median, so tracker glitches outside the bout cannot drag the boundary.
    """
    if not mask.values.any():
        return mask
    t = torso.time
    if t.size < 2:
        return mask
    fs = 1.0 / float(t[1] - t[0])
    v = uniform_filter1d(np.abs(torso.velocity),
                         size=max(1, int(round(0.15 * fs))))
    refined: list[tuple[float, float]] = []
    for a, b in mask.segments:
        sel = (t >= a) & (t <= b)
        if not sel.any():
            continue
        level = float(np.median(v[sel]))
        if level <= speed_floor:
            # no resolvable translation (e.g. in-place stepping): keep the
            # feet-detector boundaries
            refined.append((a, b))
            continue
        thr = 0.5 * level
        idx = np.flatnonzero(sel)
        inside = v[idx] >= thr
        d = np.diff(np.concatenate(([0], inside.view(np.int8), [0])))
        sub = [[t[idx[s]], t[idx[e - 1]]]
               for s, e in zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1))]
        merged: list[list[float]] = []
        for r in sub:
            if merged and r[0] - merged[-1][1] < split_gap:
                merged[-1][1] = r[1]
            else:
                merged.append(r)

        def extendable(j: int) -> bool:
            return thr <= v[j] <= band * level

        for ra, rb in merged:
            if rb - ra < walking.min_segment_duration:
                continue
            j = int(np.searchsorted(t, ra))
            while j > 0 and t[j - 1] > ra - search and extendable(j - 1):
                j -= 1
            ra = float(t[j])
            j = min(int(np.searchsorted(t, rb)), t.size - 1)
            while j < t.size - 1 and t[j + 1] < rb + search and extendable(j + 1):
                j += 1
            refined.append((ra, float(t[j])))

    refined.sort()
    values = np.zeros(t.size, dtype=bool)
    for ra, rb in refined:
        values[(t >= ra) & (t <= rb)] = True
    return WalkingMask(times=t, values=values)


def process_recording(profiles: RangeProfileMatrix,
                      cfg: PipelineConfig | None = None,
                      rdt_sink=None) -> PipelineResult:
    """Full pipeline: trajectories, walking segments, events, parameters."""
    cfg = cfg or PipelineConfig()
    torso, feet = extract_trajectories(profiles, cfg, rdt_sink=rdt_sink)

    conf = walking_confidence(feet, cfg.walking)
    mask = walking_mask(conf, cfg.walking)
    mask = _trim_noise_edges(mask, feet, cfg.walking)
    mask = _refine_edges_with_torso(mask, torso, cfg.walking)
    events = detect_events(feet, mask.sample_at(feet.time),
                           min_prominence_fraction=cfg.event_prominence_fraction,
                           min_spacing=cfg.event_min_spacing)
    parameters = estimate_parameters(events)
    return PipelineResult(
        torso=torso, feet=feet,
        confidence_time=conf.times, confidence=conf.values,
        mask=mask, events=events, parameters=parameters,
    )
