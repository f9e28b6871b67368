"""Synthetic walker and matched radar-return synthesis.

A kinematic ground truth (torso + two feet point scatterers walking up and
down a straight walkway, with low-speed turns at the ends) is generated once,
then rendered into UWB and FMCW range-profile matrices from the same tracks.
Because both renderings share one kinematic truth, any downstream difference
between modalities is attributable to the signal models, never the subject.

Swing-phase foot velocity is a raised-cosine pulse whose peak sits early in
swing and whose integral equals one stride length exactly; the early peak
keeps the speed maximum close to the toe-off instant it marks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .core import Modality, RadarConfig, RangeProfileMatrix, Trajectory
from .gait import GaitEvents, GaitParameterSet, estimate_parameters

TORSO_HEIGHT = 1.0   # scatterer heights above floor [m]
FOOT_HEIGHT = 0.1
# Near end of the path [m].  Keeping the subject at least ~1 m down-track
# keeps the radial projection factor of foot motion high enough to observe.
WALKWAY_START = 1.0

# relative radar cross sections of the three scatterers
SCATTERER_WEIGHTS = {"torso": 1.0, "left_foot": 0.6, "right_foot": 0.6}
SCATTERER_NAMES = ("torso", "left_foot", "right_foot")


@dataclass(frozen=True)
class GaitModel:
    """Kinematic description of one walking subject and trial."""

    walking_speed: float = 0.9        # [m/s]
    stride_time: float = 1.1          # [s]
    duty_factor: float = 0.6          # stance fraction of the stride
    swing_peak_fraction: float = 0.02  # where in swing the foot speed peaks
    swing_fall_fraction: float = 0.1   # terminal-deceleration share of swing
    swing_end_level: float = 0.8       # speed level entering the final fall
    torso_bob_amplitude: float = 0.02  # sinusoidal speed modulation [m/s]
    walkway_length: float = 7.5       # [m]
    turn_duration: float = 2.5        # [s]
    trial_duration: float = 30.0      # [s]
    timing_jitter: float = 0.02       # per-stride stride-time jitter fraction

    def __post_init__(self):
        if self.walking_speed < 0:
            raise ValueError("walking_speed must be non-negative")
        if self.walking_speed > 0 and not 0.5 < self.duty_factor < 0.75:
            raise ValueError("duty_factor must lie in (0.5, 0.75)")
        if not 0.02 <= self.swing_peak_fraction <= 0.95:
            raise ValueError("swing_peak_fraction must lie in [0.02, 0.95]")
        if not 0.02 <= self.swing_fall_fraction <= 0.5:
            raise ValueError("swing_fall_fraction must lie in [0.02, 0.5]")
        if not 0.0 < self.swing_end_level <= 1.0:
            raise ValueError("swing_end_level must lie in (0, 1]")
        if self.swing_peak_fraction + self.swing_fall_fraction > 1.0:
            raise ValueError("swing rise and fall cannot overlap")
        if self.stride_time <= 0 or self.trial_duration <= 0:
            raise ValueError("stride_time and trial_duration must be positive")
        if not 0 <= self.timing_jitter <= 0.02:
            raise ValueError("timing_jitter must lie in [0, 0.02]")

    @property
    def stride_length(self) -> float:
        return self.walking_speed * self.stride_time

    @property
    def swing_time(self) -> float:
        return (1.0 - self.duty_factor) * self.stride_time

    @property
    def peak_swing_speed(self) -> float:
        """Peak foot speed implied by the displacement constraint."""
        if self.walking_speed == 0:
            return 0.0
        return _swing_shape(self.swing_time, self.stride_length,
                            self.swing_peak_fraction, self.swing_fall_fraction,
                            self.swing_end_level)[4]


@dataclass(frozen=True)
class TrialProtocol:
    """Trial timing and sampling of the ground truth."""

    sample_rate: float = 2000.0   # [Hz] kinematic truth sampling
    initial_stand: float = 2.0    # [s] standing margin at trial start
    max_velocity: float | None = None  # reject models that would alias


@dataclass(frozen=True)
class ClutterScatterer:
    range: float       # [m]
    amplitude: float   # relative to the torso return at mid-range


@dataclass(frozen=True)
class NoiseModel:
    """Complex white noise level plus optional injected static clutter."""

    snr_db: float = 20.0
    static_clutter: tuple[ClutterScatterer, ...] = ()

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")

    def validate_against(self, config: RadarConfig):
        for c in self.static_clutter:
            if not 0.0 <= c.range <= config.max_range:
                raise ValueError(f"clutter range {c.range} outside [0, max_range]")


@dataclass
class KinematicTruth:
    """Ground-truth tracks, events and parameters of one simulated trial."""

    time: np.ndarray
    positions: dict[str, np.ndarray]       # name -> (N, 3) [x_along, y_lat, z]
    radial_ranges: dict[str, np.ndarray]   # name -> (N,) [m] to the radar
    radial_velocities: dict[str, np.ndarray]
    torso: Trajectory
    merged_feet: Trajectory
    true_events: GaitEvents
    true_parameters: GaitParameterSet
    true_walking_mask: np.ndarray          # bool, aligned with `time`
    radar_position: tuple[float, float, float]
    model: GaitModel

    @property
    def sample_rate(self) -> float:
        return 1.0 / float(self.time[1] - self.time[0])

    @property
    def duration(self) -> float:
        return float(self.time.size / self.sample_rate)


def _swing_shape(swing_time: float, stride_length: float, peak_fraction: float,
                 fall_fraction: float, end_level: float):
    """Segment boundaries and peak speed of the swing pulse.

    Shape: half-cosine rise over ``peak_fraction`` of swing, linear decline
    to ``end_level`` of the peak, half-cosine fall over ``fall_fraction``.
    The peak speed is fixed by requiring the pulse to integrate to one
    stride length.
    """
    a = peak_fraction * swing_time
    c = fall_fraction * swing_time
    mid = swing_time - a - c
    if mid < 0:
        raise ValueError("peak_fraction + fall_fraction must be <= 1")
    q = end_level
    area_unit = a / 2.0 + mid * (1.0 + q) / 2.0 + q * c / 2.0
    vp = stride_length / area_unit
    return a, c, mid, q, vp


def swing_velocity_profile(tau: np.ndarray, swing_time: float,
                           stride_length: float,
                           peak_fraction: float = 0.05,
                           fall_fraction: float = 0.1,
                           end_level: float = 0.8) -> np.ndarray:
    """Forward foot speed during swing; integrates to one stride length.

    Half-cosine rise to the peak at ``peak_fraction * swing_time``, gentle
    linear decline to ``end_level`` of the peak, then a half-cosine fall to
    zero over the last ``fall_fraction`` of swing.  The sharp rise keeps the
    speed maximum adjacent to toe off; the sharp fall keeps the speed
    collapse adjacent to heel strike.
    """
    tau = np.asarray(tau, dtype=float)
    a, c, mid, q, vp = _swing_shape(swing_time, stride_length,
                                    peak_fraction, fall_fraction, end_level)
    out = np.zeros_like(tau)
    rise = (tau >= 0) & (tau < a)
    lin = (tau >= a) & (tau < a + mid)
    fall = (tau >= a + mid) & (tau <= swing_time)
    out[rise] = 0.5 * vp * (1.0 - np.cos(np.pi * tau[rise] / a))
    if mid > 0:
        out[lin] = vp * (1.0 - (1.0 - q) * (tau[lin] - a) / mid)
    out[fall] = 0.5 * q * vp * (1.0 + np.cos(np.pi * (tau[fall] - a - mid) / c))
    return out


def _swing_displacement(tau: np.ndarray, swing_time: float,
                        stride_length: float, peak_fraction: float,
                        fall_fraction: float = 0.1,
                        end_level: float = 0.8) -> np.ndarray:
    """Closed-form integral of :func:`swing_velocity_profile` from 0 to tau."""
    tau = np.asarray(tau, dtype=float)
    a, c, mid, q, vp = _swing_shape(swing_time, stride_length,
                                    peak_fraction, fall_fraction, end_level)
    d_a = 0.5 * vp * a                      # displacement over the rise
    d_mid = vp * mid * (1.0 + q) / 2.0      # over the linear decline
    out = np.empty_like(tau)

    tr = np.clip(tau, 0.0, a)
    d_rise = 0.5 * vp * (tr - (a / np.pi) * np.sin(np.pi * tr / a))

    tl = np.clip(tau - a, 0.0, mid)
    slope = (1.0 - q) / mid if mid > 0 else 0.0
    d_lin = vp * (tl - 0.5 * slope * tl ** 2)

    tf = np.clip(tau - a - mid, 0.0, c)
    d_fall = 0.5 * q * vp * (tf + (c / np.pi) * np.sin(np.pi * tf / c))

    rise = tau < a
    lin = (tau >= a) & (tau < a + mid)
    out[rise] = d_rise[rise]
    out[lin] = d_a + d_lin[lin]
    out[~rise & ~lin] = d_a + d_mid + d_fall[~rise & ~lin]
    return np.clip(out, 0.0, stride_length)


class _Phase:
    """One contiguous span of the trial timeline."""

    def __init__(self, kind: str, duration: float):
        self.kind = kind
        self.duration = duration
        self.strides: list[float] = []      # jittered stride times (walk)
        self.direction = 1.0
        self.turn_coeffs = None             # (torso c1 c2, per-foot d1 d2)


def _build_timeline(model: GaitModel, protocol: TrialProtocol,
                    rng: np.random.Generator) -> list[_Phase]:
    if model.walking_speed == 0:
        return [_Phase("stand", model.trial_duration)]
    phases = [_Phase("stand", protocol.initial_stand)]
    n_strides = max(1, int(np.floor(model.walkway_length / model.stride_length)))
    t = protocol.initial_stand
    direction = 1.0
    while True:
        strides = [
            model.stride_time * (1.0 + rng.uniform(-model.timing_jitter,
                                                   model.timing_jitter))
            for _ in range(n_strides)
        ]
        walk_dur = float(np.sum(strides))
        if t + walk_dur > model.trial_duration:
            break
        ph = _Phase("walk", walk_dur)
        ph.strides = strides
        ph.direction = direction
        phases.append(ph)
        t += walk_dur
        direction *= -1.0
        if t + model.turn_duration + walk_dur > model.trial_duration:
            break
        ph = _Phase("turn", model.turn_duration)
        ph.turn_coeffs = {
            "torso": rng.uniform(-0.12, 0.12, size=2),
            "left_foot": rng.uniform(-0.10, 0.10, size=2),
            "right_foot": rng.uniform(-0.10, 0.10, size=2),
        }
        phases.append(ph)
        t += model.turn_duration
    if t < model.trial_duration:
        phases.append(_Phase("stand", model.trial_duration - t))
    return phases


def simulate_walk(model: GaitModel, protocol: TrialProtocol | None = None,
                  seed: int = 0,
                  radar_position: tuple[float, float, float] = (1.0, 0.5, 0.0),
                  ) -> KinematicTruth:
    """Simulate one walking trial and derive its ground truth.

    Feet alternate stance (stationary) and swing (raised-cosine speed pulse
    integrating to one stride length); the torso advances one stride length
    per stride with a sinusoidal speed modulation at step frequency.  True
    toe off is the instant a swing pulse begins, true heel strike the instant
    it ends.  Turns at the walkway ends are aperiodic low-speed shuffling.
    """
    protocol = protocol or TrialProtocol()
    if protocol.max_velocity is not None and model.walking_speed > 0:
        vmax_pulse = model.peak_swing_speed / (1.0 - model.timing_jitter)
        if vmax_pulse > protocol.max_velocity:
            raise ValueError(
                f"peak swing speed {vmax_pulse:.2f} m/s would alias beyond "
                f"the {protocol.max_velocity:.2f} m/s unambiguous span; "
                "reduce walking_speed or increase 1 - duty_factor"
            )
    rng = np.random.default_rng(seed)
    phases = _build_timeline(model, protocol, rng)

    fs = protocol.sample_rate
    total = sum(p.duration for p in phases)
    n = int(round(total * fs))
    time = np.arange(n) / fs

    # along-track position/velocity per scatterer, plus the true event stream
    x = {name: np.zeros(n) for name in SCATTERER_NAMES}
    vx = {name: np.zeros(n) for name in SCATTERER_NAMES}
    walking = np.zeros(n, dtype=bool)
    hs_t, hs_foot, to_t, to_foot = [], [], [], []
    seg_of_event: list[int] = []
    to_seg: list[int] = []

    x0 = WALKWAY_START if model.walking_speed > 0 else WALKWAY_START + model.walkway_length / 2
    pos = {name: x0 for name in SCATTERER_NAMES}
    t0 = 0.0
    walk_id = -1
    for ph in phases:
        i0 = int(round(t0 * fs))
        i1 = min(n, int(round((t0 + ph.duration) * fs)))
        tt = time[i0:i1] - t0
        if ph.kind == "stand":
            for name in SCATTERER_NAMES:
                x[name][i0:i1] = pos[name]
        elif ph.kind == "turn":
            for name in SCATTERER_NAMES:
                c1, c2 = ph.turn_coeffs[name]
                k = 3 if name != "torso" else 2
                w1 = 2 * np.pi / ph.duration
                wk = 2 * np.pi * k / ph.duration
                vx[name][i0:i1] = c1 * np.sin(w1 * tt) + c2 * np.sin(wk * tt)
                x[name][i0:i1] = pos[name] + (
                    c1 / w1 * (1 - np.cos(w1 * tt)) + c2 / wk * (1 - np.cos(wk * tt))
                )
        else:  # walk
            walk_id += 1
            walking[i0:i1] = True
            s = ph.direction
            L = model.stride_length
            ts = t0
            torso_base = pos["torso"]
            # feet hold their stance position until their first swing
            for name in ("left_foot", "right_foot"):
                x[name][i0:] = pos[name]
            for T_k in ph.strides:
                T_sw = (1.0 - model.duty_factor) * T_k
                j0 = int(round(ts * fs))
                j1 = min(n, int(round((ts + T_k) * fs)))
                tk = time[j0:j1] - ts
                # torso: constant advance plus step-frequency bob
                v_fwd = L / T_k
                w_step = 4 * np.pi / T_k
                vx["torso"][j0:j1] = s * (v_fwd + model.torso_bob_amplitude
                                          * np.sin(w_step * tk))
                x["torso"][j0:j1] = torso_base + s * (
                    v_fwd * tk + model.torso_bob_amplitude / w_step
                    * (1 - np.cos(w_step * tk))
                )
                # feet: left swings at stride start, right half a stride later
                for name, offset in (("left_foot", 0.0), ("right_foot", T_k / 2)):
                    t_swing = ts + offset
                    a0 = int(round(t_swing * fs))
                    a1 = min(n, int(round((t_swing + T_sw) * fs)))
                    tau = time[a0:a1] - t_swing
                    vx[name][a0:a1] = s * swing_velocity_profile(
                        tau, T_sw, L, model.swing_peak_fraction,
                        model.swing_fall_fraction, model.swing_end_level)
                    x[name][a0:a1] = pos[name] + s * _swing_displacement(
                        tau, T_sw, L, model.swing_peak_fraction,
                        model.swing_fall_fraction, model.swing_end_level)
                    to_t.append(t_swing)
                    to_foot.append(name)
                    to_seg.append(walk_id)
                    hs_t.append(t_swing + T_sw)
                    hs_foot.append(name)
                    seg_of_event.append(walk_id)
                    pos[name] += s * L
                    # hold the landed foot until its next swing
                    x[name][a1:] = pos[name]
                torso_base += s * L
                ts += T_k
            pos["torso"] = torso_base
            x["torso"][i1:] = torso_base
            for name in ("left_foot", "right_foot"):
                x[name][i1:] = pos[name]
        t0 += ph.duration

    # radar geometry: radar_position = (height, lateral offset, along-track)
    h, lat, along = radar_position
    ranges, rvel = {}, {}
    positions = {}
    for name in SCATTERER_NAMES:
        z = TORSO_HEIGHT if name == "torso" else FOOT_HEIGHT
        dx = x[name] - along
        r = np.sqrt(dx ** 2 + lat ** 2 + (z - h) ** 2)
        ranges[name] = r
        rvel[name] = dx * vx[name] / r
        positions[name] = np.column_stack([x[name], np.zeros(n), np.full(n, z)])

    torso = Trajectory(time=time, range=ranges["torso"], velocity=rvel["torso"])
    faster_right = np.abs(rvel["right_foot"]) > np.abs(rvel["left_foot"])
    merged = Trajectory(
        time=time,
        range=np.where(faster_right, ranges["right_foot"], ranges["left_foot"]),
        velocity=np.where(faster_right, rvel["right_foot"], rvel["left_foot"]),
    )

    events = _true_events(np.asarray(hs_t), hs_foot, np.asarray(to_t), to_foot,
                          seg_of_event, to_seg, time, ranges)
    params = estimate_parameters(events) if events.hs_times.size else GaitParameterSet.empty()

    return KinematicTruth(
        time=time, positions=positions, radial_ranges=ranges,
        radial_velocities=rvel, torso=torso, merged_feet=merged,
        true_events=events, true_parameters=params, true_walking_mask=walking,
        radar_position=tuple(radar_position), model=model,
    )


def _true_events(hs_t, hs_foot, to_t, to_foot, hs_seg, to_seg, time, ranges) -> GaitEvents:
    """Assemble interleaved ground-truth events from the swing schedule.

    Toe offs preceding the segment's first heel strike carry no stride
    information and are dropped so that hs[k] < to[k] < hs[k+1] holds.
    """
    if hs_t.size == 0:
        return GaitEvents.empty()
    hs_seg = np.asarray(hs_seg)
    to_seg = np.asarray(to_seg)
    out_hs_t, out_hs_r, out_hs_s = [], [], []
    out_to_t, out_to_r, out_to_s = [], [], []
    for seg in np.unique(hs_seg):
        h_sel = hs_seg == seg
        t_sel = to_seg == seg
        h_times = hs_t[h_sel]
        h_feet = [f for f, m in zip(hs_foot, h_sel) if m]
        t_times = to_t[t_sel]
        t_feet = [f for f, m in zip(to_foot, t_sel) if m]
        order_h = np.argsort(h_times)
        order_t = np.argsort(t_times)
        h_times = h_times[order_h]
        h_feet = [h_feet[i] for i in order_h]
        t_times = t_times[order_t]
        t_feet = [t_feet[i] for i in order_t]
        for ht, hf in zip(h_times, h_feet):
            out_hs_t.append(ht)
            out_hs_r.append(float(np.interp(ht, time, ranges[hf])))
            out_hs_s.append(int(seg))
        kept = [(tt, tf) for tt, tf in zip(t_times, t_feet)
                if h_times[0] < tt <= h_times[-1]]
        for tt, tf in kept:
            out_to_t.append(tt)
            out_to_r.append(float(np.interp(tt, time, ranges[tf])))
            out_to_s.append(int(seg))
    return GaitEvents(out_hs_t, out_hs_r, out_hs_s, out_to_t, out_to_r, out_to_s)


# ---------------------------------------------------------------------------
# Radar-return synthesis
# ---------------------------------------------------------------------------

def _reference_amplitude(config: RadarConfig) -> float:
    """Torso-return amplitude at mid-range; the SNR reference."""
    r_mid = config.max_range / 2.0
    return SCATTERER_WEIGHTS["torso"] / r_mid ** 2


def _interp_ranges(truth: KinematicTruth, config: RadarConfig):
    n_slow = int(np.floor(truth.duration * config.slow_time_rate))
    t = np.arange(n_slow) / config.slow_time_rate
    out = {}
    for name in SCATTERER_NAMES:
        r = np.interp(t, truth.time, truth.radial_ranges[name])
        if np.any(r > config.max_range):
            raise ValueError(
                f"scatterer '{name}' exceeds max_range "
                f"({r.max():.2f} > {config.max_range} m)"
            )
        out[name] = r
    return t, out


_RENDER_CHUNK = 50_000  # slow-time rows per scatter-add chunk


def _accumulate(view: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                values: np.ndarray):
    """Scatter-add complex contributions into a row-chunk view."""
    m = view.shape[1]
    flat = rows * m + cols
    size = view.size
    re = np.bincount(flat, weights=values.real, minlength=size)
    im = np.bincount(flat, weights=values.imag, minlength=size)
    view += (re + 1j * im).reshape(view.shape)


def _render_gaussian(out, R, amp, config, phase_sign=-1):
    """Point-scatterer range profile with a Gaussian envelope (UWB model)."""
    sigma = config.uwb_pulse_width
    dres = config.range_resolution
    nb = max(1, int(np.ceil(4.0 * sigma / dres)))
    offsets = np.arange(-nb, nb + 1)
    lam = config.wavelength
    n = R.size
    for s0 in range(0, n, _RENDER_CHUNK):
        s1 = min(n, s0 + _RENDER_CHUNK)
        Rc = R[s0:s1]
        Ac = amp[s0:s1] if np.ndim(amp) else np.full(s1 - s0, amp)
        center = np.round(Rc / dres - 0.5).astype(np.int64)
        cols = center[:, None] + offsets[None, :]
        valid = (cols >= 0) & (cols < config.n_range_bins)
        r_bins = (cols + 0.5) * dres
        envelope = np.exp(-((r_bins - Rc[:, None]) ** 2) / (2 * sigma ** 2))
        ph = np.exp(phase_sign * 1j * 4 * np.pi * Rc / lam)
        vals = (Ac * ph)[:, None] * envelope
        rows = np.broadcast_to(np.arange(s1 - s0)[:, None], cols.shape)
        _accumulate(out[s0:s1], rows[valid], cols[valid], vals[valid])


def fmcw_window_kernel(x: np.ndarray) -> np.ndarray:
    """Closed-form main-lobe kernel of a Hann fast-time window.

    ``x`` is the range offset in bins (already scaled by the window scale
    factor); the peak value is 1 at zero offset.
    """
    x = np.asarray(x, dtype=float)
    return np.sinc(x) + 0.5 * np.sinc(x - 1) + 0.5 * np.sinc(x + 1)


def _render_fmcw(out, R, amp, config, support_bins=8):
    dres = config.range_resolution
    alpha = config.fmcw_window_scale
    offsets = np.arange(-support_bins, support_bins + 1)
    lam = config.wavelength
    n = R.size
    for s0 in range(0, n, _RENDER_CHUNK):
        s1 = min(n, s0 + _RENDER_CHUNK)
        Rc = R[s0:s1]
        Ac = amp[s0:s1] if np.ndim(amp) else np.full(s1 - s0, amp)
        center = np.round(Rc / dres - 0.5).astype(np.int64)
        cols = center[:, None] + offsets[None, :]
        valid = (cols >= 0) & (cols < config.n_range_bins)
        r_bins = (cols + 0.5) * dres
        kernel = fmcw_window_kernel(alpha * (r_bins - Rc[:, None]) / dres)
        ph = np.exp(+1j * 4 * np.pi * Rc / lam)
        vals = (Ac * ph)[:, None] * kernel
        rows = np.broadcast_to(np.arange(s1 - s0)[:, None], cols.shape)
        _accumulate(out[s0:s1], rows[valid], cols[valid], vals[valid])


def _synthesize(truth: KinematicTruth, config: RadarConfig, noise: NoiseModel,
                seed: int, render) -> RangeProfileMatrix:
    noise.validate_against(config)
    t, scatterer_ranges = _interp_ranges(truth, config)
    n_slow = t.size
    out = np.zeros((n_slow, config.n_range_bins), dtype=np.complex64)

    for name in SCATTERER_NAMES:
        R = scatterer_ranges[name]
        amp = SCATTERER_WEIGHTS[name] / R ** 2
        render(out, R, amp, config)

    a_ref = _reference_amplitude(config)
    for c in noise.static_clutter:
        R = np.full(n_slow, c.range)
        render(out, R, c.amplitude * a_ref, config)

    rng = np.random.default_rng(seed)
    sigma_n = a_ref * 10.0 ** (-noise.snr_db / 20.0) / np.sqrt(2.0)
    m = config.n_range_bins
    for s0 in range(0, n_slow, _RENDER_CHUNK):
        s1 = min(n_slow, s0 + _RENDER_CHUNK)
        iq = rng.standard_normal(((s1 - s0), m, 2), dtype=np.float32)
        out[s0:s1] += sigma_n * (iq[..., 0] + 1j * iq[..., 1])

    profiles = RangeProfileMatrix(samples=out, config=config)
    profiles.validate_finite()
    return profiles


def synthesize_uwb(truth: KinematicTruth, config: RadarConfig,
                   noise: NoiseModel | None = None, seed: int = 0) -> RangeProfileMatrix:
    """Render the truth into UWB range profiles.

    Each scatterer contributes a Gaussian range profile of width sigma_r
    around its instantaneous range with amplitude 1/R^2 and phase
    exp(-j 4 pi R / lambda).
    """
    if config.modality is not Modality.UWB:
        raise ValueError("config.modality must be UWB")
    noise = noise or NoiseModel()
    return _synthesize(truth, config, noise, seed, _render_gaussian)


def synthesize_fmcw(truth: KinematicTruth, config: RadarConfig,
                    noise: NoiseModel | None = None, seed: int = 0) -> RangeProfileMatrix:
    """Render the truth into FMCW range profiles.

    Each scatterer contributes the fast-time window transform kernel around
    its instantaneous range with amplitude 1/R^2 and phase
    exp(+j 4 pi R / lambda) (sign opposite to the UWB model).
    """
    if config.modality is not Modality.FMCW:
        raise ValueError("config.modality must be FMCW")
    noise = noise or NoiseModel()
    return _synthesize(truth, config, noise, seed, _render_fmcw)


# ---------------------------------------------------------------------------
# Ground-truth sidecar (JSON)
# ---------------------------------------------------------------------------

TRUTH_TRAJECTORY_RATE = 100.0  # [Hz] rate of the stored reference trajectories


def _mask_rle(mask: np.ndarray) -> list[list[int]]:
    edges = np.flatnonzero(np.diff(np.concatenate(([0], mask.view(np.int8), [0]))))
    return [[int(a), int(b - a)] for a, b in edges.reshape(-1, 2)]


def save_truth(path, truth: KinematicTruth):
    """Persist the ground truth needed to score a recording."""
    step = max(1, int(round(truth.sample_rate / TRUTH_TRAJECTORY_RATE)))
    sl = slice(None, None, step)
    ev = truth.true_events
    pp = truth.true_parameters
    doc = {
        "format": "radargait-truth-v1",
        "sample_rate": truth.sample_rate,
        "duration": truth.duration,
        "radar_position": list(truth.radar_position),
        "model": asdict(truth.model),
        "events": {
            "hs_times": ev.hs_times.tolist(),
            "hs_ranges": ev.hs_ranges.tolist(),
            "hs_segments": ev.hs_segments.tolist(),
            "to_times": ev.to_times.tolist(),
            "to_ranges": ev.to_ranges.tolist(),
            "to_segments": ev.to_segments.tolist(),
        },
        "parameters": {
            name: pp.values(name).tolist() for name in GaitParameterSet.PARAMETER_NAMES
        } | {
            "segment": pp.segment.tolist(),
            "start_time": pp.start_time.tolist(),
        },
        "walking_mask": {
            "sample_rate": truth.sample_rate,
            "n_samples": int(truth.true_walking_mask.size),
            "true_runs": _mask_rle(truth.true_walking_mask),
        },
        "trajectories": {
            "sample_rate": truth.sample_rate / step,
            "time": truth.time[sl].tolist(),
            "torso_range": truth.torso.range[sl].tolist(),
            "torso_velocity": truth.torso.velocity[sl].tolist(),
            "feet_range": truth.merged_feet.range[sl].tolist(),
            "feet_velocity": truth.merged_feet.velocity[sl].tolist(),
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


@dataclass
class TruthRecord:
    """Ground truth reloaded from a sidecar file."""

    events: GaitEvents
    parameters: GaitParameterSet
    walking_mask: np.ndarray
    mask_sample_rate: float
    torso: Trajectory
    merged_feet: Trajectory
    model: dict
    duration: float


def load_truth(path) -> TruthRecord:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "radargait-truth-v1":
        raise ValueError(f"{path}: not a radargait truth sidecar")
    ev = doc["events"]
    events = GaitEvents(ev["hs_times"], ev["hs_ranges"], ev["hs_segments"],
                        ev["to_times"], ev["to_ranges"], ev["to_segments"])
    pp = doc["parameters"]
    params = GaitParameterSet(
        stride_time=pp["stride_time"], stride_length=pp["stride_length"],
        walking_speed=pp["walking_speed"], swing_time=pp["swing_time"],
        stance_time=pp["stance_time"], segment=pp["segment"],
        start_time=pp["start_time"],
    )
    wm = doc["walking_mask"]
    mask = np.zeros(wm["n_samples"], dtype=bool)
    for a, ln in wm["true_runs"]:
        mask[a:a + ln] = True
    tr = doc["trajectories"]
    time = np.asarray(tr["time"])
    torso = Trajectory(time=time, range=np.asarray(tr["torso_range"]),
                       velocity=np.asarray(tr["torso_velocity"]))
    feet = Trajectory(time=time, range=np.asarray(tr["feet_range"]),
                      velocity=np.asarray(tr["feet_velocity"]))
    return TruthRecord(events=events, parameters=params, walking_mask=mask,
                       mask_sample_rate=wm["sample_rate"], torso=torso,
                       merged_feet=feet, model=doc["model"],
                       duration=doc["duration"])
