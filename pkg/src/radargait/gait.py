"""Walking-segment identification, gait event detection and parameter
estimation.

Works on feet/torso trajectories regardless of where they came from (radar
pipeline or the synthetic walker), so radar-derived and ground-truth streams
go through the exact same arithmetic.

Event conventions: heel strikes are local minima of the feet-speed
trajectory, toe offs the succeeding local maxima.  Flat valleys (double
support in clean signals) are resolved to their left edge, i.e. the instant
the foot stops moving.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import find_peaks

from .core import Trajectory


@dataclass(frozen=True)
class WalkSegConfig:
    """Short-time autocorrelation walking detector settings."""

    window_duration: float = 1.0       # [s]
    overlap_fraction: float = 0.95
    confidence_threshold: float = 0.75
    peak_prominence: float = 0.1       # fraction of the max autocorrelation
    min_segment_duration: float = 1.5  # [s]
    max_gap: float = 0.25              # close mask gaps shorter than this [s]
    hysteresis_fraction: float = 0.8   # run-edge extension threshold fraction

    def __post_init__(self):
        if not 0.0 < self.confidence_threshold < 1.0:
            raise ValueError("confidence_threshold must be in (0, 1)")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValueError("overlap_fraction must be in [0, 1)")


@dataclass
class ConfidenceSeries:
    """Walking-confidence values in [0, 1] at window-center times."""

    times: np.ndarray
    values: np.ndarray

    @property
    def sample_rate(self) -> float:
        return 1.0 / float(np.mean(np.diff(self.times)))


@dataclass
class WalkingMask:
    """Binary walking/non-walking decision aligned with a ConfidenceSeries."""

    times: np.ndarray
    values: np.ndarray  # bool

    @property
    def segments(self) -> list[tuple[float, float]]:
        """(start, stop) times of each contiguous walking run."""
        out = []
        v = self.values
        idx = np.flatnonzero(np.diff(np.concatenate(([0], v.view(np.int8), [0]))))
        for a, b in idx.reshape(-1, 2):
            out.append((float(self.times[a]), float(self.times[b - 1])))
        return out

    def sample_at(self, t: np.ndarray) -> np.ndarray:
        """Nearest-neighbour resampling onto arbitrary times."""
        if self.times.size == 0:
            return np.zeros(len(t), dtype=bool)
        idx = np.clip(
            np.searchsorted(self.times, t), 1, len(self.times) - 1
        )
        left = self.times[idx - 1]
        right = self.times[idx]
        nearest = np.where(np.abs(t - left) <= np.abs(right - t), idx - 1, idx)
        out = self.values[nearest]
        # outside the confidence support there is no evidence of walking
        out = out & (t >= self.times[0] - 0.5 / self.sample_rate_safe())
        out = out & (t <= self.times[-1] + 0.5 / self.sample_rate_safe())
        return out

    def sample_rate_safe(self) -> float:
        if self.times.size < 2:
            return 1.0
        return 1.0 / float(np.mean(np.diff(self.times)))


@dataclass
class GaitEvents:
    """Alternating heel-strike / toe-off events.

    Within a segment events interleave as hs[k] < to[k] < hs[k+1]; the final
    heel strike may be terminal (no following toe off).
    """

    hs_times: np.ndarray
    hs_ranges: np.ndarray
    hs_segments: np.ndarray
    to_times: np.ndarray
    to_ranges: np.ndarray
    to_segments: np.ndarray

    def __post_init__(self):
        self.hs_times = np.asarray(self.hs_times, dtype=float)
        self.hs_ranges = np.asarray(self.hs_ranges, dtype=float)
        self.hs_segments = np.asarray(self.hs_segments, dtype=int)
        self.to_times = np.asarray(self.to_times, dtype=float)
        self.to_ranges = np.asarray(self.to_ranges, dtype=float)
        self.to_segments = np.asarray(self.to_segments, dtype=int)

    @classmethod
    def empty(cls) -> "GaitEvents":
        z = np.array([])
        return cls(z, z, z.copy(), z.copy(), z.copy(), z.copy())

    @property
    def n_events(self) -> int:
        return self.hs_times.size + self.to_times.size

    def segment_ids(self) -> np.ndarray:
        return np.unique(np.concatenate((self.hs_segments, self.to_segments)))

    def in_segment(self, seg: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        h = self.hs_segments == seg
        t = self.to_segments == seg
        return (self.hs_times[h], self.hs_ranges[h],
                self.to_times[t], self.to_ranges[t])

    def check_interleaved(self):
        for seg in self.segment_ids():
            hs_t, _, to_t, _ = self.in_segment(seg)
            if to_t.size > hs_t.size:
                raise ValueError(f"segment {seg}: more toe offs than heel strikes")
            for k, t in enumerate(to_t):
                if not (hs_t[k] < t):
                    raise ValueError(f"segment {seg}: events not interleaved")
                if k + 1 < hs_t.size and not (t < hs_t[k + 1]):
                    raise ValueError(f"segment {seg}: events not interleaved")


@dataclass
class GaitParameterSet:
    """Per-stride spatiotemporal parameters."""

    stride_time: np.ndarray
    stride_length: np.ndarray
    walking_speed: np.ndarray
    swing_time: np.ndarray
    stance_time: np.ndarray
    segment: np.ndarray
    start_time: np.ndarray  # heel-strike time opening each stride

    PARAMETER_NAMES = ("stride_time", "stride_length", "walking_speed",
                      "swing_time", "stance_time")

    def __post_init__(self):
        for name in self.PARAMETER_NAMES + ("start_time",):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.segment = np.asarray(self.segment, dtype=int)

    @classmethod
    def empty(cls) -> "GaitParameterSet":
        z = np.array([])
        return cls(z, z.copy(), z.copy(), z.copy(), z.copy(), z.copy(), z.copy())

    @property
    def n_strides(self) -> int:
        return self.stride_time.size

    def values(self, name: str) -> np.ndarray:
        if name not in self.PARAMETER_NAMES:
            raise KeyError(name)
        return getattr(self, name)


# ---------------------------------------------------------------------------
# Walking-segment identification
# ---------------------------------------------------------------------------

def walking_confidence(feet: Trajectory, cfg: WalkSegConfig | None = None) -> ConfidenceSeries:
    """Short-time autocorrelation walking confidence in [0, 1].

    Per window: biased normalised autocorrelation of the mean-removed feet
    speed, positive values summed over non-negative lags, scaled by the
    inverse of the number of prominent positive-lag peaks, then min-max
    normalised over the recording.  Windows with near-zero variance get
    confidence 0.
    """
    cfg = cfg or WalkSegConfig()
    fs = feet.sample_rate
    x = feet.speed.astype(float)
    win = int(round(cfg.window_duration * fs))
    if win < 4 or x.size < win:
        raise ValueError(
            f"recording too short for walking detection: need at least "
            f"{max(win, 4)} samples, got {x.size}"
        )
    hop = max(1, int(round(win * (1.0 - cfg.overlap_fraction))))
    starts = np.arange(0, x.size - win + 1, hop)
    frames = np.lib.stride_tricks.sliding_window_view(x, win)[starts]
    frames = frames - frames.mean(axis=1, keepdims=True)
    var = np.mean(frames ** 2, axis=1)
    var_floor = 1e-6 * max(var.max(), 1e-300)

    # biased autocorrelation via FFT, rho[0] = 1
    nfft = int(2 ** np.ceil(np.log2(2 * win)))
    spec = np.fft.rfft(frames, nfft, axis=1)
    acorr = np.fft.irfft(np.abs(spec) ** 2, nfft, axis=1)[:, :win] / win

    scores = np.zeros(len(starts))
    for i in range(len(starts)):
        if var[i] <= var_floor:
            continue
        rho = acorr[i] / acorr[i, 0]
        raw = float(np.sum(np.clip(rho, 0.0, None)))
        pk, _ = find_peaks(rho, prominence=cfg.peak_prominence)
        # lags close to the biased-estimate support edge only produce
        # truncation artifacts, not gait periodicity
        pk = pk[(pk > 0) & (pk < 0.9 * win)]
        if pk.size == 0:
            # no positive-lag peak at all: aperiodic drift, not gait
            continue
        scores[i] = raw / pk.size

    lo, hi = scores.min(), scores.max()
    if hi - lo > 1e-12 * max(hi, 1.0):
        conf = (scores - lo) / (hi - lo)
    else:
        conf = np.where(scores > 0, 1.0, 0.0)
    # compress toward 1 so that a fixed threshold tolerates the natural
    # window-to-window spread of genuine gait scores
    conf = np.sqrt(conf)
    conf[var <= var_floor] = 0.0
    times = feet.time[0] + (starts + (win - 1) / 2.0) / fs
    return ConfidenceSeries(times=times, values=conf)


def walking_mask(confidence: ConfidenceSeries, cfg: WalkSegConfig | None = None) -> WalkingMask:
    """Threshold the confidence series and tidy the result.

    The confidence is median-smoothed over ~1/3 window before thresholding
    (single-window dips should not fragment a walking bout).  Gaps shorter
    than ``cfg.max_gap`` are closed, runs shorter than
    ``cfg.min_segment_duration`` are dropped, and each surviving run is
    grown by half a detector window per side: a window only scores high
    once it lies fully inside the bout, so raw run edges sit half a window
    inside the true transitions.
    """
    cfg = cfg or WalkSegConfig()
    c = np.asarray(confidence.values, dtype=float)
    if c.size == 0:
        return WalkingMask(times=confidence.times, values=c.astype(bool))
    dt = 1.0 / confidence.sample_rate if c.size > 1 else 1.0
    k = int(round(cfg.window_duration / 3.0 / dt))
    if k > 1:
        c = median_filter(c, size=k | 1, mode="nearest")
    v = c >= cfg.confidence_threshold
    # hysteresis: windows straddling a bout edge score below the entry
    # threshold but well above the turn/stand level, so extend each run
    # outward while the smoothed confidence stays moderately high
    low = cfg.hysteresis_fraction * cfg.confidence_threshold
    for a, b in _runs(v):
        while a > 0 and c[a - 1] >= low:
            a -= 1
        while b < v.size and c[b] >= low:
            b += 1
        v[a:b] = True
    v = _close_gaps(v, int(np.ceil(cfg.max_gap / dt)))
    v = _drop_short_runs(v, int(np.ceil(cfg.min_segment_duration / dt)))
    grow = int(round(0.5 * cfg.window_duration / dt))
    if grow > 0 and v.any():
        for a, b in _runs(v):
            v[max(0, a - grow):min(v.size, b + grow)] = True
    return WalkingMask(times=confidence.times, values=v)


def _runs(v: np.ndarray) -> np.ndarray:
    """Start/stop index pairs of True runs."""
    edges = np.flatnonzero(np.diff(np.concatenate(([0], v.view(np.int8), [0]))))
    return edges.reshape(-1, 2)


def _close_gaps(v: np.ndarray, max_len: int) -> np.ndarray:
    v = v.copy()
    for a, b in _runs(~v):
        if a > 0 and b < v.size and (b - a) < max_len:
            v[a:b] = True
    return v


def _drop_short_runs(v: np.ndarray, min_len: int) -> np.ndarray:
    v = v.copy()
    for a, b in _runs(v):
        if (b - a) < min_len:
            v[a:b] = False
    return v


# ---------------------------------------------------------------------------
# Stream alignment
# ---------------------------------------------------------------------------

class AlignmentError(ValueError):
    """Cross-correlation between the two streams is too weak to trust."""


def align_streams(radar: np.ndarray, reference: np.ndarray, sample_rate: float,
                  min_peak: float = 0.2, max_lag: float | None = None) -> float:
    """Lag [s] between a radar-derived signal and its reference.

    Maximises the normalised cross-correlation, refined by parabolic
    interpolation.  The returned lag is the shift to apply to the reference:
    ``reference(t + lag)`` lines up with ``radar(t)``.  A correlation peak
    below ``min_peak`` raises :class:`AlignmentError`.

    ``max_lag`` restricts the search window [s]; use it when the signals are
    close to periodic (repeated walkway traversals) and an unbounded search
    could lock onto the wrong repetition.
    """
    a = np.asarray(radar, dtype=float)
    b = np.asarray(reference, dtype=float)
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise AlignmentError("zero-variance input, cannot align")
    c = np.correlate(a, b, mode="full") / (na * nb)
    if max_lag is not None:
        shifts = np.arange(c.size) - (b.size - 1)
        c = np.where(np.abs(shifts) <= max_lag * sample_rate, c, -np.inf)
    k = int(np.argmax(c))
    peak = float(c[k])
    if peak < min_peak:
        raise AlignmentError(
            f"correlation peak {peak:.3f} below minimum {min_peak}"
        )
    shift = k - (b.size - 1)
    frac = 0.0
    if 0 < k < c.size - 1 and np.isfinite(c[k - 1]) and np.isfinite(c[k + 1]):
        y0, y1, y2 = c[k - 1], c[k], c[k + 1]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            frac = 0.5 * (y0 - y2) / denom
    # c[k] pairs radar[n] with reference[n - shift], so the reference must be
    # advanced by shift samples to line up
    return (shift + frac) / sample_rate


# ---------------------------------------------------------------------------
# Event detection and parameter estimation
# ---------------------------------------------------------------------------

def _refine_minimum(t: np.ndarray, y: np.ndarray, i: int) -> float:
    """Parabolic sub-sample refinement of a local extremum at sample i."""
    if i <= 0 or i >= y.size - 1:
        return float(t[i])
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return float(t[i])
    frac = 0.5 * (y0 - y2) / denom
    frac = float(np.clip(frac, -0.5, 0.5))
    return float(t[i] + frac * (t[min(i + 1, y.size - 1)] - t[i]))


def detect_events(feet: Trajectory, mask: np.ndarray,
                  min_prominence_fraction: float = 0.1,
                  min_spacing: float = 0.4,
                  edge_guard: float = 0.3) -> GaitEvents:
    """Heel-strike / toe-off detection on a masked feet trajectory.

    Heel strikes are local minima of feet speed (prominence at least
    ``min_prominence_fraction`` of the segment's speed range, spacing at
    least ``min_spacing`` seconds); each toe off is the first local maximum
    after its heel strike.  Flat minima resolve to their left edge.  Events
    within ``edge_guard`` seconds of a segment boundary are discarded: the
    envelope is still settling there and their timing is unreliable.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.size != feet.time.size:
        raise ValueError("mask must align with the trajectory samples")
    if not mask.any():
        return GaitEvents.empty()

    speed = feet.speed
    fs = feet.sample_rate
    dist = max(1, int(round(min_spacing * fs)))

    hs_t, hs_r, hs_s = [], [], []
    to_t, to_r, to_s = [], [], []
    for seg_id, (a, b) in enumerate(_runs(mask)):
        s = speed[a:b]
        t = feet.time[a:b]
        if s.size < 3:
            continue
        span = float(s.max() - s.min())
        if span <= 0:
            continue
        prom = min_prominence_fraction * span
        minima, props = find_peaks(-s, prominence=prom, distance=dist,
                                   plateau_size=(1, None))
        guard = (t >= t[0] + edge_guard) & (t <= t[-1] - edge_guard)
        keep = guard[minima]
        minima = minima[keep]
        props = {k: v[keep] for k, v in props.items()}
        if minima.size == 0:
            continue
        maxima, _ = find_peaks(s, prominence=prom)
        maxima = maxima[guard[maxima]]

        seg_hs_t = []
        for j, m in enumerate(minima):
            if props["plateau_sizes"][j] > 1:
                # flat valley: the left edge is where motion stopped
                seg_hs_t.append(float(t[props["left_edges"][j]]))
            else:
                seg_hs_t.append(_refine_minimum(t, -s, m))

        seg_to_t = []
        keep_hs = []
        for j, ht in enumerate(seg_hs_t):
            next_hs = seg_hs_t[j + 1] if j + 1 < len(seg_hs_t) else np.inf
            cand = [t[m] for m in maxima if ht < t[m] < next_hs]
            if cand:
                keep_hs.append(ht)
                seg_to_t.append(_refine_minimum(t, s, int(np.searchsorted(t, cand[0]))))
            elif np.isfinite(next_hs):
                # no formal peak between two heel strikes: use the interior max
                sel = (t > ht) & (t < next_hs)
                if np.any(sel):
                    keep_hs.append(ht)
                    seg_to_t.append(float(t[sel][np.argmax(s[sel])]))
                else:
                    keep_hs.append(ht)
            else:
                keep_hs.append(ht)  # terminal heel strike without toe off

        hs_t.extend(keep_hs)
        hs_s.extend([seg_id] * len(keep_hs))
        to_t.extend(seg_to_t)
        to_s.extend([seg_id] * len(seg_to_t))

    hs_t = np.asarray(hs_t)
    to_t = np.asarray(to_t)
    hs_r = np.interp(hs_t, feet.time, feet.range) if hs_t.size else np.array([])
    to_r = np.interp(to_t, feet.time, feet.range) if to_t.size else np.array([])
    return GaitEvents(hs_t, hs_r, np.asarray(hs_s), to_t, to_r, np.asarray(to_s))


def estimate_parameters(events: GaitEvents) -> GaitParameterSet:
    """Spatiotemporal gait parameters from alternating-feet event lists.

    Events alternate feet, so same-foot cycles use every second heel strike:
    for stride k, stride time spans hs[k] .. hs[k+2], stance runs from hs[k]
    to the toe off following the opposite foot's heel strike (to[k+1]), and
    swing is the remainder of the stride.
    """
    events.check_interleaved()
    cols = {name: [] for name in GaitParameterSet.PARAMETER_NAMES}
    segs, t0s = [], []
    for seg in events.segment_ids():
        hs_t, hs_r, to_t, _ = events.in_segment(seg)
        if hs_t.size < 2:
            warnings.warn(f"segment {seg}: fewer than 2 heel strikes, no strides")
            continue
        for k in range(hs_t.size - 2):
            if k + 1 >= to_t.size:
                break
            stride_time = hs_t[k + 2] - hs_t[k]
            stride_length = abs(hs_r[k + 2] - hs_r[k])
            stance = to_t[k + 1] - hs_t[k]
            swing = stride_time - stance
            if stride_time <= 0 or stance <= 0 or swing <= 0 or stride_length <= 0:
                continue
            cols["stride_time"].append(stride_time)
            cols["stride_length"].append(stride_length)
            cols["walking_speed"].append(stride_length / stride_time)
            cols["stance_time"].append(stance)
            cols["swing_time"].append(swing)
            segs.append(int(seg))
            t0s.append(hs_t[k])
    return GaitParameterSet(
        stride_time=cols["stride_time"],
        stride_length=cols["stride_length"],
        walking_speed=cols["walking_speed"],
        swing_time=cols["swing_time"],
        stance_time=cols["stance_time"],
        segment=segs,
        start_time=t0s,
    )
