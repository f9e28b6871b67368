"""Range-Doppler-time processing: STFT along slow time, Naka-Rushton
contrast enhancement, and torso/feet trajectory extraction.

The cube orientation is fixed so that positive velocity always means
receding, regardless of modality: the two signal models carry opposite phase
signs, which is undone here (driven by the config's modality flag, not by
any modality-specific tuning).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .core import Modality, RangeProfileMatrix, Trajectory, kaiser_window, range_axis


@dataclass(frozen=True)
class StftConfig:
    window_duration: float = 0.2   # [s]
    overlap_fraction: float = 0.95
    kaiser_shape: float = 15.0
    fft_length: int | None = None  # None: next power of two >= window samples

    def __post_init__(self):
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValueError("overlap_fraction must be in [0, 1)")
        if self.window_duration <= 0:
            raise ValueError("window_duration must be positive")

    def window_samples(self, slow_time_rate: float) -> int:
        win = int(round(self.window_duration * slow_time_rate))
        if win < 8:
            raise ValueError(
                f"window of {win} samples is too short (need >= 8); "
                "increase window_duration"
            )
        return win

    def hop_samples(self, slow_time_rate: float) -> int:
        win = self.window_samples(slow_time_rate)
        return max(1, int(round(win * (1.0 - self.overlap_fraction))))

    def n_fft(self, slow_time_rate: float) -> int:
        win = self.window_samples(slow_time_rate)
        if self.fft_length is None:
            return int(2 ** np.ceil(np.log2(win)))
        if self.fft_length < win:
            raise ValueError("fft_length must be >= window samples")
        return self.fft_length


@dataclass(frozen=True)
class EnvelopeConfig:
    upper_percentile: float = 0.97
    lower_percentile: float = 0.03
    noise_floor_quantile: float = 0.5
    gate_halfwidth: float = 0.5    # range gate around the torso track [m]
    min_peak_to_floor: float = 25.0  # below this the frame is noise-like

    def __post_init__(self):
        if not 0.0 < self.lower_percentile <= self.upper_percentile < 1.0:
            raise ValueError("need 0 < lower_percentile <= upper_percentile < 1")


@dataclass
class RDTCube:
    """Sequence of range-Doppler frames with physical axes.

    ``frames`` holds non-negative magnitudes [N_frames, N_range, N_doppler];
    after contrast enhancement all entries lie in [0, 1).
    """

    frames: np.ndarray
    frame_times: np.ndarray
    range_axis: np.ndarray
    velocity_axis: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def expected_frame_count(n_slow: int, win: int, hop: int) -> int:
    if n_slow < win:
        return 0
    return (n_slow - win) // hop + 1


def build_rdt(profiles: RangeProfileMatrix, cfg: StftConfig | None = None) -> RDTCube:
    """Short-time Fourier magnitude along slow time, per range bin.

    Kaiser-windowed segments, FFT-shifted so the velocity axis is centered
    and ascending, scaled by 1/sqrt(n_fft) so that the summed squared
    magnitudes of one frame equal the windowed-segment energy.
    """
    cfg = cfg or StftConfig()
    config = profiles.config
    fs = config.slow_time_rate
    win = cfg.window_samples(fs)
    hop = cfg.hop_samples(fs)
    nfft = cfg.n_fft(fs)
    if profiles.n_slow < win:
        raise ValueError(
            f"recording shorter than one STFT window ({profiles.n_slow} < {win})"
        )
    starts = np.arange(0, profiles.n_slow - win + 1, hop)
    w = kaiser_window(win, cfg.kaiser_shape).astype(np.float32)

    # strided view over hop-spaced windowed segments: (n_starts, N_range, win)
    segs = np.lib.stride_tricks.sliding_window_view(
        profiles.samples, win, axis=0)[::hop]
    frames = np.empty((starts.size, config.n_range_bins, nfft), dtype=np.float32)
    batch = max(1, int(8_000_000 / (config.n_range_bins * nfft)))
    # fold the Parseval 1/sqrt(n_fft) scaling into the analysis window
    w = w * np.float32(1.0 / np.sqrt(nfft))
    half = nfft // 2
    flip = config.modality is Modality.UWB
    buf = np.zeros((batch, config.n_range_bins, nfft), dtype=np.complex64)
    for b0 in range(0, starts.size, batch):
        b1 = min(starts.size, b0 + batch)
        bs = b1 - b0
        np.multiply(segs[b0:b1], w, out=buf[:bs, :, :win])
        if win < nfft:
            buf[:bs, :, win:] = 0  # overwrite_x may have trashed the padding
        spec = scipy.fft.fft(buf[:bs], axis=-1, overwrite_x=True)
        out = frames[b0:b1]
        if flip:
            # the UWB model's phase sign is opposite: map frequency k -> -k
            # so that positive velocity still means receding; composed with
            # the centering shift this is three reversed block copies
            np.abs(spec[..., half:0:-1], out=out[..., :half])
            np.abs(spec[..., 0], out=out[..., half])
            np.abs(spec[..., :half:-1], out=out[..., half + 1:])
        else:
            # plain fftshift: swap halves
            np.abs(spec[..., half:], out=out[..., :nfft - half])
            np.abs(spec[..., :half], out=out[..., nfft - half:])

    frame_times = profiles.start_time + (starts + (win - 1) / 2.0) / fs
    vel = np.fft.fftshift(np.fft.fftfreq(nfft)) * 2.0 * config.max_velocity
    return RDTCube(frames=frames, frame_times=frame_times,
                   range_axis=range_axis(config), velocity_axis=vel)


def naka_rushton(cube: RDTCube, exponent: float = 2.0,
                 semi_saturation_quantile: float = 0.5) -> RDTCube:
    """Saturating contrast transform y = x^g / (x^g + s^g), per frame.

    The semi-saturation constant s is the given quantile of the frame's
    nonzero magnitudes; all-zero frames pass through unchanged.  The map is
    monotone within each frame, so argmax locations are preserved.
    """
    flat = cube.frames.reshape(cube.n_frames, -1)
    out = np.empty_like(flat)
    zero_counts = np.count_nonzero(flat == 0, axis=1)
    clean = zero_counts == 0
    if np.any(clean):
        s = np.quantile(flat[clean], semi_saturation_quantile, axis=1)
        xg = flat[clean] ** exponent
        out[clean] = xg / (xg + (s ** exponent)[:, None])
    for i in np.flatnonzero(~clean):
        row = flat[i]
        nz = row[row > 0]
        if nz.size == 0:
            out[i] = row
            continue
        s = np.quantile(nz, semi_saturation_quantile)
        xg = row ** exponent
        out[i] = xg / (xg + s ** exponent)
    return RDTCube(frames=out.reshape(cube.frames.shape),
                   frame_times=cube.frame_times,
                   range_axis=cube.range_axis,
                   velocity_axis=cube.velocity_axis)


# ---------------------------------------------------------------------------
# Trajectory extraction
# ---------------------------------------------------------------------------

def _parabolic_offset(y0, y1, y2):
    denom = y0 - 2.0 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(denom != 0, 0.5 * (y0 - y2) / denom, 0.0)
    return np.clip(frac, -0.5, 0.5)


def torso_peaks(cube: RDTCube):
    """Per-frame dominant-peak range/velocity with sub-bin refinement.

    Returns (range, velocity, low_confidence) without any gap filling.
    """
    f, nr, nd = cube.frames.shape
    flat = cube.frames.reshape(f, -1)
    idx = np.argmax(flat, axis=1)
    peak = flat[np.arange(f), idx]
    r_idx, d_idx = np.divmod(idx, nd)
    low = peak <= 0.0

    dr = cube.range_axis[1] - cube.range_axis[0] if nr > 1 else 0.0
    dv = cube.velocity_axis[1] - cube.velocity_axis[0] if nd > 1 else 0.0
    fi = np.arange(f)

    r0 = np.clip(r_idx - 1, 0, nr - 1)
    r2 = np.clip(r_idx + 1, 0, nr - 1)
    interior = (r_idx > 0) & (r_idx < nr - 1)
    frac_r = np.where(interior, _parabolic_offset(
        cube.frames[fi, r0, d_idx], peak, cube.frames[fi, r2, d_idx]), 0.0)
    rng = cube.range_axis[r_idx] + frac_r * dr

    d0 = np.clip(d_idx - 1, 0, nd - 1)
    d2 = np.clip(d_idx + 1, 0, nd - 1)
    interior = (d_idx > 0) & (d_idx < nd - 1)
    frac_d = np.where(interior, _parabolic_offset(
        cube.frames[fi, r_idx, d0], peak, cube.frames[fi, r_idx, d2]), 0.0)
    vel = cube.velocity_axis[d_idx] + frac_d * dv
    return rng, vel, low


def fill_low_confidence(values: np.ndarray, low: np.ndarray,
                        fallback: float) -> np.ndarray:
    """Carry the previous estimate over flagged frames (backfill the head)."""
    out = np.asarray(values, dtype=float).copy()
    ok = ~low
    if not ok.any():
        out[:] = fallback
        return out
    idx = np.where(ok, np.arange(out.size), 0)
    np.maximum.accumulate(idx, out=idx)
    out = out[idx]
    first = np.argmax(ok)
    out[:first] = out[first]
    return out


def extract_torso_trajectory(cube: RDTCube) -> Trajectory:
    """Torso range/velocity from the global per-frame maximum."""
    if cube.n_frames == 0:
        raise ValueError("empty RDT cube")
    rng, vel, low = torso_peaks(cube)
    mid = float(0.5 * (cube.range_axis[0] + cube.range_axis[-1]))
    return Trajectory(
        time=cube.frame_times,
        range=fill_low_confidence(rng, low, mid),
        velocity=fill_low_confidence(vel, low, 0.0),
        low_confidence=low,
    )


def feet_envelopes(cube: RDTCube, cfg: EnvelopeConfig,
                   torso_range: np.ndarray, torso_velocity: np.ndarray,
                   prev_direction: float = 1.0):
    """Per-frame percentile Doppler envelopes and feet range centroid.

    The cube is collapsed to a Doppler energy spectrum over range bins within
    the torso gate, the per-frame noise floor is subtracted, and cumulative
    energy is accumulated over velocity bins ordered by |velocity| in the
    torso's direction of motion.  Returns (upper, lower, feet_range,
    low_confidence, last_direction).
    """
    f, nr, nd = cube.frames.shape
    upper = np.zeros(f)
    lower = np.zeros(f)
    feet_rng = np.zeros(f)
    low = np.zeros(f, dtype=bool)
    vel = cube.velocity_axis
    zero_bin = int(np.argmin(np.abs(vel)))
    dres = cube.range_axis[1] - cube.range_axis[0] if nr > 1 else 1.0
    gate_bins = max(1, int(round(cfg.gate_halfwidth / dres)))
    direction = prev_direction

    for i in range(f):
        if abs(torso_velocity[i]) > 0.05:
            direction = 1.0 if torso_velocity[i] > 0 else -1.0
        c = int(round((torso_range[i] - cube.range_axis[0]) / dres))
        a = max(0, c - gate_bins)
        b = min(nr, c + gate_bins + 1)
        slab = cube.frames[i, a:b, :]
        e = np.sum(slab.astype(np.float64) ** 2, axis=0)
        floor = np.quantile(e, cfg.noise_floor_quantile)
        if floor > 0 and e.max() < cfg.min_peak_to_floor * floor:
            # no Doppler line stands out of the residual noise: percentile
            # crossings would land in the noise tail, not on the feet
            low[i] = True
            continue
        e = np.clip(e - floor, 0.0, None)

        if direction > 0:
            order = np.arange(zero_bin, nd)
        else:
            order = np.arange(zero_bin, -1, -1)
        eh = e[order]
        total = eh.sum()
        if total <= 0:
            low[i] = True
            continue
        cum = np.cumsum(eh) / total
        sv = np.abs(vel[order])
        upper[i] = direction * _percentile_crossing(cum, sv, cfg.upper_percentile)
        lower[i] = direction * _percentile_crossing(cum, sv, cfg.lower_percentile)

        fast = sv >= 0.5 * abs(upper[i])
        w = slab[:, order[fast]].astype(np.float64) ** 2
        wsum = w.sum()
        if wsum <= 0:
            low[i] = True
            continue
        feet_rng[i] = float((w.sum(axis=1) * cube.range_axis[a:b]).sum() / wsum)
    return upper, lower, feet_rng, low, direction


def _percentile_crossing(cum: np.ndarray, speeds: np.ndarray, p: float) -> float:
    """Speed at which the cumulative energy first reaches p, with linear
    interpolation of the crossing between bins."""
    k = int(np.searchsorted(cum, p))
    if k >= cum.size:
        return float(speeds[-1])
    c1 = cum[k]
    if k == 0:
        c0, s0 = 0.0, 0.0
    else:
        c0, s0 = cum[k - 1], speeds[k - 1]
    if c1 == c0:
        return float(speeds[k])
    return float(s0 + (p - c0) / (c1 - c0) * (speeds[k] - s0))


def extract_feet_trajectory(cube: RDTCube, cfg: EnvelopeConfig | None = None,
                            torso: Trajectory | None = None) -> Trajectory:
    """Feet trajectory from the upper percentile Doppler envelope.

    Requires the torso pass first: the Doppler collapse is range-gated
    around the torso track and envelopes are taken in the torso's direction
    of motion.
    """
    cfg = cfg or EnvelopeConfig()
    if torso is None:
        torso = extract_torso_trajectory(cube)
    if torso.time.size != cube.n_frames:
        raise ValueError("torso trajectory must align with the cube frames")
    upper, _, feet_rng, low, _ = feet_envelopes(
        cube, cfg, torso.range, torso.velocity)
    return Trajectory(
        time=cube.frame_times,
        range=fill_low_confidence(feet_rng, low, float(np.median(torso.range))),
        velocity=fill_low_confidence(upper, low, 0.0),
        low_confidence=low,
    )
