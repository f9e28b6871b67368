"""Static and slowly varying clutter suppression.

Two stages, applied identically to both modalities: a zero-phase high-pass
along slow time (per range bin), followed by an adaptive exponential
moving-average background subtractor whose forgetting factor slows down when
the instantaneous deviation is large (a moving target) and speeds up when it
is small (background drift to absorb).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.signal import butter, sosfiltfilt

from .core import RangeProfileMatrix


@dataclass(frozen=True)
class ClutterFilterConfig:
    highpass_cutoff: float = 0.1   # [Hz]
    highpass_order: int = 4
    ema_alpha_min: float = 0.90
    ema_alpha_max: float = 0.995
    ema_adapt_gain: float = 4.0

    def __post_init__(self):
        if self.highpass_cutoff <= 0:
            raise ValueError("highpass_cutoff must be positive")
        if self.highpass_order < 1:
            raise ValueError("highpass_order must be >= 1")
        if not 0.0 < self.ema_alpha_min <= self.ema_alpha_max < 1.0:
            raise ValueError("need 0 < ema_alpha_min <= ema_alpha_max < 1")


def highpass_slow_time(profiles: RangeProfileMatrix,
                       cfg: ClutterFilterConfig | None = None) -> RangeProfileMatrix:
    """Zero-phase Butterworth high-pass along slow time, per range bin."""
    cfg = cfg or ClutterFilterConfig()
    fs = profiles.config.slow_time_rate
    if not cfg.highpass_cutoff < fs / 2:
        raise ValueError("highpass_cutoff must be below the slow-time Nyquist rate")
    sos = butter(cfg.highpass_order, cfg.highpass_cutoff, btype="highpass",
                 fs=fs, output="sos")
    n_sections = sos.shape[0]
    padlen = 3 * (2 * n_sections + 1)
    min_len = max(3 * cfg.highpass_order, padlen) + 1
    if profiles.n_slow < min_len:
        raise ValueError(
            f"recording too short for the high-pass warm-up: need at least "
            f"{min_len} slow-time samples, got {profiles.n_slow}"
        )
    x = profiles.samples
    out = np.empty_like(x)
    block = 32  # range-bin columns per pass, bounds peak memory
    for j0 in range(0, x.shape[1], block):
        j1 = min(x.shape[1], j0 + block)
        xr = np.ascontiguousarray(x[:, j0:j1].real, dtype=np.float64)
        xi = np.ascontiguousarray(x[:, j0:j1].imag, dtype=np.float64)
        out[:, j0:j1] = sosfiltfilt(sos, xr, axis=0) + 1j * sosfiltfilt(sos, xi, axis=0)
    return RangeProfileMatrix(samples=out, config=profiles.config,
                              start_time=profiles.start_time)


@njit(cache=True)
def _ema_kernel(re, im, alpha_min, alpha_max, gain):  # pragma: no cover
    n, m = re.shape
    out_re = np.empty_like(re)
    out_im = np.empty_like(im)
    c_re = re[0].copy()
    c_im = im[0].copy()
    scale = np.full(m, 1e-12)
    span = alpha_max - alpha_min
    for i in range(n):
        for j in range(m):
            dr = re[i, j] - c_re[j]
            di = im[i, j] - c_im[j]
            dev = np.sqrt(dr * dr + di * di)
            # logistic adaptation: large relative deviation -> slow update
            z = gain * (dev / scale[j] - 1.0)
            if z > 50.0:
                sig = 1.0
            elif z < -50.0:
                sig = 0.0
            else:
                sig = 1.0 / (1.0 + np.exp(-z))
            alpha = alpha_min + span * sig
            c_re[j] = alpha * c_re[j] + (1.0 - alpha) * re[i, j]
            c_im[j] = alpha * c_im[j] + (1.0 - alpha) * im[i, j]
            out_re[i, j] = re[i, j] - c_re[j]
            out_im[i, j] = im[i, j] - c_im[j]
            scale[j] = 0.99 * scale[j] + 0.01 * dev
            if scale[j] < 1e-12:
                scale[j] = 1e-12
    return out_re, out_im


def adaptive_ema_clutter(profiles: RangeProfileMatrix,
                         cfg: ClutterFilterConfig | None = None) -> RangeProfileMatrix:
    """Adaptive exponential moving-average background subtraction.

    Per bin, a background estimate c[n] = a[n] c[n-1] + (1 - a[n]) x[n] is
    removed from the signal.  The forgetting factor a[n] moves between
    ema_alpha_min and ema_alpha_max through a logistic function of the
    instantaneous deviation |x[n] - c[n-1]| relative to its running scale, so
    moving targets are preserved while background drift is absorbed.  The
    background is seeded with the first row, which removes static clutter
    from sample one onward.
    """
    cfg = cfg or ClutterFilterConfig()
    x = profiles.samples
    if x.shape[0] == 0:
        return profiles
    out = np.empty_like(x)
    block = 32
    for j0 in range(0, x.shape[1], block):
        j1 = min(x.shape[1], j0 + block)
        re = np.ascontiguousarray(x[:, j0:j1].real, dtype=np.float64)
        im = np.ascontiguousarray(x[:, j0:j1].imag, dtype=np.float64)
        out_re, out_im = _ema_kernel(re, im, cfg.ema_alpha_min,
                                     cfg.ema_alpha_max, cfg.ema_adapt_gain)
        out[:, j0:j1] = out_re + 1j * out_im
    return RangeProfileMatrix(samples=out, config=profiles.config,
                              start_time=profiles.start_time)


def remove_clutter(profiles: RangeProfileMatrix,
                   cfg: ClutterFilterConfig | None = None) -> RangeProfileMatrix:
    """High-pass then adaptive EMA, the full clutter-removal stage."""
    cfg = cfg or ClutterFilterConfig()
    return adaptive_ema_clutter(highpass_slow_time(profiles, cfg), cfg)
