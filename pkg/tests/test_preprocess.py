"""Clutter-suppression stage: zero-phase high-pass and adaptive EMA."""

import numpy as np
import pytest

from radargait import (ClutterFilterConfig, RadarConfig, RangeProfileMatrix,
                       adaptive_ema_clutter, highpass_slow_time,
                       remove_clutter)


def _profiles(columns: dict[int, np.ndarray], n_slow: int,
              config: RadarConfig | None = None) -> RangeProfileMatrix:
    config = config or RadarConfig.uwb_default()
    x = np.zeros((n_slow, config.n_range_bins), dtype=np.complex128)
    for j, col in columns.items():
        x[:, j] = col
    return RangeProfileMatrix(samples=x, config=config)


class TestHighpass:
    def test_dc_rejection(self):
        n = 2000
        p = _profiles({40: np.full(n, 3.0 - 1.0j)}, n)
        out = highpass_slow_time(p)
        assert np.max(np.abs(out.samples[:, 40])) < 1e-6 * np.abs(3.0 - 1.0j)

    def test_tone_preserved(self):
        # a 10 Hz tone sits far above the 0.1 Hz cutoff: magnitude intact.
        # The 0.1 Hz zero-phase filter settles over seconds, so judge the
        # interior of a 90 s record, clear of both edge transients.
        cfg = RadarConfig.uwb_default()
        n = int(90 * cfg.slow_time_rate)
        t = np.arange(n) / cfg.slow_time_rate
        tone = np.exp(2j * np.pi * 10.0 * t)
        out = highpass_slow_time(_profiles({10: tone}, n, cfg))
        mid = out.samples[n // 3:-n // 3, 10]
        assert np.abs(np.abs(mid) - 1.0).max() < 0.01

    def test_zero_in_zero_out(self):
        out = highpass_slow_time(_profiles({}, 500))
        assert np.all(out.samples == 0)

    def test_linearity(self):
        cfg = RadarConfig.uwb_default()
        n = 1000
        rng = np.random.default_rng(2)
        x = rng.standard_normal((n, cfg.n_range_bins)) \
            + 1j * rng.standard_normal((n, cfg.n_range_bins))
        y = rng.standard_normal((n, cfg.n_range_bins)) \
            + 1j * rng.standard_normal((n, cfg.n_range_bins))
        a, b = 2.5, -0.7
        fx = highpass_slow_time(RangeProfileMatrix(samples=x, config=cfg)).samples
        fy = highpass_slow_time(RangeProfileMatrix(samples=y, config=cfg)).samples
        fxy = highpass_slow_time(
            RangeProfileMatrix(samples=a * x + b * y, config=cfg)).samples
        np.testing.assert_allclose(fxy, a * fx + b * fy, atol=1e-9)

    def test_double_application_energy(self):
        cfg = RadarConfig.uwb_default()
        n = int(60 * cfg.slow_time_rate)
        t = np.arange(n) / cfg.slow_time_rate
        tone = np.exp(2j * np.pi * 10.0 * t)
        once = highpass_slow_time(_profiles({10: tone}, n, cfg))
        twice = highpass_slow_time(once)
        sl = slice(n // 3, -n // 3)  # edge transients excluded, as above
        e1 = np.sum(np.abs(once.samples[sl]) ** 2)
        e2 = np.sum(np.abs(twice.samples[sl]) ** 2)
        assert abs(e2 - e1) / e1 < 0.01

    def test_too_short_recording(self):
        with pytest.raises(ValueError, match="at least"):
            highpass_slow_time(_profiles({}, 10))


class TestAdaptiveEma:
    def test_constant_suppressed(self):
        cfg = ClutterFilterConfig()
        n = 500
        p = _profiles({5: np.full(n, 2.0 + 1.0j)}, n)
        out = adaptive_ema_clutter(p, cfg)
        settle = int(5.0 / (1.0 - cfg.ema_alpha_min))
        assert np.max(np.abs(out.samples[settle:, 5])) < 0.01 * abs(2.0 + 1.0j)

    def test_zero_in_zero_out(self):
        out = adaptive_ema_clutter(_profiles({}, 200))
        assert np.all(out.samples == 0)

    def test_step_resuppressed(self):
        cfg = ClutterFilterConfig()
        n = 800
        col = np.full(n, 1.0 + 0.0j)
        col[400:] = 4.0 + 2.0j  # background jumps mid-recording
        out = adaptive_ema_clutter(_profiles({3: col}, n), cfg)
        # the large deviation first reads as a target (alpha near alpha_max),
        # so the settle window is governed by the slow time constant until
        # the running scale catches up
        settle = 250
        assert np.max(np.abs(out.samples[400 + settle:, 3])) < 0.01 * abs(4.0 + 2.0j)


class TestCombined:
    def test_static_attenuation_and_doppler_preservation(self):
        cfg = RadarConfig.uwb_default()
        fs = cfg.slow_time_rate
        n = int(10 * fs)
        t = np.arange(n) / fs
        f_d = 2 * 1.0 / cfg.wavelength  # Doppler of a 1 m/s target
        p = _profiles({80: np.ones(n),
                       120: np.exp(2j * np.pi * f_d * t)}, n, cfg)
        clean = remove_clutter(p)
        sl = slice(n // 4, -n // 4)
        atten = 10 * np.log10(
            np.mean(np.abs(p.samples[sl, 80]) ** 2)
            / max(np.mean(np.abs(clean.samples[sl, 80]) ** 2), 1e-300))
        assert atten >= 40.0
        change = abs(10 * np.log10(
            np.mean(np.abs(clean.samples[sl, 120]) ** 2)
            / np.mean(np.abs(p.samples[sl, 120]) ** 2)))
        assert change <= 1.0


class TestConfig:
    def test_invalid_alphas(self):
        with pytest.raises(ValueError):
            ClutterFilterConfig(ema_alpha_min=0.99, ema_alpha_max=0.9)
        with pytest.raises(ValueError):
            ClutterFilterConfig(highpass_cutoff=0.0)

    def test_cutoff_above_nyquist(self):
        cfg = RadarConfig.uwb_default()
        p = _profiles({}, 500, cfg)
        with pytest.raises(ValueError, match="Nyquist"):
            highpass_slow_time(p, ClutterFilterConfig(highpass_cutoff=300.0))
