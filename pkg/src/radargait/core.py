"""Shared domain types, axis construction and window generation.

Everything downstream (synthesis, clutter removal, Doppler processing, gait
analysis) works on the types defined here.  The central interchange format is
the :class:`RangeProfileMatrix`: a complex slow-time x range-bin matrix that
both radar modalities produce, so the rest of the pipeline never needs to know
which sensor the data came from.

Conventions fixed here:

* range bins are bin-centered: the first bin sits at ``range_resolution / 2``
  (avoids a zero-range bin where the 1/R^2 amplitude law diverges);
* positive radial velocity means the target is receding from the radar;
* the unambiguous velocity span is tied to the slow-time rate through
  ``max_velocity = wavelength * slow_time_rate / 4``.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field

import numpy as np


class Modality(enum.Enum):
    """Radar front-end family."""

    UWB = 0
    FMCW = 1


# Collocated sensors share one mounting point: (height, lateral offset from
# the walking line, along-track origin), all in meters.
DEFAULT_RADAR_POSITION = (1.0, 0.5, 0.0)


@dataclass(frozen=True)
class RadarConfig:
    """Modality, geometry and signal-model constants for one radar.

    ``max_velocity`` is derived, never passed in: it always equals
    ``wavelength * slow_time_rate / 4`` so that the Doppler axis of any
    downstream FFT is unambiguous by construction.
    """

    modality: Modality
    wavelength: float              # carrier wavelength [m]
    max_range: float = 9.0         # [m]
    range_resolution: float = 0.05  # [m]
    slow_time_rate: float = 500.0  # [Hz]
    uwb_pulse_width: float = 0.05  # sigma_r, effective range-profile width [m]
    fmcw_window_scale: float = 1.0  # alpha, fast-time window main-lobe scaling
    radar_position: tuple[float, float, float] = DEFAULT_RADAR_POSITION
    max_velocity: float = field(init=False)

    def __post_init__(self):
        if self.max_range <= 0 or self.range_resolution <= 0:
            raise ValueError("max_range and range_resolution must be positive")
        if self.slow_time_rate <= 0:
            raise ValueError("slow_time_rate must be positive")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.uwb_pulse_width <= 0:
            raise ValueError("uwb_pulse_width must be positive")
        object.__setattr__(
            self, "max_velocity", self.wavelength * self.slow_time_rate / 4.0
        )

    @property
    def n_range_bins(self) -> int:
        return int(math.ceil(self.max_range / self.range_resolution - 1e-9))

    @classmethod
    def uwb_default(cls, **overrides) -> "RadarConfig":
        """X4M03-like IR-UWB: 7.29 GHz carrier, +-5.14 m/s Doppler span."""
        kw = dict(
            modality=Modality.UWB,
            wavelength=41.13e-3,
            slow_time_rate=500.0,
            uwb_pulse_width=0.05,
        )
        kw.update(overrides)
        return cls(**kw)

    @classmethod
    def fmcw_default(cls, **overrides) -> "RadarConfig":
        """BGT60TR13C-like 60 GHz FMCW: +-5.15 m/s Doppler span."""
        kw = dict(
            modality=Modality.FMCW,
            wavelength=5.0e-3,
            slow_time_rate=4120.0,
            fmcw_window_scale=1.0,
        )
        kw.update(overrides)
        return cls(**kw)


def range_axis(config: RadarConfig) -> np.ndarray:
    """Bin-center ranges [m], spacing ``range_resolution``, first bin at
    ``range_resolution / 2``."""
    n = config.n_range_bins
    return (np.arange(n) + 0.5) * config.range_resolution


def kaiser_window(length: int, shape_factor: float) -> np.ndarray:
    """Symmetric Kaiser window, peak value 1 at the center.

    I0(beta * sqrt(1 - x^2)) / I0(beta) with x in [-1, 1] across the window.
    shape_factor = 0 degenerates to a rectangular window.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if shape_factor < 0:
        raise ValueError("shape_factor must be >= 0")
    if length == 1:
        return np.ones(1)
    return np.kaiser(length, shape_factor)


def velocity_axis(config: RadarConfig, n_doppler_bins: int) -> np.ndarray:
    """FFT-shifted velocity axis [m/s] spanning [-max_velocity, +max_velocity).

    Zero velocity always falls exactly on a bin.
    """
    if n_doppler_bins < 2:
        raise ValueError("n_doppler_bins must be >= 2")
    f = np.fft.fftshift(np.fft.fftfreq(n_doppler_bins))
    return f * 2.0 * config.max_velocity


@dataclass
class RangeProfileMatrix:
    """Complex slow-time x range-bin matrix, the shared interchange format.

    Row n holds the range profile acquired at slow time
    ``start_time + n / config.slow_time_rate``.
    """

    samples: np.ndarray  # complex [N_slow, N_range]
    config: RadarConfig
    start_time: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 2:
            raise ValueError("samples must be a 2-D matrix")
        if self.samples.shape[1] != self.config.n_range_bins:
            raise ValueError(
                f"expected {self.config.n_range_bins} range bins, "
                f"got {self.samples.shape[1]}"
            )
        if not np.iscomplexobj(self.samples):
            self.samples = self.samples.astype(np.complex64)

    @property
    def n_slow(self) -> int:
        return self.samples.shape[0]

    @property
    def slow_time(self) -> np.ndarray:
        return self.start_time + np.arange(self.n_slow) / self.config.slow_time_rate

    def validate_finite(self):
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("range profile matrix contains NaN/Inf samples")


@dataclass
class Trajectory:
    """Time series of radial range [m] and signed radial velocity [m/s]
    (positive = receding) for one tracked body part."""

    time: np.ndarray
    range: np.ndarray
    velocity: np.ndarray
    low_confidence: np.ndarray | None = None  # per-sample degenerate-frame flag

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        self.range = np.asarray(self.range, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        n = self.time.size
        if self.range.size != n or self.velocity.size != n:
            raise ValueError("time, range and velocity must have equal length")
        if n > 1 and not np.all(np.diff(self.time) > 0):
            raise ValueError("time must be strictly increasing")
        if self.low_confidence is not None:
            self.low_confidence = np.asarray(self.low_confidence, dtype=bool)
            if self.low_confidence.size != n:
                raise ValueError("low_confidence length mismatch")

    @property
    def speed(self) -> np.ndarray:
        return np.abs(self.velocity)

    @property
    def sample_rate(self) -> float:
        if self.time.size < 2:
            raise ValueError("need at least two samples for a sample rate")
        return 1.0 / float(np.mean(np.diff(self.time)))

    def validate_against(self, config: RadarConfig, atol: float = 1e-9):
        if np.any(self.range < -atol) or np.any(self.range > config.max_range + atol):
            raise ValueError("range outside [0, max_range]")
        if np.any(np.abs(self.velocity) > config.max_velocity + atol):
            raise ValueError("|velocity| exceeds max_velocity")


# ---------------------------------------------------------------------------
# Binary container for range-profile matrices
#
# Little-endian header:
#   magic "RPM1" | modality u8 | N_slow u32 | N_range u32
#   | slow_time_rate f64 | range_resolution f64 | wavelength f64
# followed by row-major interleaved float32 (re, im) samples.
# ---------------------------------------------------------------------------

RPM_MAGIC = b"RPM1"
_HEADER_FMT = "<4sBIIddd"
_HEADER_SIZE = struct.calcsize(_HEADER_FMT)


class RpmFormatError(ValueError):
    """Raised when a range-profile container is malformed or truncated."""


def save_rpm(path, profiles: RangeProfileMatrix):
    cfg = profiles.config
    header = struct.pack(
        _HEADER_FMT,
        RPM_MAGIC,
        cfg.modality.value,
        profiles.n_slow,
        cfg.n_range_bins,
        cfg.slow_time_rate,
        cfg.range_resolution,
        cfg.wavelength,
    )
    data = np.ascontiguousarray(profiles.samples.astype(np.complex64))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def load_rpm(path, radar_position=DEFAULT_RADAR_POSITION) -> RangeProfileMatrix:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER_SIZE:
        raise RpmFormatError(
            f"truncated header: need {_HEADER_SIZE} bytes, file has {len(raw)} "
            f"(offset {len(raw)})"
        )
    magic, modality, n_slow, n_range, rate, res, wavelength = struct.unpack(
        _HEADER_FMT, raw[:_HEADER_SIZE]
    )
    if magic != RPM_MAGIC:
        raise RpmFormatError(f"bad magic {magic!r} at offset 0")
    try:
        mod = Modality(modality)
    except ValueError:
        raise RpmFormatError(f"unknown modality byte {modality} at offset 4")
    expected = n_slow * n_range * 8
    payload = raw[_HEADER_SIZE:]
    if len(payload) != expected:
        raise RpmFormatError(
            f"truncated payload: expected {expected} bytes after offset "
            f"{_HEADER_SIZE}, got {len(payload)} (file ends at offset {len(raw)})"
        )
    samples = np.frombuffer(payload, dtype="<c8").reshape(n_slow, n_range).copy()
    kw = dict(
        modality=mod,
        wavelength=wavelength,
        max_range=n_range * res,
        range_resolution=res,
        slow_time_rate=rate,
        radar_position=tuple(radar_position),
    )
    if mod is Modality.UWB:
        kw["uwb_pulse_width"] = res
    config = RadarConfig(**kw)
    return RangeProfileMatrix(samples=samples, config=config)
