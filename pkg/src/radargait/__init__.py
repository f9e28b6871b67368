"""Radar-modality-independent spatiotemporal gait analysis with a
physics-based synthetic walker for matched IR-UWB and FMCW recordings."""

from .core import (DEFAULT_RADAR_POSITION, Modality, RadarConfig,
                   RangeProfileMatrix, RpmFormatError, Trajectory,
                   kaiser_window, load_rpm, range_axis, save_rpm,
                   velocity_axis)
from .doppler import (EnvelopeConfig, RDTCube, StftConfig, build_rdt,
                      extract_feet_trajectory, extract_torso_trajectory,
                      naka_rushton)
from .experiment import (ExperimentConfig, ExperimentReport, TrialScore,
                         replay, run_experiment, score_trial)
from .gait import (AlignmentError, ConfidenceSeries, GaitEvents,
                   GaitParameterSet, WalkSegConfig, WalkingMask,
                   align_streams, detect_events, estimate_parameters,
                   walking_confidence, walking_mask)
from .pipeline import PipelineConfig, PipelineResult, process_recording
from .preprocess import (ClutterFilterConfig, adaptive_ema_clutter,
                         highpass_slow_time, remove_clutter)
from .stats import (AgreementReport, BlandAltman, accuracy_percent,
                    accuracy_summary, bland_altman, icc_2_1, mann_whitney_u,
                    pair_nearest, pearson_r)
from .synth import (ClutterScatterer, GaitModel, KinematicTruth, NoiseModel,
                    TrialProtocol, TruthRecord, load_truth, save_truth,
                    simulate_walk, swing_velocity_profile, synthesize_fmcw,
                    synthesize_uwb)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
