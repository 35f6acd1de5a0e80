"""Two-phase subspace detection of FM wireless-microphone signals in
band-limited noise."""

from .calibrate import (NoiseProfile, TestStatisticVector, ThresholdTable, build_noise_profile,
                        calibrate_thresholds, compute_test_statistics, table_one, whiten)
from .capture import ingest_capture, write_capture
from .core_dsp import (AutocorrMatrix, PsdEstimate, SampleBuffer, SvdDecomposition, apply_filter,
                       design_bandpass, estimate_autocorr, noise_diagnostics, psd_from_autocorr, svd)
from .detector import DetectionReport, count_signals, detect, locate_peaks, reconstruct_signal_autocorr
from .exceptions import CalibrationError, CaptureError, ConfigError, PreconditionError, WmSenseError
from .harness import BenchConfig, BenchResult, run_bench, train_synthetic
from .synth import LOUD, SILENT, SOFT, SynthConfig, WmMode, gen_colored_noise, gen_wm_signal, mix_at_snr, synthesize

__version__ = "0.1.0"

__all__ = [
    "apply_filter",
    "AutocorrMatrix",
    "BenchConfig",
    "BenchResult",
    "build_noise_profile",
    "calibrate_thresholds",
    "CalibrationError",
    "CaptureError",
    "compute_test_statistics",
    "ConfigError",
    "count_signals",
    "design_bandpass",
    "detect",
    "DetectionReport",
    "estimate_autocorr",
    "gen_colored_noise",
    "gen_wm_signal",
    "ingest_capture",
    "locate_peaks",
    "LOUD",
    "mix_at_snr",
    "noise_diagnostics",
    "NoiseProfile",
    "PreconditionError",
    "psd_from_autocorr",
    "PsdEstimate",
    "reconstruct_signal_autocorr",
    "run_bench",
    "SampleBuffer",
    "SILENT",
    "SOFT",
    "svd",
    "SvdDecomposition",
    "SynthConfig",
    "synthesize",
    "table_one",
    "TestStatisticVector",
    "ThresholdTable",
    "train_synthetic",
    "whiten",
    "WmMode",
    "WmSenseError",
    "write_capture",
]
