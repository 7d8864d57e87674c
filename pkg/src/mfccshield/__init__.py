"""Adversarial MFCC noise for protecting speech from ASR monitoring."""
from .attack import (
    AttackConfig,
    EnvNoiseProfile,
    NoiseSpectrum,
    apply_noise,
    cost,
    estimate_env_level,
    generate_noise,
    gradient_wrt_waveform,
)
from .audio_io import AudioBuffer, read_wav, resample_check, write_wav
from .evaluation import feature_distortion, random_noise_baseline, run_batch, word_error_rate
from .masking import GainMap, MaskParams, build_gain_map
from .mfcc import MfccConfig, analyze, mfcc
from .scheduler import LatencyProfile, plan_iterations, process_stream

__version__ = "0.1.0"
