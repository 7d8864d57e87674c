"""Iterative gradient noise through the MFCC chain.

Each iteration differentiates the cepstral cost with respect to the input
waveform, normalizes the gradient to unit peak amplitude, optionally shapes
it with a psychoacoustic gain map, takes a ``step_size`` step, and clamps
the accumulated noise to ``+-t_adv_scale``.

Two objectives are supported:

``away-from-clean`` (default)
    ascend ``mean((f(x + env + d) - f(x))**2)``, pushing the cepstra away
    from those of the clean signal. The clean point is a stationary point
    of this cost, so when the gradient vanishes there the step follows the
    zero-target cost instead.
``toward-target``
    descend ``mean(f(x + env + d)**2)``, driving the cepstra to zero.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import kernels
from .audio_io import AudioBuffer
from .errors import DimensionMismatch, EmptyAudio, EnvNoiseTooLoud, InvalidConfig
from .masking import GainMap, MaskParams, build_gain_map
from .mfcc import MfccConfig, MfccTrace, analyze, backward, frame_count, hamming

ENV_LIMIT_DB = 81.0
DB_OFFSET = 94.0  # full-scale RMS maps to 94 dB
MODES = ("away-from-clean", "toward-target")


@dataclass(frozen=True)
class EnvNoiseProfile:
    level_db: float | None = None
    waveform: AudioBuffer | None = None

    def __post_init__(self):
        if self.level_db is None and self.waveform is None:
            raise InvalidConfig("env_profile", "needs a level or a waveform")
        if self.level_db is not None and not 0.0 <= self.level_db <= 120.0:
            raise InvalidConfig("level_db", f"must lie in [0, 120], got {self.level_db}")

    @property
    def level(self) -> float:
        if self.level_db is not None:
            return float(self.level_db)
        return estimate_env_level(self.waveform)


@dataclass(frozen=True)
class AttackConfig:
    iterations: int = 10
    step_size: float = 1e-3
    t_adv_scale: float = 0.05
    use_masking: bool = False
    mode: str = "away-from-clean"
    env_profile: EnvNoiseProfile | None = None
    mask_params: MaskParams = field(default_factory=MaskParams)

    def __post_init__(self):
        if isinstance(self.iterations, bool) or int(self.iterations) != self.iterations or self.iterations < 1:
            raise InvalidConfig("iterations", f"must be an integer >= 1, got {self.iterations}")
        if not self.step_size > 0:
            raise InvalidConfig("step_size", f"must be > 0, got {self.step_size}")
        if not 0.0 < self.t_adv_scale < 1.0:
            raise InvalidConfig("t_adv_scale", f"must lie in (0, 1), got {self.t_adv_scale}")
        if self.mode not in MODES:
            raise InvalidConfig("mode", f"must be one of {MODES}, got {self.mode!r}")

    @classmethod
    def from_dict(cls, data: dict) -> AttackConfig:
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise InvalidConfig(sorted(unknown)[0], "unknown attack option")
        return cls(**data)


@dataclass
class NoiseSpectrum:
    """Result of :func:`generate_noise`.

    ``spectrum`` holds the rfft of each analysis frame of ``waveform``;
    ``costs[i]`` is the cost after iteration ``i + 1`` and ``initial_cost``
    the cost with zero noise.
    """

    waveform: np.ndarray
    spectrum: np.ndarray
    sample_rate: int
    costs: list[float]
    iteration_ms: list[float]
    initial_cost: float
    best_iteration: int
    gain_map: GainMap | None = None

    @property
    def iterations(self) -> int:
        return len(self.costs)

    @property
    def final_cost(self) -> float:
        return self.costs[self.best_iteration - 1] if self.best_iteration else self.initial_cost

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.waveform)))


# -- cost and gradient ------------------------------------------------------

def cost(features: np.ndarray, target: np.ndarray) -> float:
    features = np.asarray(features, dtype=np.float64)
    target = np.broadcast_to(np.asarray(target, dtype=np.float64), features.shape) \
        if np.ndim(target) == 0 else np.asarray(target, dtype=np.float64)
    if features.shape != target.shape:
        raise DimensionMismatch(f"features {features.shape} vs target {target.shape}")
    diff = features - target
    return float(np.mean(diff * diff))


def value_and_gradient(signal, sample_rate: int, config: MfccConfig, target=0.0,
                       trace: MfccTrace | None = None) -> tuple[float, np.ndarray, MfccTrace]:
    """Cost against ``target`` and its gradient with respect to the waveform."""
    if trace is None:
        trace = analyze(signal, sample_rate, config)
    diff = trace.coeffs - target
    value = float(np.mean(diff * diff))
    grad = backward(trace, (2.0 / diff.size) * diff)
    return value, grad, trace


def gradient_wrt_waveform(buffer, config: MfccConfig | None = None, target=0.0,
                          sample_rate: int | None = None) -> np.ndarray:
    config = config or MfccConfig()
    if isinstance(buffer, AudioBuffer):
        sample_rate, signal = buffer.sample_rate, buffer.samples
    else:
        signal = buffer
    return value_and_gradient(signal, sample_rate, config, target)[1]


# -- environment ------------------------------------------------------------

def estimate_env_level(env) -> float:
    """Mapped environmental level, ``20 log10(rms) + 94`` floored at 0 dB."""
    x = env.samples if isinstance(env, AudioBuffer) else np.asarray(env, dtype=np.float64)
    if x.size == 0:
        raise EmptyAudio("environment recording has no samples")
    rms = math.sqrt(float(np.mean(x * x)))
    if rms == 0.0:
        return 0.0
    return max(0.0, 20.0 * math.log10(rms) + DB_OFFSET)


def fit_length(noise: np.ndarray, length: int) -> np.ndarray:
    """Tile or truncate ``noise`` to ``length`` samples."""
    reps = -(-length // noise.size)
    return np.tile(noise, reps)[:length]


def working_signal(buffer: AudioBuffer, env: EnvNoiseProfile | None) -> np.ndarray:
    """Signal the gradient is taken at: clean speech plus environment noise."""
    if env is None:
        return buffer.samples.copy()
    level = env.level
    if level > ENV_LIMIT_DB:
        raise EnvNoiseTooLoud(level, ENV_LIMIT_DB)
    if env.waveform is None:
        return buffer.samples.copy()
    return np.clip(buffer.samples + fit_length(env.waveform.samples, len(buffer)), -1.0, 1.0)


# -- spectral shaping -------------------------------------------------------

def analysis_frames(signal: np.ndarray, sample_rate: int, config: MfccConfig) -> np.ndarray:
    """Rectangular frames on the MFCC grid."""
    fl = config.frame_length(sample_rate)
    hop = config.hop_length(sample_rate)
    n = frame_count(signal.size, fl, hop)
    return kernels.frame_window(np.ascontiguousarray(signal, dtype=np.float64), n, hop, np.ones(fl))


def noise_spectrum(signal: np.ndarray, sample_rate: int, config: MfccConfig) -> np.ndarray:
    return np.fft.rfft(analysis_frames(signal, sample_rate, config), config.n_fft, axis=1)


def shape_noise(signal: np.ndarray, gains: np.ndarray, sample_rate: int, config: MfccConfig) -> np.ndarray:
    """Apply per-frame, per-bin gains and resynthesize by weighted overlap-add.

    Unit gains reproduce the input exactly. Samples no frame covers pass
    through unchanged.
    """
    signal = np.ascontiguousarray(signal, dtype=np.float64)
    fl = config.frame_length(sample_rate)
    hop = config.hop_length(sample_rate)
    spec = noise_spectrum(signal, sample_rate, config)
    if spec.shape != gains.shape:
        raise DimensionMismatch(f"gain map {gains.shape} vs noise spectrum {spec.shape}")
    frames = np.fft.irfft(spec * gains, config.n_fft, axis=1)[:, :fl]
    weight = hamming(fl)
    num = kernels.overlap_add(np.ascontiguousarray(frames), hop, signal.size, weight)
    den = kernels.overlap_add(np.ones((spec.shape[0], fl)), hop, signal.size, weight)
    covered = den > 0
    out = signal.copy()
    out[covered] = num[covered] / den[covered]
    return out


# -- generation -------------------------------------------------------------

def generate_noise(buffer: AudioBuffer, mfcc_cfg: MfccConfig | None = None,
                   attack_cfg: AttackConfig | None = None, mask: GainMap | None = None,
                   clean_features: np.ndarray | None = None) -> NoiseSpectrum:
    """Iterated fast-gradient noise for ``buffer``.

    The returned noise is the best iterate (zero noise included), so the
    cost never moves the wrong way relative to the unperturbed signal.
    """
    mfcc_cfg = mfcc_cfg or MfccConfig()
    attack_cfg = attack_cfg or AttackConfig()
    sr = buffer.sample_rate
    x_work = working_signal(buffer, attack_cfg.env_profile)
    away = attack_cfg.mode == "away-from-clean"

    trace = analyze(x_work, sr, mfcc_cfg)
    if away:
        if clean_features is None:
            clean_features = trace.coeffs if attack_cfg.env_profile is None \
                else analyze(buffer.samples, sr, mfcc_cfg).coeffs
        target = clean_features
    else:
        target = 0.0

    gains = None
    if mask is not None:
        gains = mask.gains
    elif attack_cfg.use_masking:
        mask = build_gain_map(trace.power, sr, attack_cfg.mask_params)
        gains = mask.gains

    sign = 1.0 if away else -1.0
    limit = attack_cfg.t_adv_scale
    delta = np.zeros(len(buffer))
    best_delta = delta
    costs, times = [], []
    value, grad, trace = value_and_gradient(x_work, sr, mfcc_cfg, target, trace)
    initial = best_value = value
    best_iter = 0

    for it in range(1, attack_cfg.iterations + 1):
        t0 = time.perf_counter()
        if away and not grad.any():
            grad = backward(trace, (2.0 / trace.coeffs.size) * trace.coeffs)
        step = sign * grad
        if gains is not None:
            step = shape_noise(step, gains, sr, mfcc_cfg)
        peak = np.max(np.abs(step))
        if peak > 0:
            delta = delta + (attack_cfg.step_size / peak) * step
            if gains is not None:
                delta = shape_noise(delta, gains, sr, mfcc_cfg)
            delta = np.clip(delta, -limit, limit)
        value, grad, trace = value_and_gradient(x_work + delta, sr, mfcc_cfg, target)
        costs.append(value)
        if (value > best_value) if away else (value < best_value):
            best_value, best_delta, best_iter = value, delta, it
        times.append((time.perf_counter() - t0) * 1000.0)

    return NoiseSpectrum(
        waveform=best_delta,
        spectrum=noise_spectrum(best_delta, sr, mfcc_cfg),
        sample_rate=sr,
        costs=costs,
        iteration_ms=times,
        initial_cost=initial,
        best_iteration=best_iter,
        gain_map=mask,
    )


def apply_noise(buffer: AudioBuffer, noise) -> AudioBuffer:
    """Adversarial example ``clamp(x + noise)``."""
    wave = noise.waveform if isinstance(noise, NoiseSpectrum) else np.asarray(noise, dtype=np.float64)
    if wave.shape != buffer.samples.shape:
        raise DimensionMismatch(f"noise has {wave.size} samples, audio has {len(buffer)}")
    return AudioBuffer(np.clip(buffer.samples + wave, -1.0, 1.0), buffer.sample_rate)


def iterations_to_reach(buffer: AudioBuffer, threshold: float, mfcc_cfg: MfccConfig | None = None,
                        attack_cfg: AttackConfig | None = None) -> int | None:
    """First iteration count whose cost reaches ``threshold``; 0 if already there.

    ``None`` when ``attack_cfg.iterations`` steps are not enough.
    """
    result = generate_noise(buffer, mfcc_cfg, attack_cfg)
    if result.initial_cost >= threshold:
        return 0
    for i, value in enumerate(result.costs, start=1):
        if value >= threshold:
            return i
    return None
