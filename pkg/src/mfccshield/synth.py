"""Deterministic speech-like test signals.

Voiced syllables are harmonic series shaped by three formant resonances,
fricatives are band-limited noise bursts, and everything sits on a low
background floor so no frame is digitally silent.
"""
from __future__ import annotations

import numpy as np

from .audio_io import CANONICAL_RATE, AudioBuffer


def _formant_gain(freqs, formants, bandwidths):
    gain = np.zeros_like(freqs)
    for f, bw in zip(formants, bandwidths):
        gain += np.exp(-0.5 * ((freqs - f) / bw) ** 2)
    return gain + 0.02


def _voiced(rng, n, sr):
    t = np.arange(n) / sr
    f0 = rng.uniform(90, 240) * (1.0 + rng.uniform(-0.15, 0.15) * t / max(t[-1], 1e-9))
    phase = 2 * np.pi * np.cumsum(f0) / sr
    formants = (rng.uniform(300, 850), rng.uniform(900, 2300), rng.uniform(2400, 3200))
    bandwidths = (80.0, 120.0, 180.0)
    out = np.zeros(n)
    mean_f0 = float(np.mean(f0))
    for h in range(1, int(4500 // mean_f0) + 1):
        out += _formant_gain(np.array([h * mean_f0]), formants, bandwidths)[0] * np.sin(h * phase) / h**0.3
    env = np.sin(np.pi * np.arange(n) / n) ** 0.6
    return out * env / (np.max(np.abs(out)) + 1e-12)


def _fricative(rng, n, sr):
    noise = rng.standard_normal(n)
    spec = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    lo = rng.uniform(2500, 4000)
    spec *= (freqs >= lo) & (freqs <= min(sr / 2 - 200, lo + 3500))
    burst = np.fft.irfft(spec, n)
    burst *= np.hanning(n)
    return burst / (np.max(np.abs(burst)) + 1e-12)


def speech_like(duration: float = 1.0, sample_rate: int = CANONICAL_RATE, seed: int = 0,
                floor_rms: float = 1e-3) -> AudioBuffer:
    """A reproducible speech-like clip of ``duration`` seconds."""
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    x = floor_rms * rng.standard_normal(n)
    pos = int(rng.integers(0, max(1, n // 10)))
    while pos < n:
        if rng.random() < 0.25:
            seg = int(rng.uniform(0.04, 0.12) * sample_rate)
            piece = rng.uniform(0.02, 0.08) * _fricative(rng, seg, sample_rate)
        else:
            seg = int(rng.uniform(0.08, 0.25) * sample_rate)
            piece = rng.uniform(0.1, 0.5) * _voiced(rng, seg, sample_rate)
        seg = min(seg, n - pos)
        x[pos : pos + seg] += piece[:seg]
        pos += seg + int(rng.uniform(0.01, 0.12) * sample_rate)
    return AudioBuffer.clipped(x, sample_rate)


def speech_clips(count: int, duration: float = 1.0, sample_rate: int = CANONICAL_RATE,
                 seed: int = 0) -> list[AudioBuffer]:
    return [speech_like(duration, sample_rate, seed * 100003 + i) for i in range(count)]
