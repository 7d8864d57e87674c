"""Six-stage MFCC front end and its reverse-mode gradient.

Stages: pre-emphasis, framing, Hamming window, one-sided power spectrum,
triangular mel filter bank, log + DCT-II. Every intermediate is kept in an
:class:`MfccTrace` because the gradient walks the same chain backwards.

Matrix layouts (rows are frames throughout):

=========  ==============================
frames     n_frames x frame_len
power      n_frames x (n_fft // 2 + 1)
mel        n_frames x n_mels
coeffs     n_frames x n_ceps
=========  ==============================
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from functools import lru_cache

import numpy as np

from . import kernels
from .audio_io import AudioBuffer
from .errors import AudioTooShort, DimensionMismatch, EmptyAudio, InvalidConfig, InvalidFftLength

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class MfccConfig:
    alpha: float = 0.97
    frame_len_ms: float = 25.0
    hop_fraction: float = 0.5
    n_fft: int = 512
    n_mels: int = 26
    n_ceps: int = 13
    mel_fmin: float = 0.0
    mel_fmax: float | None = None  # None means Nyquist

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfig("alpha", f"must lie in (0, 1), got {self.alpha}")
        if not 20.0 <= self.frame_len_ms <= 40.0:
            raise InvalidConfig("frame_len_ms", f"must lie in [20, 40], got {self.frame_len_ms}")
        if not 0.0 < self.hop_fraction <= 1.0:
            raise InvalidConfig("hop_fraction", f"must lie in (0, 1], got {self.hop_fraction}")
        if self.n_fft < 2 or self.n_fft & (self.n_fft - 1):
            raise InvalidFftLength(f"must be a power of two, got {self.n_fft}")
        if not 13 <= self.n_mels <= 26:
            raise InvalidConfig("n_mels", f"must lie in [13, 26], got {self.n_mels}")
        if not 1 <= self.n_ceps <= self.n_mels:
            raise InvalidConfig("n_ceps", f"must lie in [1, n_mels={self.n_mels}], got {self.n_ceps}")
        if self.mel_fmin < 0:
            raise InvalidConfig("mel_fmin", f"must be >= 0, got {self.mel_fmin}")
        if self.mel_fmax is not None and self.mel_fmax <= self.mel_fmin:
            raise InvalidConfig("mel_fmax", "must exceed mel_fmin")

    def frame_length(self, sample_rate: int) -> int:
        return int(round(sample_rate * self.frame_len_ms / 1000.0))

    def hop_length(self, sample_rate: int) -> int:
        return max(1, int(round(self.frame_length(sample_rate) * self.hop_fraction)))

    def fmax(self, sample_rate: int) -> float:
        return sample_rate / 2.0 if self.mel_fmax is None else float(self.mel_fmax)

    def check_rate(self, sample_rate: int) -> None:
        """Invariants that depend on the sample rate."""
        if self.n_fft < self.frame_length(sample_rate):
            raise InvalidFftLength(
                f"{self.n_fft} is shorter than the {self.frame_length(sample_rate)}-sample frame"
            )
        if self.fmax(sample_rate) > sample_rate / 2.0:
            raise InvalidConfig("mel_fmax", f"exceeds Nyquist ({sample_rate / 2.0} Hz)")
        if self.mel_fmin >= self.fmax(sample_rate):
            raise InvalidConfig("mel_fmin", "must be below mel_fmax")

    @classmethod
    def from_dict(cls, data: dict) -> MfccConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(sorted(unknown)[0], "unknown MFCC option")
        return cls(**data)


def _samples(signal) -> np.ndarray:
    if isinstance(signal, AudioBuffer):
        signal = signal.samples
    x = np.ascontiguousarray(signal, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise EmptyAudio("signal has no samples")
    return x


# -- forward stages ---------------------------------------------------------

def pre_emphasize(signal, alpha: float = 0.97) -> np.ndarray:
    """First-order high-pass ``y[s] = x[s] - alpha * x[s-1]``, ``y[0] = x[0]``.

    Returns a plain array: the emphasized signal can leave [-1, 1].
    """
    return kernels.preemphasis(_samples(signal), float(alpha))


def frame_count(length: int, frame_len: int, hop: int) -> int:
    """Frames for ``length`` samples, including the zero-padded tail frame.

    The tail frame is emitted when the samples left uncovered by the last
    full frame amount to at least half a frame.
    """
    if length < frame_len:
        raise AudioTooShort(f"{length} samples is shorter than one {frame_len}-sample frame")
    n_full = (length - frame_len) // hop + 1
    uncovered = length - ((n_full - 1) * hop + frame_len)
    return n_full + (1 if 2 * uncovered >= frame_len and uncovered > 0 else 0)


def frame_signal(signal, sample_rate: int, config: MfccConfig) -> np.ndarray:
    x = _samples(signal)
    fl = config.frame_length(sample_rate)
    hop = config.hop_length(sample_rate)
    n = frame_count(x.size, fl, hop)
    return kernels.frame_window(x, n, hop, np.ones(fl))


@lru_cache(maxsize=32)
def hamming(length: int) -> np.ndarray:
    if length == 1:
        w = np.ones(1)
    else:
        w = 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(length) / (length - 1))
        # mirror the first half so w[n] == w[N-1-n] holds bit for bit
        w[length - (length // 2):] = w[: length // 2][::-1]
    w.flags.writeable = False
    return w


def apply_window(frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    return frames * hamming(frames.shape[1])


def power_spectrum(frames: np.ndarray, n_fft: int) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if n_fft < 2 or n_fft & (n_fft - 1):
        raise InvalidFftLength(f"must be a power of two, got {n_fft}")
    if n_fft < frames.shape[1]:
        raise InvalidFftLength(f"{n_fft} is shorter than the {frames.shape[1]}-sample frame")
    spec = np.fft.rfft(frames, n_fft, axis=1)
    return (spec.real**2 + spec.imag**2) / n_fft


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=32)
def _filter_bank(n_mels, n_fft, sample_rate, fmin, fmax):
    mels = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    bins = np.floor((n_fft + 1) * mel_to_hz(mels) / sample_rate).astype(int)
    bins = np.clip(bins, 0, n_fft // 2)
    bank = np.zeros((n_mels, n_fft // 2 + 1))
    for j in range(n_mels):
        left, center, right = bins[j], bins[j + 1], bins[j + 2]
        for k in range(left, center):
            bank[j, k] = (k - left) / (center - left)
        for k in range(center, right):
            bank[j, k] = (right - k) / (right - center)
        bank[j, center] = 1.0
    bank.flags.writeable = False
    return bank


def filter_bank(config: MfccConfig, sample_rate: int) -> np.ndarray:
    """Triangular filters, ``n_mels x (n_fft // 2 + 1)``, each peaking at 1.0."""
    return _filter_bank(
        config.n_mels, config.n_fft, int(sample_rate),
        float(config.mel_fmin), config.fmax(sample_rate),
    )


def mel_filter_bank(power: np.ndarray, config: MfccConfig, sample_rate: int) -> np.ndarray:
    power = np.asarray(power, dtype=np.float64)
    bank = filter_bank(config, sample_rate)
    if power.ndim != 2 or power.shape[1] != bank.shape[1]:
        raise DimensionMismatch(
            f"power spectrum has {power.shape[-1]} bins, filter bank expects {bank.shape[1]}"
        )
    return power @ bank.T


@lru_cache(maxsize=32)
def dct_matrix(n_ceps: int, n_mels: int) -> np.ndarray:
    i = np.arange(n_ceps)[:, None]
    l = np.arange(n_mels)[None, :]
    mat = np.cos(np.pi * i * (l + 0.5) / n_mels)
    mat.flags.writeable = False
    return mat


def dct_cepstrum(mel: np.ndarray, n_ceps: int) -> np.ndarray:
    """Unnormalized DCT-II of the floored log mel power."""
    mel = np.asarray(mel, dtype=np.float64)
    if n_ceps > mel.shape[1]:
        raise DimensionMismatch(f"n_ceps={n_ceps} exceeds {mel.shape[1]} mel bands")
    return np.log(mel + LOG_FLOOR) @ dct_matrix(n_ceps, mel.shape[1]).T


# -- composed pipeline ------------------------------------------------------

@dataclass
class MfccTrace:
    """All intermediates of one forward pass."""

    config: MfccConfig
    sample_rate: int
    length: int
    hop: int
    emphasized: np.ndarray
    windowed: np.ndarray
    spectrum: np.ndarray  # complex rfft of the windowed frames
    power: np.ndarray
    mel: np.ndarray
    coeffs: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.coeffs.shape[0]

    def frames(self) -> np.ndarray:
        """Framed emphasized signal before windowing."""
        fl = self.windowed.shape[1]
        return kernels.frame_window(self.emphasized, self.n_frames, self.hop, np.ones(fl))

    def stages(self) -> dict[str, np.ndarray]:
        return {
            "emphasized": self.emphasized[None, :],
            "frames": self.frames(),
            "windowed": self.windowed,
            "power": self.power,
            "mel": self.mel,
            "cepstra": self.coeffs,
        }


def analyze(signal, sample_rate: int, config: MfccConfig) -> MfccTrace:
    """Run the full pipeline, keeping every stage."""
    x = _samples(signal)
    config.check_rate(sample_rate)
    fl = config.frame_length(sample_rate)
    hop = config.hop_length(sample_rate)
    n_frames = frame_count(x.size, fl, hop)

    emphasized = kernels.preemphasis(x, config.alpha)
    windowed = kernels.frame_window(emphasized, n_frames, hop, hamming(fl))
    spectrum = np.fft.rfft(windowed, config.n_fft, axis=1)
    power = (spectrum.real**2 + spectrum.imag**2) / config.n_fft
    mel = power @ filter_bank(config, sample_rate).T
    coeffs = np.log(mel + LOG_FLOOR) @ dct_matrix(config.n_ceps, config.n_mels).T
    return MfccTrace(config, sample_rate, x.size, hop, emphasized, windowed, spectrum, power, mel, coeffs)


def mfcc(buffer: AudioBuffer, config: MfccConfig | None = None) -> np.ndarray:
    config = config or MfccConfig()
    return analyze(buffer.samples, buffer.sample_rate, config).coeffs


# -- reverse mode -----------------------------------------------------------

def backward(trace: MfccTrace, coeff_grad: np.ndarray) -> np.ndarray:
    """Pull a cotangent on the cepstra back to the input waveform."""
    cfg = trace.config
    if coeff_grad.shape != trace.coeffs.shape:
        raise DimensionMismatch(f"cotangent {coeff_grad.shape} vs cepstra {trace.coeffs.shape}")
    log_grad = coeff_grad @ dct_matrix(cfg.n_ceps, cfg.n_mels)
    mel_grad = log_grad / (trace.mel + LOG_FLOOR)
    power_grad = mel_grad @ filter_bank(cfg, trace.sample_rate)

    # dP_k/dw_m = (2/N) Re(conj(Z_k) e^{-2 pi i k m / N}); irfft doubles the
    # interior bins, so halve them to keep DC and Nyquist counted once.
    weighted = power_grad * trace.spectrum
    weighted[:, 1:-1] *= 0.5
    fl = trace.windowed.shape[1]
    windowed_grad = 2.0 * np.fft.irfft(weighted, cfg.n_fft, axis=1)[:, :fl]

    w = hamming(fl)
    emph_grad = kernels.overlap_add(np.ascontiguousarray(windowed_grad), trace.hop, trace.length, w)
    return kernels.preemphasis_adjoint(emph_grad, cfg.alpha)
