"""16-bit PCM WAV input/output and the in-memory waveform type."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    EmptyAudio,
    IoFailure,
    MalformedWav,
    SampleRateMismatch,
    UnsupportedEncoding,
    ValidationError,
)

CANONICAL_RATE = 16000
FULL_SCALE = 32768.0

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE
# first two bytes of KSDATAFORMAT_SUBTYPE_PCM
_PCM_SUBFORMAT = b"\x01\x00"


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono waveform with samples normalized to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = CANONICAL_RATE

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64).reshape(-1)
        if samples.size == 0:
            raise EmptyAudio("audio buffer has no samples")
        if self.sample_rate <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("samples must be finite")
        if np.max(np.abs(samples)) > 1.0:
            raise ValidationError("samples must lie in [-1, 1]")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @classmethod
    def clipped(cls, samples, sample_rate=CANONICAL_RATE) -> AudioBuffer:
        """Build a buffer, clamping out-of-range samples to full scale."""
        return cls(np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0), sample_rate)


def _chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise MalformedWav(f"chunk {cid!r} declares {size} bytes, {len(body)} present")
        yield cid, body
        pos += 8 + size + (size & 1)
    if pos < len(data) and data[pos:].strip(b"\x00"):
        raise MalformedWav("trailing bytes do not form a chunk header")


def read_wav(path) -> AudioBuffer:
    """Read a 16-bit PCM WAV file, downmixing to mono by channel mean."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedWav("missing RIFF/WAVE header")
    riff_size = struct.unpack_from("<I", data, 4)[0]
    if riff_size + 8 > len(data):
        raise MalformedWav(f"RIFF size {riff_size} exceeds file length {len(data)}")
    data = data[: riff_size + 8]

    fmt = None
    pcm = None
    for cid, body in _chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise MalformedWav("fmt chunk shorter than 16 bytes")
            fmt = body
        elif cid == b"data":
            pcm = body
            break
    if fmt is None:
        raise MalformedWav("no fmt chunk before data")
    if pcm is None:
        raise MalformedWav("no data chunk")

    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt)
    if tag == _WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 40 or fmt[24:26] != _PCM_SUBFORMAT:
            raise UnsupportedEncoding("extensible WAV with non-PCM subformat")
    elif tag != _WAVE_FORMAT_PCM:
        raise UnsupportedEncoding(f"format tag 0x{tag:04x} is not PCM")
    if bits != 16:
        raise UnsupportedEncoding(f"{bits}-bit samples; only 16-bit is supported")
    if channels < 1 or block_align != 2 * channels:
        raise MalformedWav(f"inconsistent fmt: {channels} channels, block align {block_align}")
    if rate == 0:
        raise MalformedWav("sample rate is zero")

    n_frames = len(pcm) // block_align
    if n_frames == 0:
        raise EmptyAudio(f"{path} contains no samples")
    ints = np.frombuffer(pcm, dtype="<i2", count=n_frames * channels)
    frames = ints.reshape(n_frames, channels).astype(np.float64) / FULL_SCALE
    samples = frames[:, 0] if channels == 1 else frames.mean(axis=1)
    return AudioBuffer(samples, rate)


def quantize(samples) -> np.ndarray:
    """Round to nearest 16-bit code, clamping at full scale."""
    scaled = np.rint(np.asarray(samples, dtype=np.float64) * FULL_SCALE)
    return np.clip(scaled, -32768, 32767).astype("<i2")


def encode_wav(buffer: AudioBuffer) -> bytes:
    """Canonical 44-byte-header mono 16-bit PCM WAV bytes."""
    pcm = quantize(buffer.samples).tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(pcm), b"WAVE",
        b"fmt ", 16, _WAVE_FORMAT_PCM, 1, buffer.sample_rate,
        buffer.sample_rate * 2, 2, 16,
        b"data", len(pcm),
    )
    return header + pcm


def write_wav(buffer: AudioBuffer, path) -> None:
    data = encode_wav(buffer)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def resample_check(buffer: AudioBuffer, required_rate: int = CANONICAL_RATE) -> AudioBuffer:
    if buffer.sample_rate != required_rate:
        raise SampleRateMismatch(buffer.sample_rate, required_rate)
    return buffer
