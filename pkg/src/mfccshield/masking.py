"""Per-bin gain maps that keep adversarial energy away from sensitive hearing.

Two effects are combined: a fixed attenuation inside the 200 Hz to 5 kHz
band where hearing is most acute, and a boost around the loudest
components of each frame, whose own energy masks nearby noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import DimensionMismatch, InvalidConfig


@dataclass(frozen=True)
class MaskParams:
    sensitive_lo: float = 200.0
    sensitive_hi: float = 5000.0
    in_band_gain: float = 0.2
    top_percent: float = 10.0
    neighborhood_bins: int = 3
    boost_gain: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.in_band_gain <= self.boost_gain <= 1.0:
            raise InvalidConfig("in_band_gain", "need 0 <= in_band_gain <= boost_gain <= 1")
        if not 0.0 < self.top_percent <= 100.0:
            raise InvalidConfig("top_percent", f"must lie in (0, 100], got {self.top_percent}")
        if self.sensitive_lo >= self.sensitive_hi:
            raise InvalidConfig("sensitive_lo", "must be below sensitive_hi")
        if self.neighborhood_bins < 0:
            raise InvalidConfig("neighborhood_bins", "must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> MaskParams:
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise InvalidConfig(sorted(unknown)[0], "unknown mask option")
        return cls(**data)


@dataclass
class GainMap:
    gains: np.ndarray  # n_frames x n_bins, values in [0, 1]
    params: MaskParams = field(default_factory=MaskParams)

    @property
    def shape(self):
        return self.gains.shape


def bin_frequencies(n_bins: int, sample_rate: int) -> np.ndarray:
    n_fft = 2 * (n_bins - 1)
    return np.arange(n_bins) * sample_rate / n_fft


def in_band(n_bins: int, sample_rate: int, params: MaskParams) -> np.ndarray:
    freqs = bin_frequencies(n_bins, sample_rate)
    return (freqs >= params.sensitive_lo) & (freqs <= params.sensitive_hi)


def sensitivity_mask(n_frames: int, n_bins: int, sample_rate: int,
                     params: MaskParams | None = None) -> GainMap:
    params = params or MaskParams()
    row = np.where(in_band(n_bins, sample_rate, params), params.in_band_gain, 1.0)
    return GainMap(np.tile(row, (n_frames, 1)), params)


def seed_count(n_bins: int, top_percent: float) -> int:
    # round before ceil so 10% of 257 gives 26, not 27 from float noise
    return max(1, math.ceil(round(n_bins * top_percent / 100.0, 9)))


def loud_bins(power: np.ndarray, top_percent: float) -> np.ndarray:
    """Boolean map of each frame's top ``top_percent`` bins by power.

    Ties are broken toward lower bin indices.
    """
    power = np.asarray(power, dtype=np.float64)
    k = seed_count(power.shape[1], top_percent)
    order = np.argsort(-power, axis=1, kind="stable")[:, :k]
    seeds = np.zeros(power.shape, dtype=bool)
    np.put_along_axis(seeds, order, True, axis=1)
    return seeds


def loudness_mask(power: np.ndarray, params: MaskParams | None = None) -> GainMap:
    params = params or MaskParams()
    seeds = loud_bins(power, params.top_percent)
    dilated = seeds.copy()
    for shift in range(1, params.neighborhood_bins + 1):
        dilated[:, shift:] |= seeds[:, :-shift]
        dilated[:, :-shift] |= seeds[:, shift:]
    return GainMap(np.where(dilated, params.boost_gain, 0.0), params)


def combine_masks(sensitivity: GainMap, loudness: GainMap) -> GainMap:
    if sensitivity.shape != loudness.shape:
        raise DimensionMismatch(f"mask shapes differ: {sensitivity.shape} vs {loudness.shape}")
    return GainMap(np.maximum(sensitivity.gains, loudness.gains), sensitivity.params)


def build_gain_map(power: np.ndarray, sample_rate: int, params: MaskParams | None = None) -> GainMap:
    """Combined mask for a power spectrogram."""
    params = params or MaskParams()
    n_frames, n_bins = power.shape
    return combine_masks(
        sensitivity_mask(n_frames, n_bins, sample_rate, params),
        loudness_mask(power, params),
    )


def attenuated_cells(power: np.ndarray, sample_rate: int, params: MaskParams | None = None) -> np.ndarray:
    """Cells inside the sensitive band that are not in any boost neighborhood."""
    params = params or MaskParams()
    band = in_band(power.shape[1], sample_rate, params)[None, :]
    return band & (loudness_mask(power, params).gains == 0.0)
