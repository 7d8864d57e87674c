"""Straight-line MFCC written from the formulas with explicit loops.

Shares no code with the package: its own DFT (a cosine/sine matrix, no FFT),
window, filter bank and DCT.
"""
import math

import numpy as np


def mel(f):
    return 2595.0 * math.log10(1.0 + f / 700.0)


def inv_mel(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def triangles(n_filters, n_fft, sr, fmin, fmax):
    lo, hi = mel(fmin), mel(fmax)
    edges = []
    for i in range(n_filters + 2):
        hz = inv_mel(lo + (hi - lo) * i / (n_filters + 1))
        edges.append(min(int(math.floor((n_fft + 1) * hz / sr)), n_fft // 2))
    bank = [[0.0] * (n_fft // 2 + 1) for _ in range(n_filters)]
    for j in range(n_filters):
        a, b, c = edges[j], edges[j + 1], edges[j + 2]
        for k in range(n_fft // 2 + 1):
            if a <= k < b:
                bank[j][k] = (k - a) / (b - a)
            elif b < k < c:
                bank[j][k] = (c - k) / (c - b)
            elif k == b:
                bank[j][k] = 1.0
    return np.array(bank)


class ReferenceMfcc:
    def __init__(self, sr=16000, alpha=0.97, frame_ms=25.0, hop_fraction=0.5, n_fft=512,
                 n_filters=26, n_ceps=13, fmin=0.0, fmax=None):
        self.sr, self.alpha, self.n_fft = sr, alpha, n_fft
        self.frame = int(round(sr * frame_ms / 1000.0))
        self.hop = max(1, int(round(self.frame * hop_fraction)))
        self.n_ceps, self.n_filters = n_ceps, n_filters
        n = np.arange(self.frame)
        k = np.arange(n_fft // 2 + 1)
        angle = 2.0 * np.pi * np.outer(n, k) / n_fft
        self.cos_basis, self.sin_basis = np.cos(angle), np.sin(angle)
        self.window = np.array([0.54 - 0.46 * math.cos(2 * math.pi * i / (self.frame - 1))
                                for i in range(self.frame)])
        self.bank = triangles(n_filters, n_fft, sr, fmin, sr / 2 if fmax is None else fmax)
        self.dct = np.array([[math.cos(math.pi * i * (l + 0.5) / n_filters) for l in range(n_filters)]
                             for i in range(n_ceps)])

    def n_frames(self, length):
        count = 0
        start = 0
        while start + self.frame <= length:
            count += 1
            start += self.hop
        last_end = (count - 1) * self.hop + self.frame
        if 2 * (length - last_end) >= self.frame and length > last_end:
            count += 1
        return count

    def __call__(self, x):
        x = [float(v) for v in x]
        emph = [x[0]] + [x[s] - self.alpha * x[s - 1] for s in range(1, len(x))]
        rows = []
        for n in range(self.n_frames(len(x))):
            frame = np.zeros(self.frame)
            seg = emph[n * self.hop : n * self.hop + self.frame]
            frame[: len(seg)] = seg
            w = frame * self.window
            re = w @ self.cos_basis
            im = w @ self.sin_basis
            power = (re * re + im * im) / self.n_fft
            melp = self.bank @ power
            rows.append(self.dct @ np.log(melp + 1e-10))
        return np.array(rows)
