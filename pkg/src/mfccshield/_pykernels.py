"""Pure numpy versions of the compiled kernels in ``_ckernels.pyx``."""
import numpy as np


def preemphasis(x, alpha):
    x = np.asarray(x, dtype=np.float64)
    y = np.empty_like(x)
    if x.size:
        y[0] = x[0]
        y[1:] = x[1:] - alpha * x[:-1]
    return y


def preemphasis_adjoint(g, alpha):
    g = np.asarray(g, dtype=np.float64)
    gx = g.copy()
    gx[:-1] -= alpha * g[1:]
    return gx


def frame_window(y, n_frames, hop, window):
    y = np.asarray(y, dtype=np.float64)
    fl = window.shape[0]
    need = (n_frames - 1) * hop + fl
    if need > y.size:
        y = np.concatenate([y, np.zeros(need - y.size)])
    idx = np.arange(n_frames)[:, None] * hop + np.arange(fl)[None, :]
    return y[idx] * window


def overlap_add(frames, hop, length, weight):
    out = np.zeros(length, dtype=np.float64)
    fl = frames.shape[1]
    for i, frame in enumerate(frames):
        start = i * hop
        if start >= length:
            break
        stop = min(fl, length - start)
        out[start : start + stop] += frame[:stop] * weight[:stop]
    return out


def edit_distance(ref, hyp):
    ref = np.asarray(ref, dtype=np.int64)
    hyp = np.asarray(hyp, dtype=np.int64)
    m = hyp.size
    offsets = np.arange(m + 1)
    prev = offsets.copy()
    for i, token in enumerate(ref, start=1):
        cand = np.empty(m + 1, dtype=np.int64)
        cand[0] = i
        cand[1:] = np.minimum(prev[:-1] + (hyp != token), prev[1:] + 1)
        # insertion chain cur[j] = min(cand[j], cur[j-1] + 1) as a running min
        prev = np.minimum.accumulate(cand - offsets) + offsets
    return int(prev[m])
