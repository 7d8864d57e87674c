"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the numpy
fallback. Set ``MFCCSHIELD_PURE_PYTHON=1`` to force the fallback at import,
or call :func:`use_backend` at runtime. Callers must look kernels up as
``kernels.<name>`` at call time so a switch takes effect.
"""
import os
from contextlib import contextmanager

from . import _pykernels

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

NAMES = ("preemphasis", "preemphasis_adjoint", "frame_window", "overlap_add", "edit_distance")
BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

BACKEND = ""


def use_backend(name: str) -> None:
    global BACKEND
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    impl = BACKENDS[name]
    for fn in NAMES:
        globals()[fn] = getattr(impl, fn)
    BACKEND = name


@contextmanager
def backend(name: str):
    previous = BACKEND
    use_backend(name)
    try:
        yield
    finally:
        use_backend(previous)


use_backend("python" if os.environ.get("MFCCSHIELD_PURE_PYTHON") or _ckernels is None else "cython")
