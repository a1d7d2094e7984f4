"""Backend selection for the delay-recursion kernel.

The compiled Cython extension is used when available; otherwise the
block-vectorized numpy implementation takes over. Set the environment
variable ``DEEPDELAY_PURE_PYTHON=1`` before import to force the fallback
(used by the test suite and the kernel benchmark).
"""

import os

from . import _core_py

NONLIN_SINE = _core_py.NONLIN_SINE
NONLIN_TANH = _core_py.NONLIN_TANH

if os.environ.get("DEEPDELAY_PURE_PYTHON") == "1":
    _impl = _core_py
    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _core_py
        BACKEND = "numpy"

def delay_recursion(drive, init, out, delay, alpha, nonlin):
    """Fill ``out`` with s(t) = f(alpha * s(t - delay) + drive(t)).

    Validating wrapper over the active backend; the compiled kernel runs
    without bounds checks, so shapes are enforced here.
    """
    if delay < 1:
        raise ValueError("delay must be >= 1")
    if drive.ndim != 1 or out.shape != drive.shape:
        raise ValueError("drive and out must be 1-D with equal length")
    if init.shape != (delay,):
        raise ValueError(f"init must hold exactly {delay} pre-history samples")
    if nonlin not in (NONLIN_SINE, NONLIN_TANH):
        raise ValueError(f"unknown nonlinearity code {nonlin}")
    _impl.delay_recursion(drive, init, out, delay, alpha, nonlin)


def backend() -> str:
    """Name of the active kernel backend: 'cython' or 'numpy'."""
    return BACKEND
