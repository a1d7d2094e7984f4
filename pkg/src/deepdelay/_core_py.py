"""Pure-numpy fallback for the flat-time delay recursion.

s(t) depends only on s(t - delay), so consecutive blocks of ``delay`` steps
are independent given the previous block and can be evaluated as whole-array
operations. Element-wise this performs the exact same float64 arithmetic
(multiply, add, sin/tanh) as the compiled kernel, so the two backends agree
bit-for-bit with the sine nonlinearity (numpy's float64 sin is libm's).
"""

import numpy as np

NONLIN_SINE = 0
NONLIN_TANH = 1


def delay_recursion(drive, init, out, delay, alpha, nonlin):
    """Fill ``out`` with s(t) = f(alpha * s(t - delay) + drive(t)).

    ``init`` holds the pre-history s(-delay) .. s(-1).
    """
    f = np.sin if nonlin == NONLIN_SINE else np.tanh
    n = drive.shape[0]
    ext = np.empty(delay + n)
    ext[:delay] = init
    for start in range(0, n, delay):
        stop = min(start + delay, n)
        np.multiply(ext[start:stop], alpha, out=ext[delay + start:delay + stop])
        ext[delay + start:delay + stop] += drive[start:stop]
        f(ext[delay + start:delay + stop], out=ext[delay + start:delay + stop])
    out[:] = ext[delay:]
