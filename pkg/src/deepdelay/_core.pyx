# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel for the flat-time delay recursion.

The recursion s(t) = f(alpha * s(t - D) + drive(t)) is inherently serial,
so it is the one loop in the package that cannot be expressed as whole-array
numpy operations without blocking tricks. This module is optional; see
``deepdelay._core_py`` for the pure-numpy fallback with identical semantics.
"""

from libc.math cimport sin, tanh

NONLIN_SINE = 0
NONLIN_TANH = 1


def delay_recursion(double[::1] drive, double[::1] init,
                    double[::1] out, Py_ssize_t delay, double alpha,
                    int nonlin):
    """Fill ``out`` with s(t) = f(alpha * s(t - delay) + drive(t)).

    ``init`` holds the pre-history s(-delay) .. s(-1), so reads before
    t = 0 resolve to ``init[t]`` for t < delay.
    """
    cdef Py_ssize_t t, n = drive.shape[0]
    cdef double prev
    if nonlin == NONLIN_SINE:
        for t in range(n):
            prev = out[t - delay] if t >= delay else init[t]
            out[t] = sin(alpha * prev + drive[t])
    else:
        for t in range(n):
            prev = out[t - delay] if t >= delay else init[t]
            out[t] = tanh(alpha * prev + drive[t])
