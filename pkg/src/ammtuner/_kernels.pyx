# cython: language_level=3
# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled two-token invariant solvers; see _kernels_py for the reference
implementation.  Formulas and iteration order match the pure-Python twin so
both backends agree to float precision."""

from libc.math cimport fabs, sqrt

from ammtuner.errors import SolverError


cpdef tuple d_solve2(double x0, double x1, double amp,
                     double rel_tol=1e-10, int max_iter=256):
    cdef double s = x0 + x1
    cdef double p = x0 * x1
    cdef double ann, inv4p, scale, d, f, fp, d_next, residual
    cdef double lo, hi, f_lo, f_mid, mid
    cdef int it

    if amp == 0.0:
        return 2.0 * sqrt(p), 0, 0.0

    ann = 4.0 * amp
    inv4p = 1.0 / (4.0 * p)
    scale = ann * s + s
    d = s
    for it in range(1, max_iter + 1):
        f = d * d * d * inv4p + (ann - 1.0) * d - ann * s
        fp = 3.0 * d * d * inv4p + (ann - 1.0)
        d_next = d - f / fp
        if fabs(d_next - d) <= rel_tol * d_next:
            d = d_next
            residual = fabs(d * d * d * inv4p + (ann - 1.0) * d - ann * s) / scale
            return d, it, residual
        d = d_next

    lo = 2.0 * sqrt(p)
    hi = s
    f_lo = lo * lo * lo * inv4p + (ann - 1.0) * lo - ann * s
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        f_mid = mid * mid * mid * inv4p + (ann - 1.0) * mid - ann * s
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo = mid
            f_lo = f_mid
        else:
            hi = mid
        if hi - lo <= rel_tol * lo:
            d = 0.5 * (lo + hi)
            residual = fabs(d * d * d * inv4p + (ann - 1.0) * d - ann * s) / scale
            return d, it, residual
    d = 0.5 * (lo + hi)
    residual = fabs(d * d * d * inv4p + (ann - 1.0) * d - ann * s) / scale
    raise SolverError("invariant bisection exhausted", residual)


cpdef double y_solve2(double x_keep, double amp, double d,
                      double rel_tol=1e-10, int max_iter=256) except -1.0:
    cdef double half, b, c, y, y_next
    cdef int it

    if amp == 0.0:
        half = 0.5 * d
        return half * half / x_keep

    b = x_keep + d / (4.0 * amp) - d
    c = d * d * d / (16.0 * amp * x_keep)
    y = d
    for it in range(max_iter):
        y_next = (y * y + c) / (2.0 * y + b)
        if fabs(y_next - y) <= rel_tol * y_next:
            return y_next
        y = y_next
    raise SolverError("output-reserve iteration did not converge",
                      fabs((y * y + c) / (2.0 * y + b) - y))
