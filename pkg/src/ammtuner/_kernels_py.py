"""Pure-Python invariant solvers for the hybrid bonding curve.

The curve interpolates between constant-product (amp = 0) and constant-sum
(amp -> inf) behavior.  With n tokens of reserves x_i, the invariant constant
D satisfies

    amp * n^n * sum(x_i) + D = amp * D * n^n + D^(n+1) / (n^n * prod(x_i))

These functions are the hot path of every swap quote.  A compiled twin of the
two-token specializations lives in ``_kernels.pyx``; both implementations use
the same iteration and constants so results agree to float precision.
"""
import math

from ammtuner.errors import SolverError

DEFAULT_REL_TOL = 1e-10
DEFAULT_MAX_ITER = 256


def _d_residual(d, s, p, amp, n, nn):
    return amp * nn * s + d - amp * d * nn - d ** (n + 1) / (nn * p)


def d_solve2(x0, x1, amp, rel_tol=DEFAULT_REL_TOL, max_iter=DEFAULT_MAX_ITER):
    """Solve the invariant constant for a two-token pool.

    Returns (d, iterations, relative_residual).  amp = 0 uses the closed
    constant-product form 2*sqrt(x0*x1).  Otherwise Newton from D0 = x0+x1;
    the residual is convex and increasing there, so iterates descend
    monotonically onto the root.  A bisection fallback over
    [2*sqrt(x0*x1), x0+x1] guards pathological inputs.
    """
    s = x0 + x1
    p = x0 * x1
    if amp == 0.0:
        return 2.0 * math.sqrt(p), 0, 0.0

    ann = 4.0 * amp  # amp * n^n with n = 2
    inv4p = 1.0 / (4.0 * p)
    scale = ann * s + s  # magnitude of the invariant's left side, for residuals
    d = s
    for it in range(1, max_iter + 1):
        f = d * d * d * inv4p + (ann - 1.0) * d - ann * s
        fp = 3.0 * d * d * inv4p + (ann - 1.0)
        d_next = d - f / fp
        if abs(d_next - d) <= rel_tol * d_next:
            d = d_next
            residual = abs(d * d * d * inv4p + (ann - 1.0) * d - ann * s) / scale
            return d, it, residual
        d = d_next

    return _d_bisect2(s, p, amp, rel_tol, max_iter, scale)


def _d_bisect2(s, p, amp, rel_tol, max_iter, scale):
    ann = 4.0 * amp
    inv4p = 1.0 / (4.0 * p)
    lo = 2.0 * math.sqrt(p)
    hi = s
    f_lo = lo * lo * lo * inv4p + (ann - 1.0) * lo - ann * s
    it = 0
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        f_mid = mid * mid * mid * inv4p + (ann - 1.0) * mid - ann * s
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo <= rel_tol * lo:
            d = 0.5 * (lo + hi)
            residual = abs(d * d * d * inv4p + (ann - 1.0) * d - ann * s) / scale
            return d, it, residual
    d = 0.5 * (lo + hi)
    residual = abs(d * d * d * inv4p + (ann - 1.0) * d - ann * s) / scale
    raise SolverError("invariant bisection exhausted", residual)


def y_solve2(x_keep, amp, d, rel_tol=DEFAULT_REL_TOL, max_iter=DEFAULT_MAX_ITER):
    """Solve the counterpart reserve of a two-token pool at fixed D.

    x_keep is the (new) reserve of the other token.  For amp > 0 the unknown
    y satisfies y^2 + b*y = c with b = x_keep - D + D/(4*amp) and
    c = D^3 / (16*amp*x_keep); Newton from y0 = D descends monotonically on
    the convex quadratic.  amp = 0 is the constant-product closed form.
    """
    if amp == 0.0:
        half = 0.5 * d
        return half * half / x_keep

    b = x_keep + d / (4.0 * amp) - d
    c = d * d * d / (16.0 * amp * x_keep)
    y = d
    for _ in range(max_iter):
        y_next = (y * y + c) / (2.0 * y + b)
        if abs(y_next - y) <= rel_tol * y_next:
            return y_next
        y = y_next
    raise SolverError("output-reserve iteration did not converge",
                      abs((y * y + c) / (2.0 * y + b) - y))


def d_solve_n(reserves, amp, rel_tol=DEFAULT_REL_TOL, max_iter=DEFAULT_MAX_ITER):
    """General-n invariant solve; same scheme as the two-token fast path."""
    n = len(reserves)
    s = math.fsum(reserves)
    p = math.prod(reserves)
    nn = float(n ** n)
    if amp == 0.0:
        return n * p ** (1.0 / n), 0, 0.0

    ann = amp * nn
    scale = ann * s + s
    d = s
    for it in range(1, max_iter + 1):
        f = _d_residual(d, s, p, amp, n, nn)
        fp = 1.0 - ann - (n + 1) * d ** n / (nn * p)
        d_next = d - f / fp
        if abs(d_next - d) <= rel_tol * d_next:
            d = d_next
            return d, it, abs(_d_residual(d, s, p, amp, n, nn)) / scale
        d = d_next

    lo = n * p ** (1.0 / n)
    hi = s
    f_lo = _d_residual(lo, s, p, amp, n, nn)
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        f_mid = _d_residual(mid, s, p, amp, n, nn)
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo <= rel_tol * lo:
            d = 0.5 * (lo + hi)
            return d, it, abs(_d_residual(d, s, p, amp, n, nn)) / scale
    d = 0.5 * (lo + hi)
    raise SolverError("invariant bisection exhausted",
                      abs(_d_residual(d, s, p, amp, n, nn)) / scale)


def y_solve_n(fixed_reserves, amp, d, rel_tol=DEFAULT_REL_TOL,
              max_iter=DEFAULT_MAX_ITER):
    """General-n counterpart-reserve solve given the n-1 fixed reserves."""
    n = len(fixed_reserves) + 1
    nn = float(n ** n)
    s_fixed = math.fsum(fixed_reserves)
    p_fixed = math.prod(fixed_reserves)
    if amp == 0.0:
        return (d / n) ** n / p_fixed

    b = s_fixed + d / (amp * nn) - d
    c = d ** (n + 1) / (amp * nn * nn * p_fixed)
    y = d
    for _ in range(max_iter):
        y_next = (y * y + c) / (2.0 * y + b)
        if abs(y_next - y) <= rel_tol * y_next:
            return y_next
        y = y_next
    raise SolverError("output-reserve iteration did not converge",
                      abs((y * y + c) / (2.0 * y + b) - y))
