"""Mittag-Leffler function on the negative real axis and eigenmode reference curves."""

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import DomainError
from .fractime import as_order

Z_MAX = 30.0
_TOL = 1e-12
_MAX_TERMS = 20000


class OutOfRegimeError(DomainError):
    """Raised when the series evaluation is asked for an argument it does not cover."""


@dataclass(frozen=True)
class MLResult:
    value: float
    terms_used: int
    error_bound: float


def _needed_terms(alpha, x):
    # terms decrease once alpha*m + 1 exceeds x^(1/alpha); allow the same again
    # for the tail to fall below tolerance
    return 2.0 * (x ** (1.0 / alpha) + 40.0) / alpha


def _peak_log10(alpha, x):
    # largest log10 |term| of sum x^m / Gamma(alpha m + 1)
    best = 0.0
    m_stop = int(x ** (1.0 / alpha) / alpha) + 2
    lx = math.log(x)
    for m in range(1, m_stop + 1):
        best = max(best, (m * lx - math.lgamma(alpha * m + 1)) / math.log(10))
    return best


def mittag_leffler(alpha, z):
    """E_alpha(z) = sum_m z^m / Gamma(alpha m + 1) for -30 <= z <= 0.

    For moderate |z| the series is summed in double precision.  When the
    terms grow large enough to cost digits through cancellation the sum is
    carried in extended precision instead.  Either way the truncation error
    is bounded by the first omitted term (the series alternates with
    eventually decreasing terms) and rounding is included in the bound.
    """
    a = as_order(alpha).alpha
    z = float(z)
    if not math.isfinite(z) or z > 0:
        raise OutOfRegimeError(f"argument must be <= 0, got {z!r}")
    if z < -Z_MAX:
        raise OutOfRegimeError(f"|z| = {-z:g} exceeds the series regime {Z_MAX:g}")
    if z == 0:
        return MLResult(1.0, 1, 0.0)
    x = -z
    if _needed_terms(a, x) > _MAX_TERMS:
        raise OutOfRegimeError(
            f"E_{a:g}({z:g}) needs more than {_MAX_TERMS} series terms"
        )
    peak = _peak_log10(a, x)
    if peak < 3:
        return _series_float(a, z)
    return _series_mp(a, z, peak)


def _tail_ok(a, x, m, term_abs, tol):
    # terms are decreasing from index m on once alpha*m + 1 exceeds x^(1/alpha)
    return term_abs < tol and a * m + 1 > x ** (1.0 / a)


def _series_float(a, z):
    x = -z
    total = 1.0
    comp = 0.0
    biggest = 1.0
    m = 0
    while True:
        m += 1
        if m > _MAX_TERMS:
            raise OutOfRegimeError("Mittag-Leffler series did not converge within the term cap")
        term = math.exp(m * math.log(x) - math.lgamma(a * m + 1))
        if m % 2:
            term = -term
        if _tail_ok(a, x, m, abs(term), _TOL):
            bound = abs(term) + 4 * m * 2.2e-16 * biggest
            return MLResult(total, m, bound)
        biggest = max(biggest, abs(term))
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t


def _series_mp(a, z, peak):
    x = -z
    dps = int(peak) + 25
    with mpmath.workdps(dps):
        az = mpmath.mpf(a)
        zz = mpmath.mpf(z)
        total = mpmath.mpf(1)
        m = 0
        while True:
            m += 1
            if m > _MAX_TERMS:
                raise OutOfRegimeError("Mittag-Leffler series did not converge within the term cap")
            term = zz**m / mpmath.gamma(az * m + 1)
            if _tail_ok(a, x, m, abs(term), _TOL):
                bound = float(abs(term)) + 10.0 ** (peak - dps + 3)
                return MLResult(float(total), m, bound)
            total += term


def eigenmode_reference(alpha, mu, times, a=0.0):
    """u(t) = E_alpha(-(mu / Gamma(1 - alpha)) (t - a)^alpha).

    Exact solution of the rescaled-Caputo problem du = -mu u with u(a) = 1.
    """
    al = as_order(alpha).alpha
    if mu < 0:
        raise ValueError("mu must be >= 0")
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(t < a):
        raise ValueError("times must not precede a")
    scale = mu / math.gamma(1.0 - al)
    out = np.array([mittag_leffler(al, -scale * (ti - a) ** al).value for ti in t])
    return out if np.ndim(times) else float(out[0])
