"""Tails of power-law series via Euler-Maclaurin.

Used for zeta values, the infinite-history coefficient of the discrete Caputo
derivative, and periodic image sums of power-law kernels.
"""

import math

# B_2, B_4, B_6, B_8
_BERNOULLI = (1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0)
_ORDER = len(_BERNOULLI)
_ZETA_2P = math.pi**8 / 9450.0  # zeta(8)


def _rising(p, r):
    out = 1.0
    for i in range(r):
        out *= p + i
    return out


def _eval(terms, x, deriv=0):
    total = 0.0
    for c, s, p in terms:
        total += c * (-1) ** deriv * _rising(p, deriv) * (x + s) ** (-p - deriv)
    return total


def _antiderivative_at(terms, x):
    """-(integral from x to infinity) sign convention: returns integral_x^inf f."""
    total = 0.0
    log_part = 0.0
    for c, s, p in terms:
        if abs(p - 1.0) < 1e-14:
            log_part -= c * math.log(x + s)
        else:
            total += c * (x + s) ** (1.0 - p) / (p - 1.0)
    return total + log_part


def _remainder_bound(terms, n):
    coef = 2.0 * _ZETA_2P / (2.0 * math.pi) ** (2 * _ORDER)
    r = 2 * _ORDER - 1
    return coef * sum(abs(c) * _rising(p, r) * (n + s) ** (-p - r) for c, s, p in terms)


def power_tail(terms, start, tol=1e-15):
    """Return (value, error_bound) for sum_{m>=start} f(m).

    ``terms`` is a sequence of ``(coef, shift, power)`` with
    ``f(x) = sum coef * (x + shift) ** -power``.  Every ``x + shift`` must be
    positive for ``x >= start``.  If some power is <= 1 the coefficients of
    those terms must cancel so that the series converges.
    """
    terms = [(float(c), float(s), float(p)) for c, s, p in terms]
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = int(start)
    # march the cut point out until the Euler-Maclaurin remainder is below tol
    while _remainder_bound(terms, n) > 0.5 * tol:
        n = max(n + 1, int(n * 1.5))
    head = 0.0
    comp = 0.0
    for m in range(int(start), n):
        # Kahan summation keeps the head accurate for long explicit stretches
        y = _eval(terms, m) - comp
        t = head + y
        comp = (t - head) - y
        head = t
    tail = _antiderivative_at(terms, n) + 0.5 * _eval(terms, n)
    for i, b in enumerate(_BERNOULLI, start=1):
        tail -= b / math.factorial(2 * i) * _eval(terms, n, 2 * i - 1)
    bound = _remainder_bound(terms, n) + 4 * 2.2e-16 * (abs(head) + abs(tail))
    return head + tail, bound


def zeta(s, tol=1e-15):
    """Riemann zeta for real s > 1."""
    if s <= 1:
        raise ValueError("zeta(s) requires s > 1")
    return power_tail([(1.0, 0.0, s)], 1, tol)[0]
