"""Caputo derivatives on a uniform time lattice and their quadrature twins.

All derivatives here are the rescaled Caputo derivative
``Gamma(1 - alpha) * D^alpha``; the Gamma factor is only introduced when
comparing against classical-Caputo closed forms.
"""

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._sums import power_tail, zeta
from .errors import DomainError


class HistoryExtension(enum.Enum):
    CONSTANT_BEFORE_A = "constant_before_a"
    ZERO_BEFORE_A = "zero_before_a"
    EVEN_REFLECT_AFTER_T = "even_reflect_after_t"


@dataclass(frozen=True)
class FracOrder:
    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a < 1.0) or not math.isfinite(a):
            raise ValueError(f"fractional order must lie in (0, 1), got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    def __float__(self):
        return self.alpha


def as_order(alpha):
    return alpha if isinstance(alpha, FracOrder) else FracOrder(alpha)


@dataclass(frozen=True)
class TimeGrid:
    a: float
    T: float
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"step count k must be a positive integer, got {self.k!r}")
        if not (math.isfinite(self.a) and math.isfinite(self.T)) or self.T <= self.a:
            raise ValueError(f"need finite a < T, got a={self.a!r}, T={self.T!r}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "T", float(self.T))

    @property
    def eps(self):
        return (self.T - self.a) / self.k

    def node(self, j):
        if j == self.k:
            return self.T
        return self.a + j * self.eps

    @property
    def nodes(self):
        t = self.a + self.eps * np.arange(self.k + 1)
        t[-1] = self.T
        return t

    @classmethod
    def from_step(cls, a, T, eps):
        k = int(round((T - a) / eps))
        if k < 1 or abs(k * eps - (T - a)) > 1e-9 * max(1.0, abs(T - a)):
            raise ValueError(f"step {eps} does not divide [{a}, {T}]")
        return cls(a, T, k)


@dataclass(frozen=True)
class TimeSeries:
    grid: TimeGrid
    values: np.ndarray
    extension: HistoryExtension = HistoryExtension.CONSTANT_BEFORE_A

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] != self.grid.k + 1:
            raise ValueError(f"expected {self.grid.k + 1} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("time series values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, fn, grid, extension=HistoryExtension.CONSTANT_BEFORE_A):
        return cls(grid, np.array([fn(t) for t in grid.nodes], dtype=float), extension)


# ---------------------------------------------------------------------------
# weights


@lru_cache(maxsize=64)
def _zeta_cached(s):
    return zeta(s)


def caputo_weights(alpha, j, extension=HistoryExtension.CONSTANT_BEFORE_A, tail_tol=1e-13):
    """Weights ``c_m = m^-(1+alpha)`` for m = 1..j and the history tail.

    The tail ``tau_j = sum_{m>j} m^-(1+alpha)`` only enters for the
    constant-before-a extension; it is reported as 0 otherwise.
    """
    alpha = as_order(alpha).alpha
    if j < 1:
        raise DomainError("discrete Caputo derivative needs j >= 1 (no past nodes at j = 0)")
    if tail_tol <= 0:
        raise ValueError("tail_tol must be positive")
    s = 1.0 + alpha
    c = np.arange(1, j + 1, dtype=float) ** (-s)
    if HistoryExtension(extension) is HistoryExtension.CONSTANT_BEFORE_A:
        tau, bound = power_tail([(1.0, 0.0, s)], j + 1, tol=tail_tol)
        if bound > tail_tol:
            raise ArithmeticError(f"tail bound {bound:g} exceeds tolerance {tail_tol:g}")
    else:
        tau = 0.0
    return c, tau


def tail_coefficients(alpha, k):
    """tau_j = sum_{m>j} m^-(1+alpha) for j = 0..k (tau_0 = zeta(1+alpha)).

    Obtained as zeta minus a compensated running sum, which keeps the tails
    accurate without one series evaluation per index.
    """
    alpha = as_order(alpha).alpha
    s = 1.0 + alpha
    z = _zeta_cached(s)
    out = np.empty(int(k) + 1)
    out[0] = z
    acc, comp = 0.0, 0.0
    for j in range(1, int(k) + 1):
        y = j ** (-s) - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
        out[j] = (z - acc) - comp
    return out


def discrete_caputo_values(values, alpha, eps, j, extension=HistoryExtension.CONSTANT_BEFORE_A):
    """Array form of :func:`discrete_caputo`; ``values`` has shape (k+1, ...)."""
    alpha = as_order(alpha).alpha
    values = np.asarray(values, dtype=float)
    if not 1 <= j <= values.shape[0] - 1:
        raise DomainError(f"index j={j} outside 1..{values.shape[0] - 1}")
    c, tau = caputo_weights(alpha, j, extension)
    uj = values[j]
    past = values[j - 1::-1] if j >= 1 else values[:0]
    past = past[:j]
    diffs = uj - past
    acc = np.tensordot(c, diffs, axes=(0, 0))
    if tau:
        acc = acc + tau * (uj - values[0])
    return alpha * eps ** (-alpha) * acc


def discrete_caputo(u, alpha, j):
    """Discrete rescaled Caputo derivative of a series at node ``a + eps*j``."""
    if not 1 <= j <= u.grid.k:
        raise DomainError(f"index j={j} outside 1..{u.grid.k}")
    return float(discrete_caputo_values(u.values, alpha, u.grid.eps, j, u.extension))


def discrete_caputo_all(values, alpha, eps, extension=HistoryExtension.CONSTANT_BEFORE_A):
    """Discrete derivative at every node 1..k (row 0 of the result is 0)."""
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    for j in range(1, values.shape[0]):
        out[j] = discrete_caputo_values(values, alpha, eps, j, extension)
    return out


# ---------------------------------------------------------------------------
# quadrature


def _graded_midpoints(M, q):
    """Midpoint nodes y_i in (0, 1) mapped by x = y**q, with weights dx."""
    y = (np.arange(M) + 0.5) / M
    return y**q, q * y ** (q - 1) / M


# Below this relative lag u(t) - u(s) is mostly rounding; such differences are
# replaced by the linear interpolation of the difference taken at X_CUT.
X_CUT = 1e-8


def _linearise_small_lags(diff, diff_at_cut, x):
    small = (x < X_CUT).reshape((-1,) + (1,) * (np.ndim(diff) - 1))
    scaled = (x / X_CUT).reshape(small.shape) * diff_at_cut
    return np.where(small, scaled, diff)


def caputo_quadrature(u, alpha, t, a=0.0, M=2000):
    """Rescaled Caputo derivative of a callable ``u`` at time ``t``.

    Evaluates ``(u(t)-u(a))/(t-a)^alpha + alpha*int_a^t (u(t)-u(s))/(t-s)^(1+alpha) ds``
    by composite midpoint in the variable y with ``t - s = (t - a) y^q``,
    q = 1/(1 - alpha), which makes the integrand bounded for C^1 inputs.
    ``u`` may return arrays (vectorised over trailing axes).
    """
    alpha = as_order(alpha).alpha
    if not t > a:
        raise DomainError(f"need t > a, got t={t}, a={a}")
    if M < 2:
        raise ValueError("M must be at least 2")
    span = t - a
    x, dx = _graded_midpoints(int(M), 1.0 / (1.0 - alpha))
    ut = np.asarray(u(t), dtype=float)
    ua = np.asarray(u(a), dtype=float)
    s = t - span * np.concatenate([x, [X_CUT]])
    us = np.asarray(u(s), dtype=float)
    if us.shape[:1] != s.shape or us.shape[1:] != ut.shape:
        us = np.asarray([u(si) for si in s], dtype=float)
    kern = alpha * span ** (-alpha) * x ** (-1.0 - alpha) * dx
    diff = _linearise_small_lags(ut - us[:-1], ut - us[-1], x)
    integral = np.tensordot(kern, diff, axes=(0, 0))
    out = (ut - ua) / span**alpha + integral
    return float(out) if np.ndim(out) == 0 else out


def caputo_power_closed_form(mu, alpha, t, a=0.0):
    """Rescaled Caputo derivative of (t-a)^mu: Gamma(mu+1)Gamma(1-alpha)/Gamma(mu+1-alpha) (t-a)^(mu-alpha)."""
    return math.gamma(mu + 1) * math.gamma(1 - alpha) / math.gamma(mu + 1 - alpha) * (t - a) ** (mu - alpha)


# ---------------------------------------------------------------------------
# barrier h(t) = max(|t|^nu - 1, 0)


def barrier_h(t, nu):
    t = np.asarray(t, dtype=float)
    return np.maximum(np.abs(t) ** nu - 1.0, 0.0)


def barrier_reference_constant(nu, alpha, tol=1e-12):
    """c with d^alpha h(-1) = -c, h extended from -infinity.

    c = int_{-inf}^{-1} nu |s|^(nu-1) (-1-s)^-alpha ds.  With -1-s = e^z the
    integrand is smooth and decays exponentially at both ends; the truncated
    tails are bounded analytically and added to the reported bound.
    """
    alpha = as_order(alpha).alpha
    if not 0 < nu < alpha:
        raise DomainError(f"need 0 < nu < alpha, got nu={nu}, alpha={alpha}")
    # tails: left <= nu e^{-Z1(1-alpha)}/(1-alpha), right <= nu e^{-Z2(alpha-nu)}/(alpha-nu)
    z1 = math.log(nu / ((1 - alpha) * tol)) / (1 - alpha)
    z2 = math.log(nu / ((alpha - nu) * tol)) / (alpha - nu)
    n = int(400 * (z1 + z2)) + 1
    dz = (z1 + z2) / n
    z = -z1 + dz * (np.arange(n) + 0.5)
    ez = np.exp(z)
    f = nu * (1.0 + ez) ** (nu - 1.0) * ez ** (1.0 - alpha)
    return float(np.sum(f) * dz)


def _h_derivative_all(nu, alpha, grid):
    h = barrier_h(grid.nodes, nu)
    return discrete_caputo_all(h, alpha, grid.eps, HistoryExtension.CONSTANT_BEFORE_A)


@dataclass(frozen=True)
class BarrierBound:
    minimum: float
    reference: float
    argmin: float
    values: np.ndarray
    nodes: np.ndarray

    @property
    def holds(self):
        return self.minimum >= -self.reference


def barrier_bound_check(nu, alpha, grid):
    """Minimum of the discrete derivative of h over nodes in (a, 0)."""
    alpha = as_order(alpha).alpha
    if nu >= alpha or nu <= 0:
        raise DomainError(f"need 0 < nu < alpha, got nu={nu}, alpha={alpha}")
    if not grid.a < -1:
        raise DomainError("barrier check needs a < -1")
    d = _h_derivative_all(nu, alpha, grid)
    t = grid.nodes
    mask = (t > grid.a) & (t < -0.5 * grid.eps)
    mask[0] = False
    if not mask.any():
        raise DomainError("no grid nodes inside (a, 0)")
    vals = d[mask]
    i = int(np.argmin(vals))
    return BarrierBound(
        minimum=float(vals[i]),
        reference=barrier_reference_constant(nu, alpha),
        argmin=float(t[mask][i]),
        values=vals,
        nodes=t[mask],
    )


def barrier_monotone_defect(nu, alpha, grid):
    """max over nodes t1 < t2 <= -1 of d h(t2) - d h(t1); <= 0 when monotone."""
    d = _h_derivative_all(nu, alpha, grid)
    t = grid.nodes
    sel = np.nonzero((t <= -1.0 + 1e-12) & (np.arange(t.size) >= 1))[0]
    if sel.size < 2:
        return 0.0
    v = d[sel]
    running_min = np.minimum.accumulate(v)
    return float(np.max(v[1:] - running_min[:-1]))


def lower_sum_bound_gap(alpha, j, l):
    """sum_{i<l} (j-i)^-(1+alpha) - 2^-(1+alpha) (j-l)^-alpha / alpha  (should be >= 0)."""
    alpha = as_order(alpha).alpha
    if not l < j:
        raise ValueError("need l < j")
    s = 1.0 + alpha
    lhs = power_tail([(1.0, 0.0, s)], j - l + 1)[0]
    return lhs - 2.0 ** (-s) * (j - l) ** (-alpha) / alpha


# ---------------------------------------------------------------------------
# integration by parts identity


def _two_sided_graded(M, a, T, q):
    """Midpoint rule on [a, T] graded at both ends (substitution of order q)."""
    y = (np.arange(M) + 0.5) / M
    g = y**q / (y**q + (1 - y) ** q)
    num = q * (y ** (q - 1) * (1 - y) ** q + y**q * (1 - y) ** (q - 1))
    den = (y**q + (1 - y) ** q) ** 2
    return a + (T - a) * g, (T - a) * num / den / M


def _as_callable(g):
    if isinstance(g, TimeSeries):
        t = g.grid.nodes
        v = g.values
        return lambda s: np.interp(s, t, v), g.grid.a, g.grid.T
    return g, None, None


def ibp_terms(g, h, alpha, a=None, T=None, M=1024, chunk=256):
    """Both sides of the Caputo integration-by-parts identity by quadrature.

    Returns (lhs, rhs) with lhs = int g d^a h + h d^a g and rhs the sum of the
    boundary-weight integral, the double integral and the initial coupling.
    """
    alpha = as_order(alpha).alpha
    g, ga, gT = _as_callable(g)
    h, ha, hT = _as_callable(h)
    a = a if a is not None else (ga if ga is not None else ha)
    T = T if T is not None else (gT if gT is not None else hT)
    if a is None or T is None or not T > a:
        raise ValueError("need an interval a < T")
    q = 1.0 / (1.0 - alpha)
    t, wt = _two_sided_graded(int(M), a, T, q)
    x, dx = _graded_midpoints(int(M), q)
    gt, ht = np.asarray(g(t), float), np.asarray(h(t), float)
    ga_, ha_ = float(g(a)), float(h(a))
    lhs = 0.0
    dbl = 0.0
    for lo in range(0, t.size, chunk):
        tc = t[lo:lo + chunk, None]
        span = tc - a
        s = tc - span * x[None, :]
        kern = alpha * span ** (-alpha) * x[None, :] ** (-1.0 - alpha) * dx[None, :]
        sc = tc[:, 0] - span[:, 0] * X_CUT
        dg = gt[lo:lo + chunk, None] - np.asarray(g(s), float)
        dh = ht[lo:lo + chunk, None] - np.asarray(h(s), float)
        dg = _linearise_small_lags(dg.T, gt[lo:lo + chunk] - np.asarray(g(sc), float), x).T
        dh = _linearise_small_lags(dh.T, ht[lo:lo + chunk] - np.asarray(h(sc), float), x).T
        cap_g = (gt[lo:lo + chunk] - ga_) / span[:, 0] ** alpha + np.sum(kern * dg, axis=1)
        cap_h = (ht[lo:lo + chunk] - ha_) / span[:, 0] ** alpha + np.sum(kern * dh, axis=1)
        w = wt[lo:lo + chunk]
        lhs += np.sum(w * (gt[lo:lo + chunk] * cap_h + ht[lo:lo + chunk] * cap_g))
        dbl += np.sum(w * np.sum(kern * dg * dh, axis=1))
    boundary = np.sum(wt * gt * ht * ((T - t) ** (-alpha) + (t - a) ** (-alpha)))
    coupling = np.sum(wt * (gt * ha_ + ht * ga_) * (t - a) ** (-alpha))
    return float(lhs), float(boundary + dbl - coupling)


def ibp_defect(g, h, alpha, M=1024, a=None, T=None):
    """|LHS - RHS| of the integration-by-parts identity at resolution M."""
    lhs, rhs = ibp_terms(g, h, alpha, a=a, T=T, M=M)
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# extension energy


def _pair_kernel(alpha, mmax):
    """D_m = int_{cell i} int_{cell i+m} |t-s|^-(1+alpha) ds dt / eps^(1-alpha), m >= 1."""
    m = np.arange(1, mmax + 1, dtype=float)
    e = 1.0 - alpha
    second = (m + 1) ** e - 2 * m**e + (m - 1) ** e
    return -second / (alpha * e)


def extension_energy_ratio(u, alpha):
    """Both sides of the extension energy inequality for the piecewise-constant series.

    ``u`` is extended by zero before a and evenly reflected across T (zero
    beyond 2T - a).  Cell integrals of |t-s|^-(1+alpha) are evaluated in
    closed form, so the result is exact for the step function.
    Returns (extended energy, 8 * (one-sided energy + weighted endpoint term)).
    """
    alpha = as_order(alpha).alpha
    eps = u.grid.eps
    k = u.grid.k
    v = np.asarray(u.values[1:], dtype=float)
    ext = np.concatenate([v, v[::-1]])
    n = ext.size
    D = _pair_kernel(alpha, n)
    scale = eps ** (1.0 - alpha)
    e = 1.0 - alpha
    # ordered-pair double sum over the 2k cells
    inner = 0.0
    for m in range(1, n):
        inner += D[m - 1] * np.sum((ext[m:] - ext[:-m]) ** 2)
    inner *= 2.0
    # cells against the zero region outside [a, 2T - a]
    idx = np.arange(1, n + 1, dtype=float)
    left = (idx**e - (idx - 1) ** e) / e
    right = left[::-1]
    outside = np.sum(ext**2 * (left + right)) / alpha
    lhs = alpha * scale * (inner + 2.0 * outside)
    one_sided = 0.0
    for m in range(1, k):
        one_sided += D[m - 1] * np.sum((v[m:] - v[:-m]) ** 2)
    jj = np.arange(1, k + 1, dtype=float)
    endpoint = np.sum(v**2 * (jj**e - (jj - 1) ** e) / e)
    rhs = 8.0 * (alpha * scale * one_sided + scale * endpoint)
    return float(lhs), float(rhs)
