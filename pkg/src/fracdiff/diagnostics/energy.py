"""Energy inequality, truncation energies, exponents and level-set measures."""

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..fractime import HistoryExtension, TimeSeries, as_order, discrete_caputo_all, tail_coefficients
from .barriers import BarrierFamily, BarrierKind, barrier_eval


@dataclass(frozen=True)
class EnergyGap:
    lhs: float
    terms: tuple
    slack: float
    scale: float

    @property
    def ok(self):
        return self.slack >= -1e-10 * self.scale


def energy_decompose_gap(u, alpha):
    """Slack of the discrete integration-by-parts energy inequality.

    lhs = sum_{0<j<=k} eps u_j d_eps u_j and the four lower-bound terms

      T1 = alpha eps^(1-alpha) sum_{0<=i<j<=k} (u_j - u_i)^2 / (2 (j-i)^(1+alpha))
      T2 = eps^(1-alpha)/2 sum_{0<j<k} u_j^2 / (2^(1+alpha) (k-j)^alpha)
      T3 = eps^(1-alpha)/2 sum_{0<j<=k} u_j^2 / (2 j^alpha)
      T4 = -alpha eps^(1-alpha) [sum_j tau_j u_0 u_j + u_0^2 P_k / 2]

    with P_k = sum_{m<=k} m^-(1+alpha).  The series must use the
    constant-before-a extension.  Returns an :class:`EnergyGap`.
    """
    if not isinstance(u, TimeSeries):
        raise TypeError("energy_decompose_gap expects a TimeSeries")
    if u.extension is not HistoryExtension.CONSTANT_BEFORE_A:
        raise ValueError("the energy inequality is stated for the constant-before-a extension")
    al = as_order(alpha).alpha
    eps, k = u.grid.eps, u.grid.k
    v = np.asarray(u.values, dtype=float)
    d = discrete_caputo_all(v, al, eps, HistoryExtension.CONSTANT_BEFORE_A)
    lhs = float(np.sum(eps * v[1:] * d[1:]))
    sc = eps ** (1.0 - al)
    t1 = 0.0
    for m in range(1, k + 1):
        t1 += np.sum((v[m:] - v[:-m]) ** 2) / (2.0 * m ** (1.0 + al))
    t1 *= al * sc
    j = np.arange(1, k, dtype=float)
    t2 = 0.5 * sc * float(np.sum(v[1:k] ** 2 / (2.0 ** (1.0 + al) * (k - j) ** al)))
    jj = np.arange(1, k + 1, dtype=float)
    t3 = 0.5 * sc * float(np.sum(v[1:] ** 2 / (2.0 * jj**al)))
    tau = tail_coefficients(al, k)
    P_k = tau[0] - tau[k]
    t4 = -al * sc * (float(np.sum(tau[1:] * v[0] * v[1:])) + 0.5 * v[0] ** 2 * P_k)
    terms = (float(t1), t2, t3, float(t4))
    rhs = sum(terms)
    scale = max(abs(lhs), sum(abs(x) for x in terms), np.finfo(float).tiny)
    return EnergyGap(lhs, terms, lhs - rhs, float(scale))


# ---------------------------------------------------------------------------


def interpolation_exponent(n, alpha, sigma):
    """(p, beta) of the Hoelder interpolation used in the L2 to L-infinity step."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    al = as_order(alpha).alpha
    if not 0 < sigma < 2:
        raise ValueError("sigma must lie in (0, 2)")
    p = 2.0 * (al * n + sigma) / (al * n + (1.0 - al) * sigma)
    beta = sigma / (al * n + sigma)
    return p, beta


def conjugacy_defects(n, alpha, sigma):
    """Defects of beta/p1 + (1-beta)/p2 = 1/p = beta/p3 + (1-beta)/p4.

    p1 = 2, p2 = 2n/(n - sigma), p3 = 2/(1 - alpha), p4 = 2.  The
    reciprocals are used directly so that sigma >= n (p2 not a finite
    positive number) still gives a well-defined algebraic check.
    """
    p, beta = interpolation_exponent(n, alpha, sigma)
    al = float(alpha)
    inv_p1, inv_p2 = 0.5, (n - sigma) / (2.0 * n)
    inv_p3, inv_p4 = (1.0 - al) / 2.0, 0.5
    first = beta * inv_p1 + (1 - beta) * inv_p2 - 1.0 / p
    second = beta * inv_p3 + (1 - beta) * inv_p4 - 1.0 / p
    return abs(first), abs(second)


def default_delta(n, alpha, sigma):
    """delta = R^-(n + sigma/alpha) with R = 2^(1/sigma), the default measure threshold."""
    al = as_order(alpha).alpha
    R = 2.0 ** (1.0 / sigma)
    return R ** (-(n + sigma / al))


# ---------------------------------------------------------------------------
# diagnostic coordinates: time shifted so that t_shift maps to 0, space
# centred at x_center with the periodic offset in [-L/2, L/2)


def _coords(traj, t_shift=None, x_center=None):
    p = traj.problem
    t_shift = p.tgrid.T if t_shift is None else float(t_shift)
    L = p.sgrid.L
    xc = L / 2 if x_center is None else float(x_center)
    t = p.tgrid.nodes - t_shift
    x = (p.sgrid.nodes - xc + L / 2) % L - L / 2
    return t, x


@dataclass(frozen=True)
class LevelEnergy:
    levels: np.ndarray
    values: np.ndarray
    p: float

    def loglog_slope(self):
        """Least-squares slope of log U_{k+1} against log U_k over positive entries."""
        u = self.values
        mask = (u[:-1] > 0) & (u[1:] > 0)
        if mask.sum() < 2:
            return float("nan")
        x, y = np.log(u[:-1][mask]), np.log(u[1:][mask])
        return float(np.polyfit(x, y, 1)[0])


def truncation_energy(traj, barrier, k_max, t_shift=None, x_center=None, n=1):
    """U_k for levels L_k = (1 - 2^-k)/2, k = 0..k_max.

    U_k sums (w - psi_{L_k})_+ + (w - psi_{L_k})_+^2 + 1{w > psi_{L_k}} over
    the cells j = 1..k of the piecewise-constant extension, each with
    measure eps * h.  ``barrier`` supplies sigma and alpha of psi.
    """
    p = traj.problem
    t, x = _coords(traj, t_shift, x_center)
    if np.any(t > 1e-12 * max(1.0, abs(p.tgrid.T))):
        raise DomainError("the truncation window must lie at times <= 0 in diagnostic coordinates")
    t = np.minimum(t, 0.0)
    base = BarrierFamily(BarrierKind.PSI, sigma=barrier.sigma, alpha=barrier.alpha)
    psi = barrier_eval(base, t[1:, None], x[None, :])
    W = traj.fields[1:]
    cell = p.tgrid.eps * p.sgrid.h
    levels = 0.5 * (1.0 - 2.0 ** -np.arange(int(k_max) + 1, dtype=float))
    U = np.empty_like(levels)
    for i, Lk in enumerate(levels):
        v = np.maximum(W - psi - Lk, 0.0)
        U[i] = cell * float(np.sum(v + v * v + (v > 0)))
    pexp, _ = interpolation_exponent(n, barrier.alpha, barrier.sigma)
    return LevelEnergy(levels, U, pexp)


def level_set_measure(traj, cutoff, region, direction="above", t_shift=None, x_center=None):
    """Counting measure (eps * h per cell) of {w > cutoff} or {w < cutoff} in a region.

    ``region`` is ((t0, t1), radius): the cells with node time in (t0, t1]
    and |x| < radius in diagnostic coordinates.
    """
    if direction not in ("above", "below"):
        raise ValueError("direction must be 'above' or 'below'")
    p = traj.problem
    (t0, t1), r = region
    t, x = _coords(traj, t_shift, x_center)
    tol = 1e-9 * p.tgrid.eps
    if t0 < t[0] - tol or t1 > t[-1] + tol or not t1 > t0:
        raise DomainError(f"time window ({t0}, {t1}] is not inside [{t[0]}, {t[-1]}]")
    if r > p.sgrid.L / 2:
        raise DomainError(f"radius {r} exceeds half the torus length")
    tsel = np.nonzero((t > t0 + tol) & (t <= t1 + tol))[0]
    tsel = tsel[tsel >= 1]
    xsel = np.nonzero(np.abs(x) < r)[0]
    if tsel.size == 0 or xsel.size == 0:
        return 0.0
    tt = np.where(np.abs(t[tsel]) <= tol, 0.0, t[tsel])
    cut = barrier_eval(cutoff, tt[:, None], x[xsel][None, :])
    W = traj.fields[np.ix_(tsel, xsel)]
    hit = W > cut if direction == "above" else W < cut
    return float(np.count_nonzero(hit)) * p.tgrid.eps * p.sgrid.h
