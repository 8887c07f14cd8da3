"""Oscillation decay over nested parabolic cylinders and Hoelder-exponent fits."""

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..spaceop import periodic_distance
from .barriers import eta


@dataclass(frozen=True)
class OscillationReport:
    center: tuple
    gamma: float
    ratio: float  # sigma / alpha
    osc: np.ndarray
    radii: np.ndarray
    truncated: bool = False
    limiting_scale: float = 0.0
    noise_floor: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def time_spans(self):
        return self.radii**self.ratio


def oscillation_scan(traj, t0, x0, gamma=0.5, depth=4):
    """osc_k = sup - inf of w over [t0 - r_k^(sigma/alpha), t0] x B_{r_k}(x0), r_k = gamma^k.

    k runs over 0..depth-1.  Scales whose radius falls below 2h or whose
    time span falls below 2 eps are not resolved; the scan stops there and
    sets ``truncated``.  A first cylinder that leaves the computed domain
    raises :class:`DomainError`.  ``noise_floor`` is 1e-12 times the largest
    |w| in the unit cylinder; oscillations at or below it are rounding.
    """
    p = traj.problem
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    ratio = p.kernel.sigma / p.alpha.alpha
    tg, sg = p.tgrid, p.sgrid
    t = tg.nodes
    tol = 1e-9 * tg.eps
    if not tg.a - tol <= t0 <= tg.T + tol:
        raise DomainError(f"t0={t0} outside [{tg.a}, {tg.T}]")
    if t0 - 1.0 < tg.a - tol:
        raise DomainError(f"the unit cylinder reaches back to t={t0 - 1.0}, before a={tg.a}")
    if 1.0 > sg.L / 2:
        raise DomainError("the unit ball does not fit on the torus")
    dist = periodic_distance(sg.nodes, x0, sg.L)
    osc, radii = [], []
    floor = 0.0
    truncated = False
    limiting = 0.0
    for k in range(depth):
        r = gamma**k
        span = r**ratio
        if r < 2 * sg.h or span < 2 * tg.eps:
            truncated = True
            limiting = max(2 * sg.h, 2 * tg.eps)
            break
        ts = (t >= t0 - span - tol) & (t <= t0 + tol)
        xs = dist <= r + 1e-12 * sg.L
        block = traj.fields[np.ix_(ts, xs)]
        if k == 0:
            floor = 1e-12 * float(np.max(np.abs(block)))
        osc.append(float(block.max() - block.min()))
        radii.append(r)
    return OscillationReport(
        center=(float(t0), float(x0)),
        gamma=float(gamma),
        ratio=float(ratio),
        osc=np.array(osc),
        radii=np.array(radii),
        truncated=truncated,
        limiting_scale=limiting,
        noise_floor=floor,
    )


@dataclass(frozen=True)
class HolderFit:
    beta: float
    residual: float
    used: int
    dropped_zero: bool = False
    sentinel: bool = False


def holder_fit(report):
    """Least-squares slope of ln osc_k against ln gamma^(k sigma/alpha).

    Oscillations at or below the report's noise floor count as zero and are
    dropped (flagged); if every entry is zero the fit returns beta = +inf
    with ``sentinel`` set.
    """
    osc = np.asarray(report.osc, dtype=float)
    if osc.size < 3:
        raise ValueError(f"need at least 3 scales, got {osc.size}")
    keep = osc > getattr(report, "noise_floor", 0.0)
    if not keep.any():
        return HolderFit(math.inf, 0.0, 0, True, True)
    k = np.arange(osc.size, dtype=float)
    dropped = not np.all(keep)
    if keep.sum() < 2:
        raise ValueError("fewer than two nonzero oscillations")
    x = k[keep] * math.log(report.gamma**report.ratio)
    y = np.log(osc[keep])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return HolderFit(float(coef[0]), resid, int(keep.sum()), dropped, False)


def decay_exponent(lam_star, gamma, sigma, alpha):
    """beta = ln(1 - lam*/4) / ln gamma^(sigma/alpha) for a geometric decay factor."""
    return math.log(1.0 - lam_star / 4.0) / math.log(gamma ** (sigma / alpha))


@dataclass(frozen=True)
class QuotientReport:
    h_steps: int
    beta_target: float
    sup: float
    seminorm: float
    lags: np.ndarray


def difference_quotient_scan(traj, h_steps, beta_target=0.0):
    """Time difference quotients of eta * w.

    eta is the cubic smoothstep of s = (t - a)/(T - a) on [1/2, 1].
    v_j = (eta w)(t_j + H) - (eta w)(t_j) with H = h_steps * eps is scaled by
    H^beta_target.  Returns its sup and the discrete Hoelder-beta_target
    seminorm sup |q_{j+d} - q_j| / (d eps)^beta_target over dyadic lags
    d >= 2.
    """
    p = traj.problem
    tg = p.tgrid
    if h_steps < 1:
        raise DomainError("h_steps must be >= 1")
    if beta_target < 0:
        raise ValueError("beta_target must be >= 0")
    n = tg.k + 1 - h_steps
    if n < 3 or h_steps * tg.eps >= 0.5 * (tg.T - tg.a):
        raise DomainError(f"window too small for a shift of {h_steps} steps")
    s = (tg.nodes - tg.a) / (tg.T - tg.a)
    ew = eta(s)[:, None] * traj.fields
    H = h_steps * tg.eps
    q = (ew[h_steps:] - ew[:-h_steps]) / H**beta_target
    sup = float(np.max(np.abs(q)))
    semi = 0.0
    lags = []
    d = 2
    while d < n:
        diff = np.max(np.abs(q[d:] - q[:-d]))
        semi = max(semi, float(diff) / (d * tg.eps) ** beta_target)
        lags.append(d)
        d *= 2
    return QuotientReport(int(h_steps), float(beta_target), sup, semi, np.array(lags))
