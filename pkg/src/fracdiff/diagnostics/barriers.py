"""Cutoff and barrier functions used by the regularity diagnostics."""

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError


class BarrierKind(enum.Enum):
    PSI = "psi"
    PSI_L = "psi_L"
    PSI_BAR = "psi_bar"
    PSI_LAMBDA = "psi_lambda"
    PSI_TAU_LAMBDA = "psi_tau_lambda"
    PHI = "phi"
    F1 = "F1"
    F2 = "F2"
    ETA = "eta"


_NEEDS_T_NONPOS = {
    BarrierKind.PSI,
    BarrierKind.PSI_L,
    BarrierKind.PSI_BAR,
    BarrierKind.PSI_LAMBDA,
    BarrierKind.PSI_TAU_LAMBDA,
    BarrierKind.PHI,
    BarrierKind.F2,
}


@dataclass(frozen=True)
class BarrierFamily:
    """One cutoff function with its parameters.

    ``level`` is the shift L of psi_L, ``lam`` the lambda of the
    lambda-barriers (which require lam < 1/3), ``tau`` the exponent of
    psi_{tau,lambda} and ``i`` the index of phi_i.
    """

    kind: BarrierKind
    sigma: float = 1.0
    alpha: float = 0.5
    level: float = 0.0
    lam: float = 0.1
    tau: float = 0.1
    i: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", BarrierKind(self.kind))
        if not 0 < self.sigma < 2:
            raise ValueError("sigma must lie in (0, 2)")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.kind in (BarrierKind.PSI_LAMBDA, BarrierKind.PSI_TAU_LAMBDA, BarrierKind.PHI):
            if not 0 < self.lam < 1.0 / 3.0:
                raise DomainError(f"lambda must lie in (0, 1/3), got {self.lam!r}")
        if self.kind is BarrierKind.PHI and self.i not in range(5):
            raise ValueError("phi index must be 0..4")
        if self.kind is BarrierKind.PSI_TAU_LAMBDA and not self.tau > 0:
            raise ValueError("tau must be positive")

    def __call__(self, t, x):
        return barrier_eval(self, t, x)


def _pos(v):
    return np.maximum(v, 0.0)


def _psi(t, x, ex, et):
    return _pos(np.abs(x) ** ex - 1.0) + _pos(np.abs(t) ** et - 1.0)


def _shifted(r, start, ex):
    # ((r - start)^ex - 1)_+ on r >= start, zero before
    d = np.maximum(r - start, 0.0)
    return np.where(r >= start, _pos(d**ex - 1.0), 0.0)


def _psi_lambda(t, x, lam, sigma, alpha, ex=None, et=None):
    ex = sigma / 4 if ex is None else ex
    et = alpha / 4 if et is None else et
    return _shifted(np.abs(x), lam ** (-4.0 / sigma), ex) + _shifted(np.abs(t), lam ** (-4.0 / alpha), et)


def F1(x):
    return np.clip(np.abs(x) ** 2 - 9.0, -1.0, 0.0)


def F2(t):
    return np.clip(np.abs(t) ** 2 - 16.0, -1.0, 0.0)


def eta(t):
    """Cubic smoothstep: 0 for t <= 1/2, 1 for t >= 1."""
    s = np.clip(2.0 * np.asarray(t, dtype=float) - 1.0, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def barrier_eval(family, t, x):
    """Evaluate the cutoff at (t, x); broadcasts over array arguments."""
    fam = family
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if fam.kind in _NEEDS_T_NONPOS and np.any(t > 0):
        raise DomainError(f"{fam.kind.value} is only used for t <= 0")
    k = fam.kind
    s, a = fam.sigma, fam.alpha
    if k is BarrierKind.PSI:
        out = _psi(t, x, s / 2, a / 2)
    elif k is BarrierKind.PSI_L:
        out = fam.level + _psi(t, x, s / 2, a / 2)
    elif k is BarrierKind.PSI_BAR:
        out = _psi(t, x, s / 4, a / 4)
    elif k is BarrierKind.PSI_LAMBDA:
        out = _psi_lambda(t, x, fam.lam, s, a)
    elif k is BarrierKind.PSI_TAU_LAMBDA:
        out = _psi_lambda(t, x, fam.lam, s, a, fam.tau, fam.tau)
    elif k is BarrierKind.PHI:
        li = fam.lam**fam.i
        out = 2.0 + _psi_lambda(t, x, fam.lam**3, s, a) + li * F1(x) + li * F2(t)
    elif k is BarrierKind.F1:
        out = F1(x) + 0.0 * t
    elif k is BarrierKind.F2:
        out = F2(t) + 0.0 * x
    else:
        out = eta(t) + 0.0 * x
    return out if out.ndim else float(out)


def psi_L(level, sigma, alpha):
    return BarrierFamily(BarrierKind.PSI_L, sigma=sigma, alpha=alpha, level=level)


def phi(i, lam, sigma, alpha):
    return BarrierFamily(BarrierKind.PHI, sigma=sigma, alpha=alpha, lam=lam, i=i)
