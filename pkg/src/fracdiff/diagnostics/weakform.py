"""Residual of the space-time weak formulation for a computed trajectory.

The trajectory is read as its piecewise-constant extension in time (value
w_j on the cell (t_{j-1}, t_j]); the test function is interpolated linearly
in time between nodes.  Every time integral is then a finite combination of
cell moments of the power kernels, which are evaluated in closed form or by
Gauss-Legendre on smooth pieces, so the only approximation left is the
interpolation of the test function.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import roots_legendre

from ..fractime import as_order
from ..spaceop import apply, assemble

_GL_X, _GL_W = roots_legendre(24)


def _gl(fn, lo, hi):
    x = 0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)
    return 0.5 * (hi - lo) * np.sum(_GL_W * fn(x))


def _cell_moments(alpha, k):
    """Q0_j = int_{j-1}^j s^-alpha, Q1_j = int_{j-1}^j (s - j + 1) s^-alpha, j = 1..k."""
    Q0 = np.empty(k)
    Q1 = np.empty(k)
    Q0[0] = 1.0 / (1.0 - alpha)
    Q1[0] = 1.0 / (2.0 - alpha)
    for j in range(2, k + 1):
        Q0[j - 1] = _gl(lambda u: (j - 1 + u) ** (-alpha), 0.0, 1.0)
        Q1[j - 1] = _gl(lambda u: u * (j - 1 + u) ** (-alpha), 0.0, 1.0)
    return Q0, Q1


def _second_difference(p, m):
    """(m+1)^p - 2 m^p + (m-1)^p without cancellation for large m."""
    m = np.asarray(m, dtype=float)
    out = np.empty_like(m)
    small = m < 2
    out[small] = 2.0**p - 2.0
    mm = m[~small]
    out[~small] = mm**p * (np.expm1(p * np.log1p(1.0 / mm)) + np.expm1(p * np.log1p(-1.0 / mm)))
    return out


def _pair_moments(alpha, k):
    """Cell-pair moments of (t - s)^-(1+alpha) for cells m = 1..k-1 apart.

    With t = j-1+u, s = i-1+v, m = j-i: M0 = int int K, A = int int u K,
    B = int int v K over the unit square.  Written through z = u - v, whose
    density is 1 - |z| and for which E[v | z] = (1 - z)/2.
    """
    e = 1.0 + alpha
    M0 = np.empty(max(k - 1, 0))
    B = np.empty_like(M0)
    for m in range(1, k):
        if m == 1:
            m0_left = 1.0 / (1.0 - alpha)
            b_left = 1.0 / (1.0 - alpha) - 1.0 / (2.0 * (2.0 - alpha))
        else:
            m0_left = _gl(lambda z: (1 + z) * (m + z) ** (-e), -1.0, 0.0)
            b_left = _gl(lambda z: (1 + z) * (1 - z) / 2 * (m + z) ** (-e), -1.0, 0.0)
        m0_right = _gl(lambda z: (1 - z) * (m + z) ** (-e), 0.0, 1.0)
        b_right = _gl(lambda z: (1 - z) ** 2 / 2 * (m + z) ** (-e), 0.0, 1.0)
        M0[m - 1] = m0_left + m0_right
        B[m - 1] = b_left + b_right
    return M0, M0 - B, B


def _caputo_cell_kernel(alpha, k):
    """g_m = int_{cell j} int_{cell j-m, s<t} (t-s)^-alpha in step units, m = 0..k-1."""
    p = 2.0 - alpha
    c = 1.0 / ((1.0 - alpha) * (2.0 - alpha))
    g = np.empty(k)
    g[0] = c
    if k > 1:
        g[1:] = c * _second_difference(p, np.arange(1, k))
    return g


@dataclass(frozen=True)
class WeakResidual:
    residual: float
    terms: dict


def weak_residual(traj, phi, f=None):
    """|LHS - RHS| of the weak formulation tested against ``phi(t, x)``.

    Terms (each integrated over the torus with the grid sum):
      boundary  int w phi [(T-t)^-a + (t-a)^-a]
      memory    alpha int int_{s<t} (w(t)-w(s))(phi(t)-phi(s)) (t-s)^-(1+a)
      coupling  int [phi(t) w(a) + phi(a) w(t)] (t-a)^-a
      transfer  int w d^a phi
      elastic   int B[w, phi]
      forcing   int f phi
    and the residual is |boundary + memory - coupling - transfer + elastic - forcing|.
    ``f`` defaults to the problem's own forcing sampled at nodes.
    """
    p = traj.problem
    al = as_order(p.alpha).alpha
    tg, sg = p.tgrid, p.sgrid
    k, eps, h = tg.k, tg.eps, sg.h
    t = tg.nodes
    x = sg.nodes
    Phi = np.stack([np.asarray(phi(tj, x), dtype=float) * np.ones_like(x) for tj in t])
    W = traj.fields
    w0 = W[0]
    Wc = W[1:]
    D = Phi[1:] - Phi[:-1]
    left = Phi[:-1]
    right = Phi[1:]
    sc = eps ** (1.0 - al)

    Q0, Q1 = _cell_moments(al, k)
    # int over cell j of phi * (t-a)^-alpha and of phi * (T-t)^-alpha
    ia = sc * (left * Q0[:, None] + D * Q1[:, None])
    Q0r, Q1r = Q0[::-1], Q1[::-1]
    iT = sc * (right * Q0r[:, None] - D * Q1r[:, None])
    boundary = np.sum(Wc * (ia + iT), axis=0)
    coupling = w0 * np.sum(ia, axis=0) + Phi[0] * np.sum(Wc * (sc * Q0[:, None]), axis=0)

    g = _caputo_cell_kernel(al, k)
    transfer_cells = np.zeros_like(Wc)
    for m in range(k):
        transfer_cells[m:] += g[m] * D[: k - m]
    transfer = sc * np.sum(Wc * transfer_cells, axis=0)

    M0, A, B = _pair_moments(al, k)
    memory = np.zeros(sg.Nx)
    for m in range(1, k):
        dw = Wc[m:] - Wc[:-m]
        xphi = (left[m:] - left[:-m]) * M0[m - 1] + D[m:] * A[m - 1] - D[:-m] * B[m - 1]
        memory += np.sum(dw * xphi, axis=0)
    memory *= al * sc

    op = assemble(replace(p.kernel, multiplier=None), sg)
    mid = 0.5 * (left + right)
    LW = np.stack([apply(op, Wc[j]) for j in range(k)])
    if p.kernel.multiplier is not None:
        LW *= np.array([p.kernel.time_factor(tj) for tj in t[1:]])[:, None]
    elastic = -eps * np.sum(LW * mid, axis=0)

    if f is None:
        F = np.stack([p.forcing(j) for j in range(1, k + 1)])
    else:
        F = np.stack([np.asarray(f(tj, x), dtype=float) * np.ones_like(x) for tj in t[1:]])
    forcing = eps * np.sum(F * mid, axis=0)

    terms = {
        name: float(h * np.sum(val))
        for name, val in (
            ("boundary", boundary),
            ("memory", memory),
            ("coupling", coupling),
            ("transfer", transfer),
            ("elastic", elastic),
            ("forcing", forcing),
        )
    }
    lhs = terms["boundary"] + terms["memory"] - terms["coupling"] - terms["transfer"] + terms["elastic"]
    res = abs(lhs - terms["forcing"])
    if not math.isfinite(res):
        raise ArithmeticError("weak residual is not finite")
    return WeakResidual(res, terms)
