"""Symmetric jump kernels on a periodic 1-D grid and their discrete operators."""

import enum
import json
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ._sums import power_tail
from .errors import DomainError, FormatError


class KernelMode(enum.Enum):
    TRUNCATED = "truncated"
    FULL = "full"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class SpaceGrid:
    L: float
    Nx: int
    n: int = 1

    def __post_init__(self):
        if int(self.Nx) != self.Nx or self.Nx < 8:
            raise ValueError(f"Nx must be an integer >= 8, got {self.Nx!r}")
        if not math.isfinite(self.L) or self.L < 8:
            raise ValueError(f"torus length L must be >= 8, got {self.L!r}")
        if self.n != 1:
            raise ValueError("only n = 1 is supported")
        object.__setattr__(self, "Nx", int(self.Nx))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self):
        return self.L / self.Nx

    @property
    def nodes(self):
        return self.h * np.arange(self.Nx)


def periodic_distance(x, y, period):
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % period
    return np.minimum(d, period - d)


@dataclass(frozen=True)
class KernelSpec:
    """Jump kernel K(t, x, y) comparable to |x - y|^-(1 + sigma).

    ``period`` is the torus length the kernel lives on.  ``radius`` is the
    truncation radius of the truncated mode.  For the tabulated mode
    ``table`` is a symmetric P x P array of coefficients on a uniform
    partition of the torus; ``K = table[p(x), q(y)] * d^-(1+sigma)``.
    ``multiplier`` scales the whole kernel in time and should stay in
    [1/lam, lam].  ``coord_origin``/``coord_scale`` map this kernel's
    coordinates back to the table's (set by :func:`rescale_kernel`).
    """

    sigma: float
    lam: float
    mode: KernelMode
    period: float
    radius: float = 3.0
    table: Optional[np.ndarray] = None
    multiplier: Optional[Callable[[float], float]] = None
    multiplier_desc: Optional[dict] = None
    coord_origin: float = 0.0
    coord_scale: float = 1.0
    table_period: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.sigma < 2:
            raise ValueError(f"sigma must lie in (0, 2), got {self.sigma!r}")
        if not self.lam >= 1:
            raise ValueError(f"Lambda must be >= 1, got {self.lam!r}")
        object.__setattr__(self, "mode", KernelMode(self.mode))
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.mode is KernelMode.TABULATED:
            if self.table is None:
                raise ValueError("tabulated kernel needs a table")
            tab = np.array(self.table, dtype=float)
            if tab.ndim != 2 or tab.shape[0] != tab.shape[1]:
                raise ValueError("table must be square")
            if not np.array_equal(tab, tab.T):
                raise ValueError("table must be symmetric")
            if np.any(tab < 0) or not np.all(np.isfinite(tab)):
                raise ValueError("table entries must be finite and nonnegative")
            tab.setflags(write=False)
            object.__setattr__(self, "table", tab)
            if self.table_period is None:
                object.__setattr__(self, "table_period", float(self.period))

    @property
    def exponent(self):
        return 1.0 + self.sigma

    def time_factor(self, t):
        return 1.0 if self.multiplier is None else float(self.multiplier(t))

    def _coefficient(self, x, y):
        tab = self.table
        P = tab.shape[0]
        xs = (self.coord_origin + np.asarray(x, float) / self.coord_scale) % self.table_period
        ys = (self.coord_origin + np.asarray(y, float) / self.coord_scale) % self.table_period
        p = np.minimum((xs / self.table_period * P).astype(int), P - 1)
        q = np.minimum((ys / self.table_period * P).astype(int), P - 1)
        return tab[p, q]


def _periodized_power(d, s, period):
    """sum over images n of |d + n*period|^-s for 0 < d <= period/2."""
    d = np.atleast_1d(np.asarray(d, dtype=float))
    out = np.empty_like(d)
    for i, di in enumerate(d.flat):
        q = di / period
        # sum_{n>=0} (n + q)^-s + sum_{n>=1} (n - q)^-s, scaled by period^-s
        a, _ = power_tail([(1.0, q, s)], 0)
        b, _ = power_tail([(1.0, -q, s)], 1)
        out.flat[i] = period ** (-s) * (a + b)
    return out


def kernel_eval(spec, t, x, y):
    """K(t, x, y) with the minimal periodic distance; raises at x == y."""
    d = periodic_distance(x, y, spec.period)
    if np.any(d == 0):
        raise DomainError("kernel is singular at x == y")
    s = spec.exponent
    if spec.mode is KernelMode.TRUNCATED:
        val = np.where(d <= spec.radius, d ** (-s), 0.0)
    elif spec.mode is KernelMode.FULL:
        val = _periodized_power(d, s, spec.period).reshape(np.shape(d))
    else:
        val = spec._coefficient(x, y) * d ** (-s)
        # symmetrise the piecewise-constant lookup at partition boundaries
        val = 0.5 * (val + spec._coefficient(y, x) * d ** (-s))
    val = spec.time_factor(t) * val
    return float(val) if np.ndim(val) == 0 else val


# ---------------------------------------------------------------------------
# ellipticity


@dataclass
class EllipticityReport:
    violations: list = field(default_factory=list)
    min_ratio: float = math.inf
    max_ratio: float = 0.0
    samples: int = 0

    @property
    def ok(self):
        return not self.violations


def _halton(n, base):
    out = np.empty(n)
    for i in range(n):
        f, r, k = 1.0, 0.0, i + 1
        while k:
            f /= base
            r += f * (k % base)
            k //= base
        out[i] = r
    return out


def ellipticity_check(spec, sample_count=512, t_range=(0.0, 1.0), rtol=1e-12):
    """Check chi_{d<=3} d^-(1+sigma)/lam <= K <= lam d^-(1+sigma) on quasi-random samples.

    Sampling uses a Halton sequence so the report is deterministic.  For the
    tabulated mode every pair of table cells is probed at its centre as well.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    P = spec.period
    hx, hy, ht = _halton(sample_count, 2), _halton(sample_count, 3), _halton(sample_count, 5)
    xs = hx * P
    ys = (xs + (0.02 + 0.96 * hy) * P) % P
    ts = t_range[0] + ht * (t_range[1] - t_range[0])
    pts = list(zip(ts, xs, ys))
    if spec.mode is KernelMode.TABULATED:
        n = spec.table.shape[0]
        width = spec.table_period / n
        for p in range(n):
            for q in range(n):
                if p == q:
                    xa, xb = (p + 0.25) * width, (p + 0.75) * width
                else:
                    xa, xb = (p + 0.5) * width, (q + 0.5) * width
                # back to this kernel's coordinates
                pts.append((ts[0], (xa - spec.coord_origin) * spec.coord_scale,
                            (xb - spec.coord_origin) * spec.coord_scale))
    rep = EllipticityReport()
    s = spec.exponent
    for t, x, y in pts:
        d = float(periodic_distance(x, y, P))
        if d == 0:
            continue
        k = kernel_eval(spec, t, x, y)
        ratio = k * d**s
        rep.samples += 1
        rep.min_ratio = min(rep.min_ratio, ratio) if d <= 3 else rep.min_ratio
        rep.max_ratio = max(rep.max_ratio, ratio)
        lower = 1.0 / spec.lam if d <= 3 else 0.0
        if ratio > spec.lam * (1 + rtol) or ratio < lower * (1 - rtol):
            rep.violations.append({"t": t, "x": x, "y": y, "d": d, "ratio": ratio})
    return rep


def periodization_ratio(sigma, period):
    """Largest K/d^-(1+sigma) of the full periodised kernel (attained at d = period/2)."""
    d = period / 2
    return float(_periodized_power(d, 1 + sigma, period)[0] * d ** (1 + sigma))


# ---------------------------------------------------------------------------
# assembly


@dataclass(frozen=True)
class NonlocalOperator:
    grid: SpaceGrid
    weights: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=float)
        if W.shape != (self.grid.Nx, self.grid.Nx):
            raise ValueError("weight matrix shape does not match the grid")
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)

    @property
    def matrix(self):
        """Dense matrix A with A w == apply(op, w)."""
        W = np.array(self.weights)
        W[np.diag_indices_from(W)] = -W.sum(axis=1)
        return W

    def scaled(self, factor):
        return NonlocalOperator(self.grid, factor * self.weights)


def _cell_power_integral(d0, d1, sigma):
    """int_{d0}^{d1} r^-(1+sigma) dr for 0 < d0 <= d1."""
    return (d0 ** (-sigma) - d1 ** (-sigma)) / sigma


def _circulant_row(spec, grid):
    Nx, h, s = grid.Nx, grid.h, spec.sigma
    r = np.arange(Nx)
    q = np.minimum(r, Nx - r).astype(float)
    row = np.zeros(Nx)
    nz = q > 0
    if spec.mode is KernelMode.TRUNCATED:
        d0 = (q[nz] - 0.5) * h
        d1 = np.minimum((q[nz] + 0.5) * h, spec.radius)
        vals = np.where(d0 < spec.radius, _cell_power_integral(d0, np.maximum(d1, d0), s), 0.0)
        row[nz] = vals
        if spec.radius > grid.L / 2:
            raise ValueError("truncation radius exceeds half the torus; use the full mode")
    else:
        # sum over images of the cell integral; each image contributes
        # h^-s/s * [(m - 1/2)^-s - (m + 1/2)^-s] with m = |r + n Nx|
        for i in np.nonzero(nz)[0]:
            rr = float(r[i])
            # images on the right: m = rr + n Nx, n >= 0; on the left: m = n Nx - rr, n >= 1
            right, _ = power_tail([(1.0, (rr - 0.5) / Nx, s), (-1.0, (rr + 0.5) / Nx, s)], 0)
            left, _ = power_tail([(1.0, (-rr - 0.5) / Nx, s), (-1.0, (-rr + 0.5) / Nx, s)], 1)
            row[i] = (h * Nx) ** (-s) / s * (right + left)
    return row


def assemble(spec, grid, t=0.0):
    """Cell-integrated weights W[m, m'] = int_{cell m'} K(t, x_m, y) dy, self cell dropped."""
    if spec.mode is not KernelMode.TABULATED and abs(spec.period - grid.L) > 1e-12 * grid.L:
        raise ValueError(f"kernel period {spec.period} does not match grid length {grid.L}")
    Nx = grid.Nx
    if spec.mode is KernelMode.TABULATED:
        x = grid.nodes
        gl, gw = np.polynomial.legendre.leggauss(16)
        W = np.zeros((Nx, Nx))
        for mp in range(Nx):
            y = x[mp] + 0.5 * grid.h * gl
            for m in range(Nx):
                if m == mp:
                    continue
                vals = kernel_eval(spec, t, np.full_like(y, x[m]), y)
                W[m, mp] = 0.5 * grid.h * np.dot(gw, vals)
        W = 0.5 * (W + W.T)
    else:
        row = _circulant_row(spec, grid)
        idx = (np.arange(Nx)[None, :] - np.arange(Nx)[:, None]) % Nx
        W = spec.time_factor(t) * row[idx]
        W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    return NonlocalOperator(grid, W)


def _check_field(op, w):
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != op.grid.Nx:
        raise DomainError(f"field length {w.shape[-1]} does not match Nx={op.grid.Nx}")
    return w


def apply(op, w):
    """(Lw)_m = sum_{m' != m} W[m, m'] (w_m' - w_m)."""
    w = _check_field(op, w)
    W = op.weights
    return np.sum(W * (w[None, :] - w[:, None]), axis=1)


def bilinear(op, u, v):
    """1/2 h sum W[m,m'] (u_m - u_m')(v_m - v_m'), equal to -h <apply(op, u), v>."""
    u = _check_field(op, u)
    v = _check_field(op, v)
    du = u[:, None] - u[None, :]
    dv = v[:, None] - v[None, :]
    return float(0.5 * op.grid.h * np.sum(op.weights * du * dv))


def rescale_kernel(spec, R, t0=0.0, x0=0.0, alpha=None):
    """K_R(t, x, y) = R^-(1+sigma) K(t0 + t/R^(sigma/alpha), x0 + x/R, x0 + y/R)."""
    if R < 1:
        raise ValueError("rescaling factor must be >= 1")
    mult = spec.multiplier
    if mult is not None:
        if alpha is None:
            raise ValueError("alpha is needed to rescale a time-dependent kernel")
        tscale = R ** (spec.sigma / alpha)
        base = mult
        mult = lambda t: base(t0 + t / tscale)  # noqa: E731
    new = replace(
        spec,
        period=spec.period * R,
        radius=spec.radius * R,
        multiplier=mult,
        coord_origin=spec.coord_origin + x0 / spec.coord_scale,
        coord_scale=spec.coord_scale * R,
    )
    return new


def first_mode(grid, mode=1):
    """cos(2 pi mode x / L) sampled on the grid."""
    return np.cos(2 * np.pi * mode * grid.nodes / grid.L)


def mode_eigenvalue(op, mode=1):
    """mu >= 0 with apply(op, cos_mode) = -mu cos_mode (exact for circulant operators)."""
    v = first_mode(op.grid, mode)
    Av = apply(op, v)
    return float(-np.dot(Av, v) / np.dot(v, v))


MATRIX_MAGIC = b"FRACMAT\x00"


def save_matrix(op, path, meta=None):
    """Dense matrix A of ``op``: magic, u32 header length, JSON header, row-major <f8 entries."""
    hdr = {"format_version": 1, "Nx": op.grid.Nx, "L": op.grid.L, "dtype": "<f8", "order": "row-major"}
    hdr.update(meta or {})
    blob = json.dumps(hdr, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(op.matrix, dtype="<f8").tobytes())


def load_matrix(path):
    """Return (header, matrix) written by :func:`save_matrix`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    m = len(MATRIX_MAGIC)
    if raw[:m] != MATRIX_MAGIC or len(raw) < m + 4:
        raise FormatError(f"{path}: not a matrix file")
    (n,) = struct.unpack_from("<I", raw, m)
    try:
        hdr = json.loads(raw[m + 4 : m + 4 + n].decode())
        N = int(hdr["Nx"])
    except (UnicodeDecodeError, ValueError, KeyError) as exc:
        raise FormatError(f"{path}: unreadable header") from exc
    body = raw[m + 4 + n :]
    if len(body) != N * N * 8:
        raise FormatError(f"{path}: expected {N * N * 8} data bytes, found {len(body)}")
    return hdr, np.frombuffer(body, dtype="<f8").reshape(N, N).astype(float)
