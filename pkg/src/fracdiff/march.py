"""Implicit time marching of the discrete fractional-in-time scheme.

At step j the scheme reads

    alpha eps^-alpha [ zeta(1+alpha) w_j - sum_{m=1}^j m^-(1+alpha) w_{j-m} - tau_j w_0 ]
        = A_j w_j + f_j

where the history before ``a`` is frozen at ``w_0``.  The diagonal weight is
the same at every step, so one factorization serves the whole run when the
kernel does not depend on time.
"""

import json
import logging
import struct
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from . import problems
from ._sums import zeta
from .errors import FormatError, SolverError
from .fractime import (
    FracOrder,
    HistoryExtension,
    TimeGrid,
    as_order,
    discrete_caputo_values,
    tail_coefficients,
)
from .spaceop import KernelMode, KernelSpec, SpaceGrid, apply, assemble

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAGIC = b"FRACTRJ\x00"
CSV_VERSION = "# fracdiff-trajectory-csv v1"
DIRECT_LIMIT = 512


@dataclass(frozen=True)
class Problem:
    tgrid: TimeGrid
    sgrid: SpaceGrid
    alpha: FracOrder
    kernel: KernelSpec
    w0: np.ndarray
    f: Optional[Callable] = None
    f_bound: float = 0.0
    f_desc: Optional[dict] = None
    w0_desc: Optional[dict] = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_order(self.alpha))
        w0 = np.array(self.w0, dtype=float)
        if w0.shape != (self.sgrid.Nx,):
            raise ValueError(f"w0 must have length Nx={self.sgrid.Nx}, got shape {w0.shape}")
        if not np.all(np.isfinite(w0)):
            raise ValueError("w0 must be finite")
        w0.setflags(write=False)
        object.__setattr__(self, "w0", w0)
        if self.f_bound < 0:
            raise ValueError("declared forcing bound must be >= 0")

    def forcing(self, j):
        """f sampled at (a + eps j, x_m)."""
        x = self.sgrid.nodes
        if self.f is None:
            return np.zeros_like(x)
        return np.asarray(self.f(self.tgrid.node(j), x), dtype=float) * np.ones_like(x)

    def forcing_all(self):
        F = np.stack([self.forcing(j) for j in range(self.tgrid.k + 1)])
        if not np.all(np.isfinite(F)):
            raise ValueError("forcing is not finite on the grid")
        sup = float(np.max(np.abs(F)))
        if sup > self.f_bound * (1 + 1e-12) + 1e-300:
            raise ValueError(f"declared |f| bound {self.f_bound} is below the sampled sup {sup}")
        return F


def make_problem(a, T, k, L, Nx, alpha, kernel, f=None, w0=None):
    """Build a :class:`Problem` from registry descriptions.

    ``kernel`` is a KernelSpec or a dict with keys sigma, lam, mode and
    optional radius, table, multiplier.  ``f`` and ``w0`` are descriptions
    understood by :mod:`fracdiff.problems`.
    """
    tg = TimeGrid(a, T, k)
    sg = SpaceGrid(L, Nx)
    if isinstance(kernel, dict):
        kernel = kernel_from_desc(kernel, L)
    f_desc = dict(f or {"name": "zero"})
    w0_desc = dict(w0 or {"name": "zero"})
    fn, bound = problems.make_forcing(f_desc, L)
    if f_desc["name"] == "zero":
        fn = None
    return Problem(tg, sg, alpha, kernel, problems.make_initial(w0_desc, sg), fn, bound, f_desc, w0_desc)


def kernel_from_desc(d, L):
    d = dict(d)
    mult_desc = d.get("multiplier")
    tab = d.get("table")
    return KernelSpec(
        sigma=float(d["sigma"]),
        lam=float(d.get("lam", 1.0)),
        mode=KernelMode(d.get("mode", "full")),
        period=float(L),
        radius=float(d.get("radius", 3.0)),
        table=None if tab is None else np.asarray(tab, dtype=float),
        multiplier=problems.make_multiplier(mult_desc),
        multiplier_desc=mult_desc,
    )


def kernel_desc(spec):
    d = {"sigma": spec.sigma, "lam": spec.lam, "mode": spec.mode.value, "radius": spec.radius}
    if spec.table is not None:
        d["table"] = spec.table.tolist()
    if spec.multiplier_desc is not None:
        d["multiplier"] = spec.multiplier_desc
    elif spec.multiplier is not None:
        d["multiplier"] = {"name": "custom"}
    return d


# ---------------------------------------------------------------------------


class _Stepper:
    """Holds the base operator and factorization shared by all steps."""

    def __init__(self, problem):
        self.p = problem
        al = problem.alpha.alpha
        eps = problem.tgrid.eps
        self.scale = al * eps ** (-al)
        self.c0 = self.scale * zeta(1.0 + al)
        self.base = assemble(replace(problem.kernel, multiplier=None), problem.sgrid)
        self.A = self.base.matrix
        self.timedep = problem.kernel.multiplier is not None
        self.Nx = problem.sgrid.Nx
        self._chol = None
        self._eig = None
        if self.Nx <= DIRECT_LIMIT:
            if self.timedep:
                lam, Q = scipy.linalg.eigh(self.A)
                self._eig = (lam, Q)
            else:
                M = self.c0 * np.eye(self.Nx) - self.A
                self._chol = scipy.linalg.cho_factor(M, lower=True)
        k = problem.tgrid.k
        self.c = np.arange(1, k + 1, dtype=float) ** (-(1.0 + al))
        self.tau = tail_coefficients(al, k)

    def operator_factor(self, j):
        return 1.0 if not self.timedep else self.p.kernel.time_factor(self.p.tgrid.node(j))

    def rhs(self, history, j, fj):
        # history rows are w_0 .. w_{j-1}; load = sum_m c_m w_{j-m} + tau_j w_0
        past = history[j - 1::-1] if j > 0 else history[:0]
        load = self.c[:j] @ past[:j] + self.tau[j] * history[0]
        return fj + self.scale * load

    def solve(self, b, j):
        s = self.operator_factor(j)
        if self._chol is not None:
            return scipy.linalg.cho_solve(self._chol, b), 0
        if self._eig is not None:
            lam, Q = self._eig
            return Q @ ((Q.T @ b) / (self.c0 - s * lam)), 0
        M = self.c0 * np.eye(self.Nx) - s * self.A
        diag = np.diag(M)
        pre = scipy.sparse.linalg.LinearOperator(M.shape, matvec=lambda v: v / diag)
        iters = [0]

        def cb(_):
            iters[0] += 1

        x, info = scipy.sparse.linalg.cg(M, b, rtol=1e-12, atol=0.0, M=pre, callback=cb, maxiter=10 * self.Nx)
        if info != 0:
            raise SolverError(f"conjugate gradient stopped with info={info}", j,
                              [f"iterations={iters[0]}", f"residual={np.linalg.norm(M @ x - b):.3e}"])
        return x, iters[0]


def step(history, problem, j, _stepper=None):
    """Solve for w_j given rows w_0..w_{j-1} of ``history``."""
    if not 1 <= j <= problem.tgrid.k:
        raise ValueError(f"step index {j} outside 1..{problem.tgrid.k}")
    history = np.asarray(history, dtype=float)
    if history.shape[0] < j or history.shape[1:] != (problem.sgrid.Nx,):
        raise ValueError("history must hold fields 0..j-1")
    st = _stepper or _Stepper(problem)
    b = st.rhs(history, j, problem.forcing(j))
    w, _ = st.solve(b, j)
    return w


@dataclass(frozen=True)
class Trajectory:
    problem: Problem
    fields: np.ndarray
    solver_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        F = np.array(self.fields, dtype=float)
        if F.shape != (self.problem.tgrid.k + 1, self.problem.sgrid.Nx):
            raise ValueError(f"fields have shape {F.shape}, expected {(self.problem.tgrid.k + 1, self.problem.sgrid.Nx)}")
        F.setflags(write=False)
        object.__setattr__(self, "fields", F)

    @property
    def times(self):
        return self.problem.tgrid.nodes

    @property
    def x(self):
        return self.problem.sgrid.nodes


def run(problem, residual_tol=1e-10, check_residual=True, strict=True):
    """March j = 1..k.  Every step is checked against the scheme residual.

    With ``strict`` a residual above ``residual_tol * (1 + |w_j|)`` raises
    :class:`SolverError`; otherwise the offending steps are listed in
    ``solver_meta["residual_exceeded"]``.
    """
    t0 = time.perf_counter()
    st = _Stepper(problem)
    k = problem.tgrid.k
    F = problem.forcing_all()
    W = np.empty((k + 1, problem.sgrid.Nx))
    W[0] = problem.w0
    residuals = [0.0]
    iterations = [0]
    exceeded = []
    for j in range(1, k + 1):
        try:
            w, its = st.solve(st.rhs(W, j, F[j]), j)
        except SolverError:
            raise
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverError(str(exc), j) from exc
        W[j] = w
        iterations.append(its)
        if check_residual:
            r = _residual(W, problem, j, st, F[j])
            residuals.append(r)
            if r > residual_tol * (1 + np.max(np.abs(w))):
                if strict:
                    raise SolverError(f"scheme residual {r:.3e} above tolerance", j)
                exceeded.append(j)
    meta = {
        "residuals": residuals if check_residual else [],
        "iterations": iterations,
        "residual_exceeded": exceeded,
        "wall_time": time.perf_counter() - t0,
    }
    log.info("run finished: k=%d Nx=%d in %.2fs", k, problem.sgrid.Nx, meta["wall_time"])
    return Trajectory(problem, W, meta)


def _residual(W, problem, j, st, fj):
    # independent path: the Caputo derivative from fractime, the operator
    # freshly applied in difference form
    eps = problem.tgrid.eps
    dtw = discrete_caputo_values(W[: j + 1], problem.alpha, eps, j, HistoryExtension.CONSTANT_BEFORE_A)
    Lw = st.operator_factor(j) * apply(st.base, W[j])
    return float(np.max(np.abs(dtw - Lw - fj)))


def scheme_residual(traj, j, op=None):
    """max_x |d_eps w_j - A_j w_j - f_j| computed without the stepping weights.

    ``op`` may supply A_j already assembled.
    """
    p = traj.problem
    if not 1 <= j <= p.tgrid.k:
        raise ValueError(f"index {j} outside 1..{p.tgrid.k}")
    dtw = discrete_caputo_values(traj.fields[: j + 1], p.alpha, p.tgrid.eps, j, HistoryExtension.CONSTANT_BEFORE_A)
    if op is None:
        op = assemble(p.kernel, p.sgrid, p.tgrid.node(j))
    return float(np.max(np.abs(dtw - apply(op, traj.fields[j]) - p.forcing(j))))


def scheme_residuals(traj):
    """scheme_residual at every step 1..k; the operator is assembled once when it is constant in time."""
    p = traj.problem
    fixed = assemble(p.kernel, p.sgrid, p.tgrid.a) if p.kernel.multiplier is None else None
    return np.array([scheme_residual(traj, j, fixed) for j in range(1, p.tgrid.k + 1)])


def scalar_recursion(alpha, eps, k, mu, u0=1.0, f=0.0):
    """Amplitudes of the one-mode scheme d_eps u = -mu u + f."""
    al = as_order(alpha).alpha
    scale = al * eps ** (-al)
    tau = tail_coefficients(al, k)
    c = np.arange(1, k + 1, dtype=float) ** (-(1.0 + al))
    u = np.empty(k + 1)
    u[0] = u0
    for j in range(1, k + 1):
        load = np.dot(c[:j], u[j - 1::-1][:j]) + tau[j] * u0
        u[j] = (f + scale * load) / (scale * tau[0] + mu)
    return u


# ---------------------------------------------------------------------------
# persistence


def _header(traj):
    p = traj.problem
    return {
        "format_version": FORMAT_VERSION,
        "a": p.tgrid.a,
        "T": p.tgrid.T,
        "k": p.tgrid.k,
        "Nx": p.sgrid.Nx,
        "L": p.sgrid.L,
        "alpha": p.alpha.alpha,
        "sigma": p.kernel.sigma,
        "lam": p.kernel.lam,
        "kernel_mode": p.kernel.mode.value,
        "kernel": kernel_desc(p.kernel),
        "f": p.f_desc or ({"name": "zero"} if p.f is None else {"name": "custom"}),
        "f_bound": p.f_bound,
        "w0": p.w0_desc or {"name": "custom"},
        "dtype": "<f8",
        "order": "row-major",
    }


def save_trajectory(traj, path):
    """Binary container: magic, u32 header length, JSON header, little-endian float64 fields."""
    hdr = json.dumps(_header(traj), sort_keys=True, separators=(",", ":")).encode()
    data = np.ascontiguousarray(traj.fields, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(hdr)))
        fh.write(hdr)
        fh.write(data)


def read_container(path):
    """Return (header dict, fields array) after validating the layout."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not a trajectory container (bad magic)")
    (n,) = struct.unpack_from("<I", raw, len(MAGIC))
    start = len(MAGIC) + 4
    if len(raw) < start + n:
        raise FormatError(f"{path}: truncated header")
    try:
        hdr = json.loads(raw[start : start + n].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable header ({exc})") from exc
    if hdr.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {hdr.get('format_version')!r}")
    try:
        shape = (int(hdr["k"]) + 1, int(hdr["Nx"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: header lacks k/Nx") from exc
    body = raw[start + n :]
    expect = shape[0] * shape[1] * 8
    if len(body) != expect:
        raise FormatError(f"{path}: data section has {len(body)} bytes, expected {expect} (truncated or padded)")
    fields = np.frombuffer(body, dtype="<f8").reshape(shape).astype(float)
    return hdr, fields


def load_trajectory(path):
    hdr, fields = read_container(path)
    try:
        kern = dict(hdr["kernel"])
        if kern.get("multiplier", {}).get("name") == "custom":
            raise FormatError(f"{path}: custom kernel multiplier cannot be rebuilt")
        tg = TimeGrid(hdr["a"], hdr["T"], hdr["k"])
        sg = SpaceGrid(hdr["L"], hdr["Nx"])
        spec = kernel_from_desc(kern, hdr["L"])
        f_desc = hdr["f"]
        if f_desc.get("name") == "custom":
            raise FormatError(f"{path}: custom forcing cannot be rebuilt")
        fn, _ = problems.make_forcing(f_desc, sg.L)
        if f_desc["name"] == "zero":
            fn = None
        w0_desc = hdr["w0"]
        prob = Problem(tg, sg, hdr["alpha"], spec, fields[0], fn, hdr["f_bound"], f_desc, w0_desc)
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: invalid header ({exc})") from exc
    return Trajectory(prob, fields, {})


def export_csv(traj, path):
    tg, sg = traj.problem.tgrid, traj.problem.sgrid
    t = tg.nodes
    x = sg.nodes
    with open(path, "w") as fh:
        fh.write(CSV_VERSION + "\n")
        fh.write("j,t,m,x,w\n")
        for j in range(tg.k + 1):
            for m in range(sg.Nx):
                fh.write(f"{j},{t[j]!r},{m},{x[m]!r},{traj.fields[j, m]!r}\n")
