"""Backward-in-time extension of a problem by frozen initial data."""

import math
from dataclasses import replace

import numpy as np

from ..fractime import TimeGrid
from ..march import Problem
from ..spaceop import apply, assemble

EXTENSION_LENGTH = 5.0


def backward_extension_problem(problem, length=EXTENSION_LENGTH):
    """Problem on [a - n eps, T] whose solution is w0 before a and the original after.

    n = ceil(length / eps) keeps the nodes aligned with the original grid.
    Before (and at) a the forcing is -A(a) w0, which makes the frozen field
    w0 an exact solution of the scheme there; after a it is the original f.
    A time-dependent kernel keeps its value at a for all earlier times.
    """
    tg = problem.tgrid
    eps = tg.eps
    n_ext = int(math.ceil(length / eps - 1e-9))
    a_new = tg.a - n_ext * eps
    new_grid = TimeGrid(a_new, tg.T, tg.k + n_ext)
    kern = problem.kernel
    a0 = tg.a
    if kern.multiplier is not None:
        base_mult = kern.multiplier
        new_kern = replace(kern, multiplier=lambda t: base_mult(max(t, a0)), multiplier_desc=None)
    else:
        new_kern = kern
    op = assemble(kern, problem.sgrid, a0)
    Lw0 = apply(op, problem.w0)
    bound = float(np.max(np.abs(Lw0)))
    if not math.isfinite(bound):
        raise ValueError("A w0 is not finite")
    f = problem.f
    cut = a0 + 0.5 * eps

    def forcing(t, x):
        if t <= cut:
            return -Lw0
        return np.zeros_like(x) if f is None else f(t, x)

    desc = {"name": "backward_extension", "base": problem.f_desc, "length": n_ext * eps}
    return Problem(
        new_grid,
        problem.sgrid,
        problem.alpha,
        new_kern,
        problem.w0,
        forcing,
        max(problem.f_bound, bound),
        desc,
        problem.w0_desc,
    )


def restrict_to_original(ext_traj, n_original_steps):
    """Rows of an extended trajectory that correspond to the original nodes 0..k."""
    return ext_traj.fields[-(n_original_steps + 1):]
