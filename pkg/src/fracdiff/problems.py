"""Named forcing terms, initial fields and kernel time multipliers.

Everything a configuration file can name lives here, so a trajectory header
holding ``{"name": ..., **params}`` is enough to rebuild the problem.
"""

import math

import numpy as np


def _need(desc, *keys):
    missing = [k for k in keys if k not in desc]
    if missing:
        raise ValueError(f"{desc.get('name')!r} needs parameter(s) {', '.join(missing)}")


def _check_keys(desc, allowed):
    extra = set(desc) - set(allowed) - {"name"}
    if extra:
        raise ValueError(f"unknown parameter(s) for {desc['name']!r}: {', '.join(sorted(extra))}")


# --- forcing f(t, x) -------------------------------------------------------

def _f_zero(d, L):
    return lambda t, x: np.zeros_like(x), 0.0


def _f_constant(d, L):
    c = float(d["value"])
    return lambda t, x: np.full_like(x, c), abs(c)


def _f_mode(d, L):
    amp, m = float(d["amplitude"]), int(d.get("mode", 1))
    return lambda t, x: amp * np.cos(2 * math.pi * m * x / L), abs(amp)


def _f_smooth(d, L):
    amp, m, om = float(d["amplitude"]), int(d.get("mode", 1)), float(d.get("frequency", 1.0))
    return (lambda t, x: amp * math.cos(om * t) * np.cos(2 * math.pi * m * x / L)), abs(amp)


FORCING = {
    "zero": (_f_zero, (), ()),
    "constant": (_f_constant, ("value",), ()),
    "mode": (_f_mode, ("amplitude",), ("mode",)),
    "smooth": (_f_smooth, ("amplitude",), ("mode", "frequency")),
}


def make_forcing(desc, L):
    """Return (f, sup-norm bound) for a forcing description."""
    desc = dict(desc or {"name": "zero"})
    name = desc.get("name")
    if name not in FORCING:
        raise ValueError(f"unknown forcing {name!r}; choose from {sorted(FORCING)}")
    fn, req, opt = FORCING[name]
    _need(desc, *req)
    _check_keys(desc, req + opt)
    return fn(desc, L)


# --- initial data w0(x) ----------------------------------------------------

def _w_constant(d, x, L):
    return np.full_like(x, float(d["value"]))


def _w_eigenmode(d, x, L):
    return float(d.get("amplitude", 1.0)) * np.cos(2 * math.pi * int(d.get("mode", 1)) * x / L)


def _w_random(d, x, L):
    rng = np.random.default_rng(int(d["seed"]))
    return rng.uniform(float(d.get("low", -1.0)), float(d.get("high", 1.0)), size=x.shape)


def _w_bump(d, x, L):
    c, wdt, hgt = float(d.get("center", L / 2)), float(d.get("width", 1.0)), float(d.get("height", 1.0))
    r = np.abs((x - c + L / 2) % L - L / 2) / wdt
    out = np.zeros_like(x)
    inside = r < 1
    out[inside] = hgt * np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def _w_smooth(d, x, L):
    amps = [float(v) for v in d.get("amplitudes", [1.0, 0.5, 0.25])]
    return sum(A * np.cos(2 * math.pi * (m + 1) * x / L + 0.3 * m) for m, A in enumerate(amps))


INITIAL = {
    "zero": (lambda d, x, L: np.zeros_like(x), (), ()),
    "constant": (_w_constant, ("value",), ()),
    "eigenmode": (_w_eigenmode, (), ("mode", "amplitude")),
    "random": (_w_random, ("seed",), ("low", "high")),
    "bump": (_w_bump, (), ("center", "width", "height")),
    "smooth": (_w_smooth, (), ("amplitudes",)),
}


def make_initial(desc, grid):
    desc = dict(desc)
    name = desc.get("name")
    if name not in INITIAL:
        raise ValueError(f"unknown initial field {name!r}; choose from {sorted(INITIAL)}")
    fn, req, opt = INITIAL[name]
    _need(desc, *req)
    _check_keys(desc, req + opt)
    return np.asarray(fn(desc, grid.nodes, grid.L), dtype=float)


# --- kernel time multipliers ----------------------------------------------

def _m_constant(d):
    v = float(d["value"])
    return lambda t: v


def _m_oscillating(d):
    mean, amp, fr = float(d["mean"]), float(d["amplitude"]), float(d.get("frequency", 1.0))
    return lambda t: mean + amp * math.sin(2 * math.pi * fr * t)


MULTIPLIERS = {
    "constant": (_m_constant, ("value",), ()),
    "oscillating": (_m_oscillating, ("mean", "amplitude"), ("frequency",)),
}


def make_multiplier(desc):
    if desc is None:
        return None
    desc = dict(desc)
    name = desc.get("name")
    if name not in MULTIPLIERS:
        raise ValueError(f"unknown multiplier {name!r}; choose from {sorted(MULTIPLIERS)}")
    fn, req, opt = MULTIPLIERS[name]
    _need(desc, *req)
    _check_keys(desc, req + opt)
    return fn(desc)


def multiplier_range(desc):
    """(min, max) of a described multiplier over all t."""
    if desc is None:
        return 1.0, 1.0
    if desc["name"] == "constant":
        v = float(desc["value"])
        return v, v
    mean, amp = float(desc["mean"]), abs(float(desc["amplitude"]))
    return mean - amp, mean + amp
