"""Command-line entry point.

Exit codes: 0 success, 1 a check failed, 2 invalid configuration or file
format, 3 solver failure, 4 domain or regime error.
"""

import argparse
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np
from threadpoolctl import threadpool_limits

from . import march
from .config import ConfigError, load_config
from .diagnostics import (
    BarrierFamily,
    BarrierKind,
    backward_extension_problem,
    barrier_eval,
    default_delta,
    difference_quotient_scan,
    energy_decompose_gap,
    holder_fit,
    level_set_measure,
    oscillation_scan,
    phi,
    restrict_to_original,
    truncation_energy,
    weak_residual,
)
from .errors import DomainError, FormatError, SolverError
from .fractime import TimeGrid, TimeSeries, barrier_bound_check, barrier_monotone_defect
from .report import ReportDocument, write_csv
from .spaceop import KernelMode, assemble, first_mode, mode_eigenvalue, save_matrix
from .special import eigenmode_reference

log = logging.getLogger("fracdiff")

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_SOLVER, EXIT_DOMAIN = 0, 1, 2, 3, 4
SUITES = ("maxprinciple", "energy", "barriers", "weakform", "uniqueness")


class UsageError(Exception):
    pass


def _setup_logging():
    level = os.environ.get("FRACDIFF_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _problem_from_config(cfg, k=None, Nx=None):
    pr = cfg.problem
    return march.make_problem(
        pr["a"], pr["T"], k or pr["k"], pr["L"], Nx or pr["Nx"], pr["alpha"], pr["kernel"], pr["f"], pr["w0"]
    )


def _outdir(args, cfg=None):
    d = args.out or (cfg.output if cfg is not None else None) or "."
    os.makedirs(d, exist_ok=True)
    return d


def default_test_function(L, a):
    """Smooth bump of half-width min(2, L/4) centred on the torus, growing in time."""
    c, w = L / 2, min(2.0, L / 4)

    def fn(t, x):
        r = (np.asarray(x, dtype=float) - c) / w
        out = np.zeros_like(r)
        inside = np.abs(r) < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
        return out * (1.0 + (t - a))

    return fn


def _residual_checks(rep, traj, tol):
    res = np.asarray(traj.solver_meta.get("residuals", []), dtype=float)
    norms = np.max(np.abs(traj.fields), axis=1)
    ratio = res[1:] / (1 + norms[1 : res.size]) if res.size > 1 else np.zeros(0)
    worst = float(ratio.max()) if ratio.size else 0.0
    rep.add("scheme_residual", worst <= tol, worst, tol, "max_j residual_j / (1 + |w_j|)")
    return worst


# ---------------------------------------------------------------------------


def cmd_solve(args):
    cfg = load_config(args.config)
    out = _outdir(args, cfg)
    prob = _problem_from_config(cfg)
    traj = march.run(prob, residual_tol=cfg.tolerances["residual"], strict=False)
    rep = ReportDocument("solve", cfg.echo(), args.threads_used)
    worst = _residual_checks(rep, traj, cfg.tolerances["residual"])
    path = os.path.join(out, "trajectory.frt")
    march.save_trajectory(traj, path)
    csv = os.path.join(out, "trajectory.csv")
    march.export_csv(traj, csv)
    rep.artifacts += ["trajectory.frt", "trajectory.csv"]
    if args.export_operator:
        save_matrix(assemble(prob.kernel, prob.sgrid, prob.tgrid.a), os.path.join(out, "operator.frm"),
                    {"kernel": march.kernel_desc(prob.kernel), "t": prob.tgrid.a})
        rep.artifacts.append("operator.frm")
    rep.data["steps"] = prob.tgrid.k
    rep.data["sup_norm_final"] = float(np.max(np.abs(traj.fields[-1])))
    rep.write(out)
    print(f"solve: k={prob.tgrid.k} Nx={prob.sgrid.Nx} max relative residual {worst:.3e} -> {path}")
    return EXIT_OK if rep.ok else EXIT_CHECK


def _suite_maxprinciple(rep, traj, cfg):
    p = traj.problem
    tol = cfg.tolerances["maxprinciple"]
    st = march._Stepper(p)
    M = st.c0 * np.eye(p.sgrid.Nx) - st.A
    off = M - np.diag(np.diag(M))
    rep.add("m_matrix_diagonal_positive", bool(np.all(np.diag(M) > 0)), float(np.min(np.diag(M))), 0.0)
    rep.add("m_matrix_offdiagonal_nonpositive", bool(np.all(off <= 0)), float(np.max(off)), 0.0)
    if p.f is not None:
        rep.skip("max_principle_bounds", "forcing is not zero")
        return
    lo, hi = float(p.w0.min()), float(p.w0.max())
    over = max(float(traj.fields.max()) - hi, lo - float(traj.fields.min()), 0.0)
    rep.add("max_principle_bounds", over <= tol, over, tol, "excursion outside [min w0, max w0]")


def _suite_energy(rep, traj, cfg):
    p = traj.problem
    al = p.alpha.alpha
    tol = cfg.tolerances["energy"]
    rng = np.random.default_rng(cfg.seed)
    worst = math.inf
    n = cfg.diagnostics["energy_trials"]
    for _ in range(n):
        k = int(rng.choice([16, 64, 256]))
        v = rng.normal(size=k + 1)
        if rng.random() < 0.5:
            v[0] = 0.0
        g = energy_decompose_gap(TimeSeries(TimeGrid(0.0, 1.0, k), v), al)
        worst = min(worst, g.slack / g.scale)
    rep.add("energy_random_series", worst >= -tol, worst, -tol, f"min slack/scale over {n} series")
    # the time series of the trajectory at a few spatial points
    idx = np.linspace(0, p.sgrid.Nx - 1, 4).astype(int)
    worst_t = math.inf
    for m in idx:
        g = energy_decompose_gap(TimeSeries(p.tgrid, traj.fields[:, m]), al)
        worst_t = min(worst_t, g.slack / g.scale)
    rep.add("energy_trajectory_series", worst_t >= -tol, worst_t, -tol)


def _suite_barriers(rep, traj, cfg):
    al = traj.problem.alpha.alpha
    sig = traj.problem.kernel.sigma
    nu = al / 2
    worst = math.inf
    mono = -math.inf
    for a in (-2.0, -10.0):
        for eps in (0.1, 0.01):
            g = TimeGrid.from_step(a, 0.0, eps)
            b = barrier_bound_check(nu, al, g)
            worst = min(worst, b.minimum + b.reference)
            mono = max(mono, barrier_monotone_defect(nu, al, g))
    rep.add("barrier_lower_bound", worst >= 0, worst, 0.0, "min over (a, eps) of min d h + c")
    rep.add("barrier_monotone", mono <= 1e-12, mono, 1e-12)
    t = np.linspace(-6, 0, 241)[:, None]
    x = np.linspace(-6, 6, 241)[None, :]
    psi = barrier_eval(BarrierFamily(BarrierKind.PSI, sigma=sig, alpha=al), t, x)
    psib = barrier_eval(BarrierFamily(BarrierKind.PSI_BAR, sigma=sig, alpha=al), t, x)
    inner = (t >= -1) & (np.abs(x) <= 1)
    rep.add("psi_vanishes_inner", float(np.max(np.abs(np.where(inner, psi, 0)))) == 0.0,
            float(np.max(np.where(inner, psi, 0))), 0.0)
    rep.add("psi_bar_below_psi", bool(np.all(psib <= psi + 1e-15)), float(np.max(psib - psi)), 0.0)
    lam = cfg.diagnostics["lambda"]
    vals = [barrier_eval(phi(i, lam, sig, al), t, x) for i in range(5)]
    neg = (barrier_eval(BarrierFamily(BarrierKind.F1), t, x) + barrier_eval(BarrierFamily(BarrierKind.F2), t, x)) < 0
    gap = min(float(np.min(np.where(neg, vals[i + 1] - vals[i], 0))) for i in range(4))
    rep.add("phi_monotone_in_i", gap >= 0, gap, 0.0)


def _suite_weakform(rep, traj, cfg):
    p = traj.problem
    w = weak_residual(traj, default_test_function(p.sgrid.L, p.tgrid.a))
    scale = max(abs(v) for v in w.terms.values()) or 1.0
    rel = w.residual / scale
    tol = cfg.tolerances["weak_relative"]
    rep.add("weak_residual_relative", rel <= tol, rel, tol)
    rep.data["weak_terms"] = w.terms
    rep.data["weak_residual"] = w.residual


def _suite_uniqueness(rep, traj, cfg):
    p = traj.problem
    again = march.run(p, strict=False)
    same = bool(np.array_equal(again.fields, traj.fields))
    rep.add("rerun_bitwise_identical", same, int(np.count_nonzero(again.fields != traj.fields)), 0)
    diff = replace(p, w0=np.zeros_like(p.w0), f=None, f_bound=0.0, f_desc={"name": "zero"},
                   w0_desc={"name": "zero"})
    z = march.run(diff, strict=False)
    sup = float(np.max(np.abs(z.fields)))
    tol = cfg.tolerances["uniqueness"]
    rep.add("difference_problem_zero", sup <= tol, sup, tol)


_SUITE_FUNCS = {
    "maxprinciple": _suite_maxprinciple,
    "energy": _suite_energy,
    "barriers": _suite_barriers,
    "weakform": _suite_weakform,
    "uniqueness": _suite_uniqueness,
}


def _cfg_or_default(args):
    if getattr(args, "config", None):
        return load_config(args.config)
    from .config import parse_config

    # a minimal stand-in so suite defaults are available without a config file
    return parse_config('{"problem": {"a": 0, "T": 1, "k": 1, "L": 8, "Nx": 8, "alpha": 0.5,'
                        ' "kernel": {"sigma": 1, "mode": "full"}}}', "<defaults>")


def cmd_verify(args):
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    cfg = _cfg_or_default(args)
    traj = march.load_trajectory(args.trajectory)
    rep = ReportDocument(f"verify:{args.suite}", cfg.echo() if args.config else {}, args.threads_used)
    rep.artifacts.append(os.path.basename(args.trajectory))
    _SUITE_FUNCS[args.suite](rep, traj, cfg)
    out = _outdir(args)
    rep.write(out, f"verify_{args.suite}.json")
    for c in rep.checks:
        print(f"{c.status.upper():4s} {c.name}: measured={c.measured} threshold={c.threshold}")
    return EXIT_OK if rep.ok else EXIT_CHECK


def cmd_degiorgi(args):
    cfg = _cfg_or_default(args)
    traj = march.load_trajectory(args.trajectory)
    p = traj.problem
    d = cfg.diagnostics
    out = _outdir(args)
    t0 = d.get("t0", p.tgrid.T)
    x0 = d.get("x0", p.sgrid.L / 4)
    rep = ReportDocument("degiorgi", cfg.echo() if args.config else {}, args.threads_used)
    scan = oscillation_scan(traj, t0, x0, d["gamma"], d["depth"])
    if scan.truncated:
        raise DomainError(
            f"depth {d['depth']} needs scales below the resolvable limit {scan.limiting_scale:g} "
            f"(only {scan.osc.size} scales available)"
        )
    rows = [(k, scan.radii[k], scan.time_spans[k], scan.osc[k]) for k in range(scan.osc.size)]
    write_csv(os.path.join(out, "oscillation.csv"), ["k", "radius", "time_span", "osc"], rows)
    rep.artifacts.append("oscillation.csv")
    mono = bool(np.all(np.diff(scan.osc) <= scan.noise_floor))
    rep.add("osc_nonincreasing", mono, scan.osc.tolist(), "nonincreasing")
    if scan.osc.size >= 3:
        fit = holder_fit(scan)
        rep.data["beta_hat"] = fit.beta
        rep.data["beta_sentinel"] = fit.sentinel
        rep.data["fit_residual"] = fit.residual
    sig, al = p.kernel.sigma, p.alpha.alpha
    rel_t = traj.times - p.tgrid.T
    if rel_t[0] <= 0:
        lev = truncation_energy(traj, BarrierFamily(BarrierKind.PSI, sigma=sig, alpha=al), d["k_max"],
                                x_center=x0)
        write_csv(os.path.join(out, "levels.csv"), ["k", "level", "U"],
                  [(k, lev.levels[k], lev.values[k]) for k in range(lev.levels.size)])
        rep.artifacts.append("levels.csv")
        rep.add("U_nonincreasing", bool(np.all(np.diff(lev.values) <= 0)), lev.values.tolist(), "nonincreasing")
    lam = d["lambda"]
    if p.tgrid.T - p.tgrid.a >= 3.0 and p.sgrid.L / 2 >= 2.0:
        below = level_set_measure(traj, phi(0, lam, sig, al), ((-3.0, -2.0), 1.0), "below", x_center=x0)
        above = level_set_measure(traj, phi(4, lam, sig, al), ((-2.0, 0.0), 2.0), "above", x_center=x0)
        rep.data["measure_below_phi0"] = below
        rep.data["measure_above_phi4"] = above
        rep.data["delta"] = default_delta(1, al, sig)
    else:
        rep.data["level_set_note"] = "window shorter than 3 time units; measure-shrinking regions skipped"
    rep.write(out, "degiorgi.json")
    beta = rep.data.get("beta_hat")
    print(f"degiorgi: osc={np.array2string(scan.osc, precision=4)} beta_hat={beta}")
    return EXIT_OK if rep.ok else EXIT_CHECK


def _shared_difference(coarse, fine):
    """sup |w_coarse - w_fine| over nodes present on both grids."""
    tc, tf = coarse.times, fine.times
    xc, xf = coarse.x, fine.x
    it = [int(np.argmin(np.abs(tf - t))) for t in tc]
    ix = [int(np.argmin(np.abs(xf - x))) for x in xc]
    keep_t = [i for i, j in enumerate(it) if abs(tf[j] - tc[i]) <= 1e-9 * max(1.0, abs(tc[i]))]
    keep_x = [i for i, j in enumerate(ix) if abs(xf[j] - xc[i]) <= 1e-9 * max(1.0, abs(xc[i]))]
    A = coarse.fields[np.ix_(keep_t, keep_x)]
    B = fine.fields[np.ix_([it[i] for i in keep_t], [ix[i] for i in keep_x])]
    return float(np.max(np.abs(A - B)))


def cmd_converge(args):
    cfg = load_config(args.config)
    ladder = cfg.ladder
    if args.ladder:
        ladder = [tuple(int(v) for v in r.lower().split("x")) for r in args.ladder.split(",")]
    if len(ladder) < 2:
        raise UsageError("a ladder needs at least two rungs")
    out = _outdir(args, cfg)
    rep = ReportDocument("converge", cfg.echo(), args.threads_used)
    rungs, weak = [], []
    status = EXIT_OK
    L, a = cfg.problem["L"], cfg.problem["a"]
    test_fn = default_test_function(L, a)
    for k, Nx in ladder:
        try:
            tr = march.run(_problem_from_config(cfg, k, Nx), residual_tol=cfg.tolerances["residual"])
        except SolverError as exc:
            log.error("rung (%d, %d) failed: %s", k, Nx, exc)
            rep.data["failed_rung"] = [k, Nx]
            rep.data["error"] = str(exc)
            status = EXIT_SOLVER
            break
        rungs.append(tr)
        weak.append(weak_residual(tr, test_fn).residual)
    diffs = [_shared_difference(rungs[i], rungs[i + 1]) for i in range(len(rungs) - 1)]
    orders = [math.log2(diffs[i] / diffs[i + 1]) if diffs[i + 1] > 0 and diffs[i] > 0 else float("nan")
              for i in range(len(diffs) - 1)]
    rows = []
    for i, (k, Nx) in enumerate(ladder[: len(rungs)]):
        rows.append((k, Nx, weak[i], diffs[i - 1] if i else float("nan")))
    write_csv(os.path.join(out, "ladder.csv"), ["k", "Nx", "weak_residual", "diff_to_previous"], rows)
    rep.artifacts.append("ladder.csv")
    rep.data.update({"ladder": ladder[: len(rungs)], "differences": diffs, "observed_orders": orders,
                     "weak_residuals": weak})
    if status == EXIT_OK:
        dec = all(diffs[i + 1] <= diffs[i] for i in range(len(diffs) - 1))
        rep.add("differences_decreasing", dec, diffs, "monotone")
        ratios = [weak[i] / weak[i + 1] if weak[i + 1] > 0 else math.inf for i in range(len(weak) - 1)]
        thr = cfg.tolerances["weak_ratio"]
        rep.add("weak_residual_ratio", all(r >= thr for r in ratios), ratios, thr)
        status = EXIT_OK if rep.ok else EXIT_CHECK
    rep.write(out, "converge.json")
    print(f"converge: weak residuals {weak} differences {diffs}")
    return status


def oracle_error(traj):
    """Max relative first-mode amplitude error against the Mittag-Leffler curve on [a + 10 eps, T]."""
    p = traj.problem
    op = assemble(p.kernel, p.sgrid)
    mu = mode_eigenvalue(op)
    v = first_mode(p.sgrid)
    amp = traj.fields @ v / (v @ v)
    t = p.tgrid.nodes
    sel = t >= p.tgrid.a + 10 * p.tgrid.eps - 1e-12
    ref = eigenmode_reference(p.alpha.alpha, mu, t[sel], p.tgrid.a)
    return float(np.max(np.abs(amp[sel] - ref) / np.abs(ref))), mu


def cmd_oracle(args):
    cfg = load_config(args.config)
    pr = cfg.problem
    if pr["kernel"]["mode"] != KernelMode.FULL.value or pr["w0"]["name"] not in ("eigenmode", "constant") \
            or pr["f"]["name"] != "zero" or "multiplier" in pr["kernel"]:
        raise UsageError("oracle needs the full kernel without multiplier, eigenmode initial data and f = 0")
    out = _outdir(args, cfg)
    rep = ReportDocument("oracle", cfg.echo(), args.threads_used)
    traj = march.run(_problem_from_config(cfg), residual_tol=cfg.tolerances["residual"])
    if pr["w0"]["name"] == "constant":
        ref = pr["w0"]["value"]
        err = float(np.max(np.abs(traj.fields - ref))) / max(abs(ref), 1e-300)
        mu = 0.0
    else:
        err, mu = oracle_error(traj)
    tol = cfg.tolerances["oracle"]
    rep.add("mittag_leffler_relative_error", err <= tol, err, tol)
    rep.data["mu"] = mu
    if args.refine and pr["w0"]["name"] != "constant":
        fine = march.run(_problem_from_config(cfg, 2 * pr["k"]), residual_tol=cfg.tolerances["residual"])
        err2, _ = oracle_error(fine)
        rep.data["error_refined"] = err2
        rep.add("error_decreases_with_k", err2 < err, err / err2 if err2 > 0 else math.inf, 1.0)
    rep.write(out, "oracle.json")
    print(f"oracle: mu={mu:.10g} max relative error {err:.4e}")
    return EXIT_OK if rep.ok else EXIT_CHECK


def cmd_extend(args):
    """Round trip through the backward extension (for the eigenmode configuration)."""
    cfg = load_config(args.config)
    prob = _problem_from_config(cfg)
    direct = march.run(prob)
    ext = march.run(backward_extension_problem(prob))
    diff = float(np.max(np.abs(restrict_to_original(ext, prob.tgrid.k) - direct.fields)))
    print(f"extend: max difference {diff:.3e}")
    return EXIT_OK if diff <= 1e-8 else EXIT_CHECK


def cmd_quotient(args):
    cfg = _cfg_or_default(args)
    traj = march.load_trajectory(args.trajectory)
    q = difference_quotient_scan(traj, cfg.diagnostics["h_steps"], cfg.diagnostics["beta_target"])
    print(f"quotient: sup={q.sup:.6g} seminorm={q.seminorm:.6g}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="fracdiff", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required):
        p.add_argument("--config", required=config_required, help="JSON run configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, default=None, help="BLAS thread count")

    p = sub.add_parser("solve", help="march a configured problem and save the trajectory")
    p.add_argument("--export-operator", action="store_true", help="also write the dense operator at t = a")
    common(p, True)
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("verify", help="run a verification suite on a saved trajectory")
    p.add_argument("trajectory")
    p.add_argument("--suite", required=True)
    common(p, False)
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("degiorgi", help="oscillation scan, truncation energies and level-set measures")
    p.add_argument("trajectory")
    common(p, False)
    p.set_defaults(func=cmd_degiorgi)
    p = sub.add_parser("converge", help="refinement ladder with weak residuals")
    p.add_argument("--ladder", help="comma separated KxNX rungs, e.g. 64x32,128x64")
    common(p, True)
    p.set_defaults(func=cmd_converge)
    p = sub.add_parser("oracle", help="compare the first mode against the Mittag-Leffler curve")
    p.add_argument("--refine", action="store_true", help="also run with k doubled")
    common(p, True)
    p.set_defaults(func=cmd_oracle)
    p = sub.add_parser("extend", help="backward-extension round trip")
    common(p, True)
    p.set_defaults(func=cmd_extend)
    p = sub.add_parser("quotient", help="time difference quotients of eta * w")
    p.add_argument("trajectory")
    common(p, False)
    p.set_defaults(func=cmd_quotient)
    return ap


def main(argv=None):
    _setup_logging()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        threads = args.threads
        if threads is not None and threads < 1:
            raise UsageError("--threads must be >= 1")
        if threads is None and getattr(args, "config", None):
            threads = load_config(args.config).threads
        args.threads_used = int(threads or 1)
        with threadpool_limits(limits=args.threads_used):
            return args.func(args)
    except ConfigError as exc:
        for m in exc.messages:
            print(m, file=sys.stderr)
        return EXIT_INPUT
    except (FormatError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        for line in exc.log_lines:
            print(f"  {line}", file=sys.stderr)
        return EXIT_SOLVER
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
