import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdiff import march
from fracdiff.errors import FormatError, SolverError
from fracdiff.fractime import discrete_caputo_values
from fracdiff.spaceop import KernelSpec, SpaceGrid, assemble, first_mode, mode_eigenvalue

FULL = {"sigma": 1.0, "lam": 3.0, "mode": "full"}
TRUNC = {"sigma": 0.7, "lam": 1.0, "mode": "truncated"}


def prob(k=32, Nx=16, alpha=0.5, kernel=TRUNC, f=None, w0=None, a=0.0, T=1.0):
    return march.make_problem(a, T, k, 8.0, Nx, alpha, kernel, f, w0)


def test_constant_data_stays_constant():
    tr = march.run(prob(w0={"name": "constant", "value": 1.75}))
    assert np.max(np.abs(tr.fields - 1.75)) <= 1e-11
    assert max(march.scheme_residual(tr, j) for j in (1, 16, 32)) < 1e-12


def test_initial_row_is_exact_and_fields_read_only():
    p = prob(w0={"name": "random", "seed": 3, "low": -1, "high": 1})
    tr = march.run(p)
    assert np.array_equal(tr.fields[0], p.w0)
    with pytest.raises(ValueError):
        tr.fields[0, 0] = 1.0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.sampled_from([0.25, 0.5, 0.75]))
def test_maximum_principle(seed, alpha):
    p = prob(k=24, alpha=alpha, w0={"name": "random", "seed": seed, "low": -2, "high": 3})
    tr = march.run(p)
    assert tr.fields.min() >= p.w0.min() - 1e-10
    assert tr.fields.max() <= p.w0.max() + 1e-10


def test_m_matrix_structure():
    st_ = march._Stepper(prob(kernel=FULL))
    M = st_.c0 * np.eye(16) - st_.A
    assert np.all(np.diag(M) > 0)
    off = M - np.diag(np.diag(M))
    assert np.all(off <= 0)


def test_eigenmode_matches_scalar_recursion():
    p = prob(k=64, Nx=32, kernel=FULL, w0={"name": "eigenmode", "mode": 1, "amplitude": 1.0})
    tr = march.run(p)
    mu = mode_eigenvalue(assemble(p.kernel, p.sgrid))
    d = march.scalar_recursion(0.5, p.tgrid.eps, 64, mu)
    assert np.allclose(tr.fields, d[:, None] * first_mode(p.sgrid)[None, :], atol=1e-12)


def test_constant_forcing_matches_scalar_recursion():
    p = prob(k=40, f={"name": "constant", "value": 1.0})
    tr = march.run(p)
    assert np.ptp(tr.fields, axis=1).max() < 1e-12
    ref = march.scalar_recursion(0.5, p.tgrid.eps, 40, 0.0, u0=0.0, f=1.0)
    assert np.allclose(tr.fields[:, 0], ref, atol=1e-12)


def test_single_step():
    tr = march.run(prob(k=1, w0={"name": "eigenmode", "mode": 1, "amplitude": 1.0}))
    assert tr.fields.shape == (2, 16)
    w1 = march.step(tr.fields[:1], tr.problem, 1)
    assert np.array_equal(w1, tr.fields[1])


def test_step_argument_checks():
    p = prob()
    with pytest.raises(ValueError):
        march.step(np.zeros((1, 16)), p, 0)
    with pytest.raises(ValueError):
        march.step(np.zeros((1, 16)), p, 3)


def test_residual_contract_and_independent_path():
    p = prob(kernel=FULL, f={"name": "smooth", "amplitude": 1.0, "mode": 1, "frequency": 2.0},
             w0={"name": "bump", "center": 4.0, "width": 1.5, "height": 1.0})
    tr = march.run(p)
    for j in range(1, 33):
        r = march.scheme_residual(tr, j)
        assert r <= 1e-10 * (1 + np.max(np.abs(tr.fields[j])))
    st_ = march._Stepper(p)
    assert st_.c0 == pytest.approx(0.5 * p.tgrid.eps**-0.5 * (1.0 + st_.tau[1]), rel=1e-14)


def test_perturbed_field_is_detected():
    p = prob(kernel=FULL, w0={"name": "eigenmode", "mode": 1, "amplitude": 1.0})
    tr = march.run(p)
    F = np.array(tr.fields)
    F[10] += 1e-3
    bad = march.Trajectory(p, F)
    c0 = march._Stepper(p).c0
    assert march.scheme_residual(bad, 10) >= c0 * 1e-3 / 2


def test_linearity():
    w1 = {"name": "random", "seed": 1, "low": -1, "high": 1}
    f1 = {"name": "mode", "amplitude": 0.5, "mode": 2}
    a = march.run(prob(f=f1, w0=w1)).fields
    b = march.run(prob(w0={"name": "bump", "center": 2.0, "width": 1.0, "height": 2.0})).fields
    ps = prob(f=f1, w0=w1)
    both = march.Problem(ps.tgrid, ps.sgrid, ps.alpha, ps.kernel,
                         ps.w0 + prob(w0={"name": "bump", "center": 2.0, "width": 1.0, "height": 2.0}).w0,
                         ps.f, ps.f_bound)
    c = march.run(both).fields
    assert np.allclose(c, a + b, atol=1e-10)


def test_comparison_principle():
    lo = prob(w0={"name": "random", "seed": 5, "low": -1, "high": 0})
    hi = march.Problem(lo.tgrid, lo.sgrid, lo.alpha, lo.kernel, lo.w0 + np.linspace(0, 1, 16))
    assert np.all(march.run(lo).fields <= march.run(hi).fields + 1e-10)


@pytest.mark.parametrize("alpha,ks", [(0.25, (32, 64, 128, 256)), (0.5, (128, 256, 512))])
def test_self_convergence_under_k_doubling(alpha, ks):
    # the sup sits in the initial layer, so the decrease is slow but monotone
    runs = [march.run(prob(k=k, alpha=alpha, kernel=FULL, w0={"name": "eigenmode", "mode": 1, "amplitude": 1.0}))
            for k in ks]
    diffs = [np.max(np.abs(c.fields - f.fields[::2])) for c, f in zip(runs[:-1], runs[1:])]
    assert all(b < a for a, b in zip(diffs[:-1], diffs[1:]))


def test_time_dependent_kernel_runs_and_obeys_max_principle():
    kern = dict(TRUNC, lam=2.0, multiplier={"name": "oscillating", "mean": 1.0, "amplitude": 0.5, "frequency": 4.0})
    p = prob(kernel=kern, w0={"name": "random", "seed": 2, "low": 0, "high": 1})
    tr = march.run(p)
    assert 0 <= tr.fields.min() and tr.fields.max() <= 1
    assert max(march.scheme_residual(tr, j) for j in range(1, 33)) < 1e-10


def test_iterative_path_for_large_grids():
    p = march.make_problem(0.0, 0.1, 4, 8.0, 640, 0.5, FULL, None, {"name": "eigenmode", "mode": 1, "amplitude": 1})
    tr = march.run(p)
    assert max(tr.solver_meta["iterations"]) > 0
    mu = mode_eigenvalue(assemble(p.kernel, p.sgrid))
    d = march.scalar_recursion(0.5, p.tgrid.eps, 4, mu)
    assert np.allclose(tr.fields[:, 0], d, rtol=1e-9)


def test_strict_residual_raises():
    p = prob(w0={"name": "random", "seed": 1, "low": 0, "high": 1})
    with pytest.raises(SolverError) as exc:
        march.run(p, residual_tol=1e-30)
    assert exc.value.j == 1
    tr = march.run(p, residual_tol=1e-30, strict=False)
    assert tr.solver_meta["residual_exceeded"]


def test_declared_forcing_bound_checked():
    p = prob(f={"name": "constant", "value": 2.0})
    bad = march.Problem(p.tgrid, p.sgrid, p.alpha, p.kernel, p.w0, p.f, 1.0)
    with pytest.raises(ValueError):
        march.run(bad)


def test_round_trip_and_byte_identity(tmp_path):
    p = prob(kernel=FULL, f={"name": "smooth", "amplitude": 1.0, "mode": 1, "frequency": 1.0},
             w0={"name": "eigenmode", "mode": 1, "amplitude": 1.0}, a=-0.5)
    tr = march.run(p)
    a, b = tmp_path / "a.frt", tmp_path / "b.frt"
    march.save_trajectory(tr, a)
    back = march.load_trajectory(a)
    assert np.array_equal(back.fields, tr.fields)
    assert back.problem.tgrid == p.tgrid and back.problem.sgrid == p.sgrid
    march.save_trajectory(back, b)
    assert a.read_bytes() == b.read_bytes()
    hdr, _ = march.read_container(a)
    for key in ("a", "T", "k", "Nx", "L", "alpha", "sigma", "lam", "kernel_mode", "f", "format_version"):
        assert key in hdr


@pytest.mark.parametrize("damage", ["truncate", "magic", "pad"])
def test_corrupted_container(tmp_path, damage):
    path = tmp_path / "t.frt"
    march.save_trajectory(march.run(prob(k=4)), path)
    raw = path.read_bytes()
    raw = {"truncate": raw[:-3], "magic": b"X" + raw[1:], "pad": raw + b"\0" * 8}[damage]
    path.write_bytes(raw)
    with pytest.raises(FormatError):
        march.load_trajectory(path)


def test_csv_export(tmp_path):
    tr = march.run(prob(k=2, Nx=8))
    path = tmp_path / "t.csv"
    march.export_csv(tr, path)
    lines = path.read_text().splitlines()
    assert lines[0] == march.CSV_VERSION
    assert lines[1] == "j,t,m,x,w"
    assert len(lines) == 2 + 3 * 8


def test_bitwise_determinism():
    p = prob(kernel=FULL, w0={"name": "random", "seed": 9, "low": -1, "high": 1})
    assert np.array_equal(march.run(p).fields, march.run(p).fields)


def test_independent_residual_uses_fractime():
    p = prob(w0={"name": "random", "seed": 4, "low": -1, "high": 1})
    tr = march.run(p)
    d = discrete_caputo_values(tr.fields[:6], p.alpha, p.tgrid.eps, 5)
    from fracdiff.spaceop import apply
    assert np.max(np.abs(d - apply(assemble(p.kernel, p.sgrid), tr.fields[5]))) < 1e-10


def test_scheme_residuals_match_single_step_form():
    tr = march.run(prob(k=16, kernel=FULL, w0={"name": "random", "seed": 5, "low": -1, "high": 1}))
    r = march.scheme_residuals(tr)
    assert r.shape == (16,)
    assert np.allclose(r, [march.scheme_residual(tr, j) for j in range(1, 17)], rtol=0, atol=1e-15)
