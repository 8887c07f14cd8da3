import math

import mpmath
import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdiff.errors import DomainError
from fracdiff.march import scalar_recursion
from fracdiff.special import OutOfRegimeError, eigenmode_reference, mittag_leffler


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
def test_value_at_zero(alpha):
    r = mittag_leffler(alpha, 0.0)
    assert r.value == 1.0 and r.terms_used >= 1 and r.error_bound == 0.0


@pytest.mark.parametrize("z", [-0.1, -1.0, -3.0, -10.0, -29.9])
def test_half_order_erfc_identity(z):
    ref = math.exp(z * z) * scipy.special.erfc(-z) if z > -20 else float(
        mpmath.exp(mpmath.mpf(z) ** 2) * mpmath.erfc(-mpmath.mpf(z))
    )
    r = mittag_leffler(0.5, z)
    assert r.value == pytest.approx(ref, rel=1e-9)
    assert 0 <= r.error_bound <= 1e-10


def test_known_value():
    assert mittag_leffler(0.5, -1.0).value == pytest.approx(0.427583576155807, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.4, 0.7])
def test_against_mpmath_series(alpha):
    for z in (-0.5, -4.0, -12.0):
        with mpmath.workdps(300):
            ref = mpmath.fsum(mpmath.mpf(z) ** m / mpmath.gamma(mpmath.mpf(alpha) * m + 1) for m in range(4000))
        assert mittag_leffler(alpha, z).value == pytest.approx(float(ref), rel=1e-9, abs=1e-12)


def test_alpha_one_limit_is_exponential():
    assert mittag_leffler(0.999999, -2.0).value == pytest.approx(math.exp(-2.0), rel=1e-4)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.55, 0.95))
def test_monotone_decay(alpha):
    xs = np.linspace(0, 20, 11)
    vals = np.array([mittag_leffler(alpha, -x).value for x in xs])
    assert np.all(np.diff(vals) < 0)
    assert np.all(vals > 0) and vals[0] == 1.0


def test_regime_errors():
    with pytest.raises(OutOfRegimeError):
        mittag_leffler(0.5, -30.5)
    with pytest.raises(OutOfRegimeError):
        mittag_leffler(0.5, 0.5)
    # small orders need more series terms than the cap allows
    with pytest.raises(OutOfRegimeError):
        mittag_leffler(0.2, -30.0)
    with pytest.raises(OutOfRegimeError):
        mittag_leffler(0.3, -12.0)
    assert issubclass(OutOfRegimeError, DomainError)


def test_eigenmode_reference_basics():
    t = np.linspace(0, 2, 5)
    assert np.all(eigenmode_reference(0.5, 0.0, t) == 1.0)
    assert eigenmode_reference(0.5, 3.0, 1.0, a=1.0) == 1.0
    expected = mittag_leffler(0.5, -1.0 / math.gamma(0.5)).value
    assert eigenmode_reference(0.5, 1.0, 1.0) == pytest.approx(expected, rel=1e-15)


def test_eigenmode_reference_matches_fine_scalar_scheme():
    k = 4096
    u = scalar_recursion(0.5, 1.0 / k, k, 1.0)
    ref = eigenmode_reference(0.5, 1.0, 1.0)
    assert u[-1] == pytest.approx(ref, rel=2e-3)


def test_scalar_scheme_error_decreases_with_refinement():
    ref = eigenmode_reference(0.5, 1.0, 1.0)
    errs = [abs(scalar_recursion(0.5, 1.0 / k, k, 1.0)[-1] - ref) for k in (256, 1024, 4096)]
    assert errs[0] > errs[1] > errs[2]
