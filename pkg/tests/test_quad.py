import math

import numpy as np
import pytest

from blowup.cubature import adaptive_cubature
from blowup.fields import Ball, Box, ScalarField, square_field
from blowup.quad import (
    CONVERGENT, DIVERGENT_LOG, DIVERGENT_POWER, INCONCLUSIVE, ExcisionFamily,
    IntegralSeries, bbm_estimate, diagnose, excision_series, integrate_domain,
    integrate_excised, QuadratureError,
)

R2 = ScalarField.from_source("x1^2 + x2^2", 2)
DISC = Ball((0.0, 0.0), 1.0)


def test_cubature_polynomial_exact():
    r = adaptive_cubature(lambda X: X[:, 0] ** 3 * X[:, 1] ** 2, [0, 0], [1, 2], rtol=1e-12)
    assert r.value == pytest.approx(0.25 * 8 / 3, rel=1e-13)


def test_cubature_catches_jump():
    r = adaptive_cubature(lambda X: (X[:, 0] > 1 / 3).astype(float), [0], [1], rtol=1e-9)
    assert r.value == pytest.approx(2 / 3, abs=1e-8)


def test_integrate_domain_ball_volume():
    for n, exact in ((2, math.pi), (3, 4 * math.pi / 3)):
        r = integrate_domain(lambda X: np.ones(len(X)), Ball((0.0,) * n, 1.0))
        assert r.value == pytest.approx(exact, rel=1e-8)


def test_one_dimensional_closed_form():
    f = ScalarField.from_source("x1", 1)
    r = integrate_excised(f, Box((-1.0,), (1.0,)), 1.0, math.exp(-3))
    assert r.value == pytest.approx(6.0, rel=1e-4)


def test_excised_radial_closed_form():
    # I_p(eps) over the unit disc for |x|^2: 2pi 2^p (1 - sqrt(eps)^(2-p)) / (2-p)
    for p in (1.0, 1.5):
        eps = 1e-3
        exact = 2 * math.pi * 2**p * (1 - math.sqrt(eps) ** (2 - p)) / (2 - p)
        r = integrate_excised(R2, DISC, p, eps, rtol=1e-6)
        assert r.value == pytest.approx(exact, rel=1e-4)


@pytest.mark.parametrize("c", [0.1, 3.0, -2.0])
def test_scaling_invariance(c):
    eps = 1e-3
    base = integrate_excised(R2, DISC, 1.5, eps, rtol=1e-4).value
    scaled = integrate_excised(R2.scaled(c), DISC, 1.5, abs(c) * eps, rtol=1e-4).value
    assert scaled == pytest.approx(base, rel=1e-10)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_squaring_identity(p):
    eps = 1e-2
    base = integrate_excised(R2, DISC, p, eps, rtol=1e-4).value
    sq = integrate_excised(square_field(R2), DISC, p, eps**2, rtol=1e-4).value
    assert sq == pytest.approx(2**p * base, rel=1e-8)


def test_series_monotone_in_eps_and_p():
    fam = ExcisionFamily(1e-2, 0.1, 3)
    s1 = excision_series(R2, DISC, 1.0, fam, rtol=1e-4)
    s2 = excision_series(R2, DISC, 2.0, fam, rtol=1e-4)
    s1.check_monotone()
    s2.check_monotone()
    assert np.all(s2.values > s1.values)      # V >= 2 on the unit disc


def test_check_monotone_raises_on_decrease():
    s = IntegralSeries(EPS[:3], [1.0, 2.0, 1.5], [1e-3] * 3, [True] * 3)
    with pytest.raises(QuadratureError):
        s.check_monotone()


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        integrate_excised(R2, Ball((0.0, 0.0, 0.0), 1.0), 2.0, 1e-2)


def test_excision_family_validation():
    np.testing.assert_allclose(ExcisionFamily().values(), [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    for bad in (dict(eps0=0), dict(ratio=1.0), dict(levels=2)):
        with pytest.raises(ValueError):
            ExcisionFamily(**bad)


EPS = 10.0 ** -np.arange(2, 8)
L = np.log(1 / EPS)


@pytest.mark.parametrize("values,expected", [
    (5 + 3 * L, DIVERGENT_LOG),
    (1 / EPS, DIVERGENT_POWER),
    (2 + EPS**-0.5, DIVERGENT_POWER),
    (np.full(6, 7.0), CONVERGENT),
    (7 - 2 * EPS**0.5, CONVERGENT),
])
def test_diagnose_synthetic(values, expected):
    d = diagnose(IntegralSeries.from_values(EPS, values))
    assert d.classification == expected


def test_diagnose_parameters():
    d = diagnose(IntegralSeries.from_values(EPS, 5 + 3 * L))
    assert d.b == pytest.approx(3.0, rel=1e-8) and d.a == pytest.approx(5.0, rel=1e-8)
    d = diagnose(IntegralSeries.from_values(EPS, 1 / EPS))
    assert d.gamma == pytest.approx(1.0, rel=1e-6)
    d = diagnose(IntegralSeries.from_values(EPS, 7 - 2 * EPS**0.5))
    assert d.a == pytest.approx(7.0, rel=1e-6)


def test_diagnose_noisy_short_series_is_inconclusive():
    vals = [1.0, 3.0, 2.0]
    errs = [0.5, 0.5, 0.5]
    d = diagnose(IntegralSeries(EPS[:3], vals, errs, [True] * 3))
    assert d.classification == INCONCLUSIVE


def test_bbm_constant_is_exact_zero_and_linear_grows():
    sq = Box((0.0, 0.0), (1.0, 1.0))
    const = ScalarField.from_source("1", 2)
    assert bbm_estimate(const, sq, 2**-4, strata=16).value == 0.0
    lin = ScalarField.from_source("x1", 2)
    vals = [bbm_estimate(lin, sq, h, strata=16).value for h in (2**-3, 2**-5)]
    assert vals[1] > vals[0] > 0


def test_bbm_deterministic_by_seed():
    sq = Box((0.0, 0.0), (1.0, 1.0))
    lin = ScalarField.from_source("x1", 2)
    a = bbm_estimate(lin, sq, 2**-4, strata=8, seed=5).value
    b = bbm_estimate(lin, sq, 2**-4, strata=8, seed=5).value
    assert a == b
