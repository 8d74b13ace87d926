import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fourmix.bessel import bessel_k, k0, k0e, k_half
from fourmix.errors import InvalidArgument

# K_0 reference values from mpmath.besselk at 40 significant digits
K0_TABLE = [
    (1e-6, 13.931442073626419459),
    (0.01, 4.7212447301610949443),
    (0.5, 0.92441907122766586178),
    (1.0, 0.42102443824070833334),
    (2.0, 0.11389387274953343565),
    (5.0, 0.0036910983340425942747),
    (10.0, 0.000017780062316167651811),
    (50.0, 3.4101677497894955139e-23),
    (300.0, 3.7236948548891432633e-132),
]


@pytest.mark.parametrize("x, ref", K0_TABLE)
def test_k0_frozen_reference(x, ref):
    assert k0(x) == pytest.approx(ref, rel=1e-13)


def test_k0_array_matches_scalar():
    xs = np.array([0.3, 1.0, 7.5])
    np.testing.assert_allclose(k0(xs), [k0(v) for v in xs], rtol=0, atol=0)


def _series_k0(x, terms=40):
    # ascending series: K_0 = -(ln(x/2) + gamma) I_0 + sum (x^2/4)^k / (k!)^2 H_k
    with mpmath.workdps(50):
        x = mpmath.mpf(x)
        q = x * x / 4
        i0 = mpmath.mpf(0)
        acc = mpmath.mpf(0)
        h = mpmath.mpf(0)
        term = mpmath.mpf(1)
        for k in range(terms):
            if k > 0:
                term *= q / (k * k)
                h += mpmath.mpf(1) / k
            i0 += term
            acc += term * h
        return float(-(mpmath.log(x / 2) + mpmath.euler) * i0 + acc)


@given(st.floats(1e-8, 8.0))
def test_k0_against_series_oracle(x):
    assert k0(x) == pytest.approx(_series_k0(x, 60), rel=1e-9)


@given(st.floats(0.5, 700.0))
def test_k0e_consistent(x):
    assert k0e(x) == pytest.approx(float(mpmath.besselk(0, x) * mpmath.exp(x)), rel=1e-12)


def test_k0_large_argument_asymptotics():
    # leading ratio tends to 1 with correction -1/(8x) + 9/(128x^2)
    for x in (50.0, 500.0):
        ratio = k0(x) * math.sqrt(2 * x / math.pi) * math.exp(x)
        assert ratio == pytest.approx(1 - 1 / (8 * x) + 9 / (128 * x * x), abs=1e-5)
    assert k0(500.0) * math.sqrt(1000 / math.pi) * math.exp(500.0) == pytest.approx(1.0, abs=1e-3)


def test_k_half_closed_form():
    assert k_half(1.0) == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-1), rel=1e-15)
    assert k_half(1.0) == pytest.approx(0.461068, abs=1e-6)
    assert bessel_k(-0.5, 2.0) == bessel_k(0.5, 2.0)


@given(st.floats(1e-3, 50.0))
def test_k0_decreasing_and_positive(x):
    assert k0(x) > k0(x * 1.01) > 0


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_domain_errors(bad):
    with pytest.raises(InvalidArgument):
        k0(bad)
    with pytest.raises(InvalidArgument):
        k_half(bad)


def test_unsupported_order():
    with pytest.raises(InvalidArgument):
        bessel_k(1, 1.0)
