import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from fourmix.ecf import EcfFunction, empirical_cf
from fourmix.errors import InvalidArgument, InvalidData, WidenDomainError
from fourmix.glmix import EffectiveParams, RawParams
from fourmix.grid import uniform_grid
from fourmix.metrics import (
    TheoryDiagnostics,
    bound_assembly,
    choose_domain,
    density_error,
    density_l2,
    density_l2_norm,
    error_report,
    fourier_l2,
    loglog_slope,
    mpe,
    nll,
    tail_prob,
    theory_quantities,
)
from fourmix.targets import get_target

STD = EffectiveParams([1.0], [0.0], [1.0])
LAP = EffectiveParams([], [], [], [1.0], [0.0], [1.0])


def gauss_cf(sd, mean=0.0):
    return lambda eta: np.exp(1j * mean * eta - 0.5 * (sd * eta) ** 2)


def test_fourier_l2_identity_is_zero():
    assert fourier_l2(STD, STD, 10) == 0.0


def test_fourier_l2_constant_difference():
    ref = lambda eta: np.zeros_like(eta, dtype=complex)
    off = lambda eta: np.full(eta.shape, 0.1 + 0j)
    assert fourier_l2(ref, off, 1.0, q=64) == pytest.approx(0.02, rel=1e-12)
    assert fourier_l2(ref, off, 1.0, q=64, part="im") == 0.0


def test_fourier_l2_against_adaptive_quadrature():
    # scipy.quad value of int_{-10}^{10} (e^{-eta^2/2} - e^{-1.21 eta^2/2})^2, frozen
    assert fourier_l2(gauss_cf(1.0), gauss_cf(1.1), 10.0, q=4000) == pytest.approx(0.011494243534511926, abs=1e-8)


def test_fourier_l2_two_dimensional_product():
    ref = lambda e: np.exp(-0.5 * (e**2).sum(axis=1)).astype(complex)
    zero = lambda e: np.zeros(e.shape[0], dtype=complex)
    one_d = quad(lambda t: math.exp(-t * t), -3, 3)[0]
    assert fourier_l2(ref, zero, 3.0, q=200, d=2) == pytest.approx(one_d**2, rel=1e-8)


def test_mpe_basics():
    assert mpe(STD, STD, 5) == 0.0
    off = lambda eta: STD.cf(eta) + 0.1
    assert mpe(STD, off, 5, q=100) == pytest.approx(0.1, rel=1e-12)
    with pytest.raises(InvalidArgument):
        mpe(STD, STD, 5, part="abs")


def test_density_l2_identical():
    assert density_l2(STD, STD, 10.0) == 0.0


def test_density_l2_gaussian_pair_closed_form():
    shifted = EffectiveParams([1.0], [0.1], [1.0])
    # (1 / (2 sqrt(pi))) * 2 * (1 - exp(-0.01 / 4))
    ref = 0.0014087123347466927
    assert density_l2(STD, shifted, 12.0, q=20000, tail=(STD, shifted)) == pytest.approx(ref, abs=1e-8)
    out = density_error(STD, shifted)
    assert out["density_l2"] == pytest.approx(ref, abs=1e-10)
    assert out["density_l2_norm"] == pytest.approx(math.sqrt(ref), rel=1e-8)


def test_density_l2_window_too_small():
    with pytest.raises(WidenDomainError, match="try A"):
        density_l2(STD, LAP, 3.0, tail=(STD, LAP))


@settings(max_examples=15)
@given(st.integers(0, 500))
def test_plancherel_consistency(seed):
    r = np.random.default_rng(seed)
    a = RawParams(*r.normal(size=(3, 2)), *r.normal(size=(3, 1))).effective()
    b = RawParams(*r.normal(size=(3, 1)), *r.normal(size=(3, 2))).effective()
    dens = density_error(a, b)["density_l2"]
    # Laplace CF differences decay like 1/eta^2; a wide window keeps the truncation below 1e-6
    eta_max = 2000.0
    four = fourier_l2(a, b, eta_max, q=400_000, part="re") + fourier_l2(a, b, eta_max, q=400_000, part="im")
    assert dens == pytest.approx(four / (2 * math.pi), abs=1e-6)


def test_nll_values():
    assert nll(STD, np.zeros(5)) == pytest.approx(0.5 * math.log(2 * math.pi), rel=1e-15)
    assert nll(LAP, np.array([-1.0, 1.0])) == pytest.approx(math.log(2) + 1, rel=1e-15)


def test_nll_of_truth_on_large_sample():
    t = get_target("gmm3-separated")
    x = t.sample(1_000_000, np.random.default_rng(0))
    # differential entropy of the mixture, computed by quadrature
    ent = -quad(lambda v: t.density(v) * t.log_density(v), -20, 20, limit=400)[0]
    assert nll(t.as_model, x) == pytest.approx(ent, abs=5e-3)
    # well-fitted models on this target reach about 2.37
    assert nll(t.as_model, x) == pytest.approx(2.37, abs=0.01)


def test_tail_probabilities():
    assert tail_prob(STD, 0.0, "lower") == pytest.approx(0.5)
    assert tail_prob(LAP, 0.0, "upper") == pytest.approx(0.5)
    assert tail_prob(LAP, math.log(2), "upper") == pytest.approx(0.25, rel=1e-15)
    with pytest.raises(InvalidArgument):
        tail_prob(STD, 0.0, "both")


def test_theory_quantities_extremes():
    g = uniform_grid(10, 40)
    point_mass = lambda eta: np.ones_like(eta, dtype=complex)
    zero = lambda eta: np.zeros_like(eta, dtype=complex)
    d = theory_quantities(point_mass, g)
    assert (d.v_p, d.w_p) == (0.0, 0.0)
    d = theory_quantities(zero, g)
    assert (d.v_p, d.w_p) == (1.0, 1.0)


def test_theory_quantities_standard_normal_vs_integral():
    d = theory_quantities(STD, uniform_grid(50, 1000))
    # scipy.quad value of (1 / 100) int_{-50}^{50} (1 - e^{-eta^2}), frozen
    assert d.v_p == pytest.approx(0.9822754614909448, abs=1e-3)


@given(st.integers(0, 1000))
def test_theory_quantities_ranges(seed):
    x = np.random.default_rng(seed).standard_t(3, size=200)
    g = uniform_grid(8, 64)
    d = theory_quantities(empirical_cf(x, g), g, model=STD, second_ref=STD)
    assert 0 <= d.v_p <= 1 and 0 <= d.w_p <= 1
    assert d.w_p >= d.v_p
    assert d.loss_star == pytest.approx(d.mse_star + 0.01 * d.r_star)
    assert d.b1 >= 0 and d.b2 >= 0


def test_bound_assembly_truncation_only():
    diag = TheoryDiagnostics(v_p=0.0, w_p=0.0, eps1=0.0)
    assert bound_assembly(diag, 1.0, 0.0, 0.0, 0.0, 1, 1) == pytest.approx(4 / (2 * math.pi))
    big_p = bound_assembly(diag, 1.0, 1.0, 5.0, 0.0, 1, 10**12)
    assert big_p == pytest.approx(4 / (2 * math.pi), rel=1e-9)


def test_bound_assembly_pseudo_doubles_statistical_terms():
    diag = TheoryDiagnostics(v_p=0.3, w_p=0.5, eps1=0.02, b1=0.0, b2=0.0)
    kw = dict(eps_trunc=0.0, c1=2.0, c_prime=0.0, lam=0.01, m=1000, p=100)
    direct = bound_assembly(diag, **kw)
    pseudo = bound_assembly(diag, pseudo=True, **kw)
    assert pseudo == pytest.approx(2 * direct, rel=1e-14)
    with pytest.raises(InvalidArgument):
        bound_assembly(diag, -1.0, 1, 1, 0, 1, 1)


def test_loglog_slope():
    m = np.array([1e3, 4e3, 1.6e4, 6.4e4])
    s, _, r2 = loglog_slope(m, 3 * m**-0.5)
    assert s == pytest.approx(-0.5, abs=1e-12) and r2 == pytest.approx(1.0)
    assert loglog_slope(m, np.full(4, 0.2))[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InvalidArgument, match="three"):
        loglog_slope([1e3], [0.1])
    with pytest.raises(InvalidData):
        loglog_slope(m, [1, 0, 1, 1])


def test_error_report_fields_and_ecf_reference():
    t = get_target("gmm3-separated")
    test = t.sample(2000, np.random.default_rng(1))
    rep = error_report(t, t.as_model, 50.0, 1000, test)
    assert rep.l2_re == pytest.approx(0.0, abs=1e-25) and rep.density_l2 == pytest.approx(0.0, abs=1e-25)
    assert rep.meta["Q_mpe"] == 10_000
    rep2 = error_report(EcfFunction(test), t.as_model, 50.0, 1000, test, density=False)
    assert rep2.l2_re > 0 and rep2.density_l2 is None


def test_errors_symmetric_under_swap():
    a = EffectiveParams([1.0], [0.0], [1.0])
    b = EffectiveParams([1.0], [0.3], [1.0])
    assert fourier_l2(a, b, 10) == fourier_l2(b, a, 10)
    assert mpe(a, b, 10, q=500) == mpe(b, a, 10, q=500)
    assert density_l2_norm(a, b) == pytest.approx(density_l2_norm(b, a), rel=1e-14)
    assert choose_domain(a, b) == choose_domain(b, a)
