import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fourmix.ecf import (
    EcfFunction,
    EmpiricalCF,
    SampleSet,
    affine_preprocess,
    affine_transform_ecf,
    compute_ecf,
    ecf_at,
    ecf_points,
    empirical_cf,
    empirical_cf_multi,
    exact_cf_on_grid,
)
from fourmix.errors import InvalidArgument, InvalidData
from fourmix.grid import nonuniform_grid, tensor_grid, uniform_grid
from fourmix.targets import ProductCauchy2D

finite = st.floats(-50, 50, allow_nan=False)


def test_point_mass_at_zero():
    e = empirical_cf([0.0], uniform_grid(10, 40))
    np.testing.assert_array_equal(e.values, 1.0)


def test_symmetric_pair_at_pi():
    g = nonuniform_grid([-np.pi, 0.0, np.pi], "left")
    e = empirical_cf([-1.0, 1.0], g)
    assert e.values[0] == pytest.approx(-1.0, abs=1e-15)
    assert ecf_at([-1.0, 1.0], np.pi) == pytest.approx(-1.0, abs=1e-15)


def test_gaussian_monte_carlo_frequency():
    # the ECF at eta=1 has sd sqrt((1 - e^-1) / M) ~ 8e-4 per part at M = 1e6,
    # so a 5e-3 deviation is > 6 sd and should essentially never happen
    g = nonuniform_grid([-1.5, -1.0, 1.0, 1.5], "left")
    hits = 0
    for seed in range(20):
        x = np.random.default_rng(seed).standard_normal(1_000_000)
        e = empirical_cf(x, g)
        hits += abs(e.values[2] - np.exp(-0.5)) < 5e-3
    assert hits == 20


def test_origin_sample_multi():
    e = empirical_cf_multi(np.zeros((1, 2)), tensor_grid(3, 4, 2))
    np.testing.assert_array_equal(e.values, 1.0)


def test_pair_multi():
    x = np.array([[1.0, 0.0], [-1.0, 0.0]])
    assert ecf_at(x, np.array([np.pi, 0.0])) == pytest.approx(-1.0, abs=1e-15)
    g = tensor_grid(np.pi, 2, 2, "left")
    e = empirical_cf_multi(x, g)
    # node (-pi, -pi): cos(-pi) averaged over the pair
    assert e.values[0] == pytest.approx(-1.0, abs=1e-15)


def test_product_cauchy_monte_carlo():
    t = ProductCauchy2D(0.5)
    s = t.sample(100_000, np.random.default_rng(7))
    val = ecf_at(s, np.array([1.0, 1.0]))
    assert abs(val - np.exp(-1.0)) < 5e-3


@given(arrays(np.float64, st.integers(1, 60), elements=finite), st.integers(2, 40), st.floats(0.5, 30))
def test_kernels_match_plain_sum(x, p, eta):
    g = uniform_grid(eta, p)
    np.testing.assert_allclose(empirical_cf(x, g).values, ecf_at(x, g.nodes), rtol=0, atol=1e-12)


@given(arrays(np.float64, st.integers(1, 40), elements=finite))
def test_modulus_hermitian_and_origin(x):
    g = uniform_grid(7.0, 20)
    v = empirical_cf(x, g).values
    assert np.all(np.abs(v) <= 1 + 1e-12)
    # midpoint nodes are symmetric, so the reversed values are the conjugates
    np.testing.assert_allclose(v[::-1], np.conj(v), atol=1e-12)
    assert ecf_at(x, 0.0) == 1.0


def test_nonuniform_grid_uses_direct_kernel():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(500)
    g = nonuniform_grid([-3, -1, -0.2, 0.5, 3])
    np.testing.assert_allclose(empirical_cf(x, g).values, ecf_at(x, g.nodes), atol=1e-13)


def test_ecf_points_both_paths():
    x = np.random.default_rng(2).standard_normal(300)
    eta_u = np.linspace(-5, 5, 41)
    eta_n = np.array([0.3, -2.0, 4.4])
    np.testing.assert_allclose(ecf_points(x, eta_u), ecf_at(x, eta_u), atol=1e-13)
    np.testing.assert_allclose(EcfFunction(x)(eta_n), ecf_at(x, eta_n), atol=1e-13)


def test_multi_matches_plain_sum():
    x = np.random.default_rng(3).standard_normal((200, 3))
    g = tensor_grid(4, 5, 3)
    np.testing.assert_allclose(compute_ecf(x, g).values, ecf_at(x, g.nodes), atol=1e-12)


def test_affine_identity_map():
    x = np.array([1.0, -2.0, 5.0])
    np.testing.assert_array_equal(affine_preprocess(x, 1, 0).values, x)


def test_affine_arithmetic():
    y = affine_preprocess([1.0, 2.0], 2, -3)
    np.testing.assert_array_equal(y.values, [-1.0, 1.0])
    assert y.affine == (2, -3)


def test_affine_ecf_identity_random_frequencies():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(1000)
    y = affine_preprocess(x, 2.0, 3.0)
    eta = rng.uniform(-10, 10, 100)
    lhs = ecf_at(y, eta)
    rhs = np.exp(1j * eta * 3.0) * ecf_at(x, 2.0 * eta)
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)


@given(st.floats(0.1, 10), st.floats(-5, 5))
def test_affine_transform_ecf_matches_recompute(a, c):
    x = np.random.default_rng(5).standard_normal(200)
    g = uniform_grid(5, 30)
    via = affine_transform_ecf(empirical_cf(x, g), a, c)
    direct = empirical_cf(a * x + c, g.scaled(1 / a))
    np.testing.assert_allclose(via.values, direct.values, atol=1e-12)


def test_sample_validation(tmp_path):
    with pytest.raises(InvalidData):
        SampleSet([0.0, np.nan])
    with pytest.raises(InvalidArgument):
        SampleSet(np.zeros(0))
    with pytest.raises(InvalidArgument):
        affine_preprocess([1.0], 0.0, 1.0)
    with pytest.raises(FileNotFoundError):
        SampleSet.load(tmp_path / "missing.txt")


def test_sample_and_ecf_io(tmp_path):
    s = SampleSet(np.random.default_rng(6).standard_normal((10, 2)))
    s.save(tmp_path / "s.csv")
    np.testing.assert_array_equal(SampleSet.load(tmp_path / "s.csv").values, s.values)
    e = exact_cf_on_grid(lambda eta: np.exp(-0.5 * eta**2), uniform_grid(3, 6))
    e.to_csv(tmp_path / "e.csv")
    data = np.loadtxt(tmp_path / "e.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 1], e.values.real)
    assert e.m == float("inf")


def test_ecf_shape_check():
    with pytest.raises(InvalidArgument):
        EmpiricalCF(uniform_grid(1, 4), np.ones(3), 1)
