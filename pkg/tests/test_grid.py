import numpy as np
import pytest
from hypothesis import given, strategies as st

from fourmix.errors import InvalidArgument, UnsupportedDimension
from fourmix.grid import (
    FourierGrid,
    FourierGridMulti,
    cell_weights,
    grid_from_dict,
    nonuniform_grid,
    parse_grid_spec,
    stretched_grid,
    tensor_grid,
    uniform_grid,
)


def test_uniform_midpoint_default_window():
    g = uniform_grid(50, 1000, "midpoint")
    np.testing.assert_allclose(g.widths, 0.1, rtol=0, atol=1e-12)
    assert g.nodes[0] == pytest.approx(-49.95, abs=1e-12)
    assert g.size == 1000
    assert g.uniform


def test_uniform_left_two_cells():
    g = uniform_grid(1, 2, "left")
    np.testing.assert_array_equal(g.nodes, [-1.0, 0.0])
    np.testing.assert_array_equal(g.widths, [1.0, 1.0])


def test_uniform_left_telescoping():
    g = uniform_grid(50, 1000, "left")
    assert g.widths.sum() == pytest.approx(100.0, abs=1e-10)
    assert g.nodes.max() == pytest.approx(49.9, abs=1e-10)


def test_nonuniform_constants():
    g = nonuniform_grid([-1, -0.5, 1])
    np.testing.assert_allclose(g.widths, [0.5, 1.5])
    assert g.c0 == pytest.approx(1.0)
    assert g.c1 == pytest.approx(3.0)
    assert not g.uniform


def test_nonuniform_matches_uniform():
    edges = np.linspace(-50, 50, 1001)
    a, b = nonuniform_grid(edges), uniform_grid(50, 1000)
    np.testing.assert_allclose(a.nodes, b.nodes, atol=1e-12)
    np.testing.assert_allclose(a.widths, b.widths, atol=1e-12)


@pytest.mark.parametrize("edges", [[-1, -1, 1], [1, -1], [-1, 0, 2], [0.0]])
def test_bad_edges_rejected(edges):
    with pytest.raises(InvalidArgument):
        nonuniform_grid(edges)


@pytest.mark.parametrize("args", [(0, 10), (-1, 10), (1, 0), (1, 1), (1, 10, "right")])
def test_bad_uniform_arguments(args):
    with pytest.raises(InvalidArgument):
        uniform_grid(*args)


def test_tensor_enumeration_last_axis_fastest():
    g = tensor_grid(1, 2, 2, "left")
    np.testing.assert_array_equal(g.nodes, [[-1, -1], [-1, 0], [0, -1], [0, 0]])


def test_tensor_midpoints():
    g = tensor_grid(50, 10, 2)
    assert g.nodes.shape == (100, 2)
    np.testing.assert_allclose(np.unique(g.nodes[:, 0]), np.arange(-45, 46, 10), atol=1e-12)
    assert g.weights.sum() == pytest.approx(100.0**2)


def test_tensor_d1_matches_uniform():
    g = tensor_grid(50, 1000, 1)
    np.testing.assert_allclose(g.nodes[:, 0], uniform_grid(50, 1000).nodes, atol=0)


def test_tensor_dimension_limit():
    with pytest.raises(UnsupportedDimension):
        tensor_grid(1, 4, 4)


def test_spec_strings_and_roundtrip(tmp_path):
    g = parse_grid_spec("uniform:10:64:left")
    assert (g.eta_max, g.size, g.node_rule) == (10.0, 64, "left")
    m = parse_grid_spec("tensor:5:8:3")
    assert isinstance(m, FourierGridMulti) and m.size == 512
    assert grid_from_dict(m.to_dict()).size == 512
    g.save(tmp_path / "g.json")
    h = FourierGrid.load(tmp_path / "g.json")
    np.testing.assert_array_equal(h.nodes, g.nodes)
    with pytest.raises(InvalidArgument):
        parse_grid_spec("uniform:ten:4")


@given(st.floats(1.0, 100.0), st.integers(2, 300), st.floats(0.05, 8.0))
def test_stretched_grid_partition(eta_max, p, c):
    g = stretched_grid(eta_max, p, c)
    assert g.edges[0] == -eta_max and g.edges[-1] == eta_max
    np.testing.assert_array_equal(g.edges, -g.edges[::-1])
    assert g.widths.sum() == pytest.approx(2 * eta_max, rel=1e-12)
    # cells widen monotonically away from the origin
    half = g.widths[(p + 1) // 2:]
    assert np.all(np.diff(half) >= -1e-12 * eta_max)


def test_stretched_grid_values():
    g = stretched_grid(50, 80, 5.0)
    # smallest cell: 50 * (sinh(5 / 40) - sinh(0)) / sinh(5)
    assert g.delta_min == pytest.approx(50 * np.sinh(0.125) / np.sinh(5.0), rel=1e-12)
    assert not g.uniform
    near_uniform = stretched_grid(10, 20, 1e-6)
    np.testing.assert_allclose(near_uniform.edges, uniform_grid(10, 20).edges, atol=1e-9)
    m = parse_grid_spec("stretched:50:80:5:2")
    assert isinstance(m, FourierGridMulti) and m.size == 6400
    np.testing.assert_array_equal(m.axis.edges, g.edges)
    assert parse_grid_spec("stretched:50:80:5").size == 80
    with pytest.raises(InvalidArgument):
        stretched_grid(10, 20, 0.0)


def test_scaled_grid():
    g = uniform_grid(10, 20).scaled(0.5)
    assert g.eta_max == pytest.approx(5.0)
    np.testing.assert_allclose(g.widths, 0.5)


@given(st.lists(st.floats(0.01, 5.0), min_size=2, max_size=40), st.sampled_from(["left", "midpoint"]))
def test_cell_invariants(widths, rule):
    cum = np.concatenate([[0.0], np.cumsum(widths)])
    edges = cum - cum[-1] / 2
    edges[0] = -edges[-1]
    g = nonuniform_grid(edges, rule)
    assert np.all(np.diff(g.edges) > 0)
    assert np.all(g.nodes >= g.edges[:-1]) and np.all(g.nodes < g.edges[1:])
    assert g.widths.sum() == pytest.approx(edges[-1] - edges[0], rel=1e-12)
    assert g.delta_min > 0


@given(st.floats(0.1, 100), st.integers(2, 300), st.sampled_from(["left", "midpoint"]))
def test_uniform_invariants(eta, p, rule):
    g = uniform_grid(eta, p, rule)
    assert g.edges[0] == -eta and g.edges[-1] == eta
    assert g.widths.sum() == pytest.approx(2 * eta, abs=1e-12 * eta * p)
    assert g.delta_max == pytest.approx(g.delta_min, rel=1e-9)
    np.testing.assert_allclose(cell_weights(g), g.widths)
