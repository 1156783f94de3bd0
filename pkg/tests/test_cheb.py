"""Operator construction: node placement, exactness, pinned rows."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lvim.cheb import CollocationGrid, build_operators, cgl_nodes, interpolate


def chebvals(tau, coef):
    return np.polynomial.chebyshev.chebval(tau, coef)


def test_cgl_nodes_five_point():
    nodes = cgl_nodes(5)
    expected = np.array([-1.0, -np.sqrt(0.5), 0.0, np.sqrt(0.5), 1.0])
    assert np.allclose(nodes, expected, atol=1e-15)
    # sine construction keeps the grid exactly antisymmetric
    assert np.all(nodes + nodes[::-1] == 0.0)


def test_cgl_nodes_endpoints_and_order():
    for m in (2, 3, 8, 26):
        nodes = cgl_nodes(m)
        assert nodes[0] == -1.0 and nodes[-1] == 1.0
        assert np.all(np.diff(nodes) > 0)


def test_grid_validation():
    with pytest.raises(ValueError):
        CollocationGrid(1, 0.0, 1.0)
    with pytest.raises(ValueError):
        CollocationGrid(5, 0.0, 0.0)


@pytest.mark.parametrize("n", [2, 5, 7, 13, 26])
@pytest.mark.parametrize("dt", [0.1, 0.5, 1.0, 500.0])
def test_operator_exactness(n, dt):
    """q and p must reproduce derivative and running integral of every
    basis polynomial at the nodes."""
    grid = CollocationGrid(n, 0.3, dt)
    ops = build_operators(grid)
    tau = grid.nodes
    tol = 1e-9 if (n, dt) == (26, 500.0) else 1e-12
    for k in range(n):
        coef = np.zeros(k + 1)
        coef[k] = 1.0
        v = chebvals(tau, coef)
        dv = chebvals(tau, np.polynomial.chebyshev.chebder(coef)) * (2.0 / dt)
        iv = chebvals(tau, np.polynomial.chebyshev.chebint(coef, lbnd=-1.0)) * (dt / 2.0)
        assert np.max(np.abs(ops.q_mat @ v - dv)) <= tol * max(1.0, np.max(np.abs(dv)))
        assert np.max(np.abs(ops.p_mat @ v - iv)) <= tol * max(1.0, np.max(np.abs(iv)))


def test_first_rows_pinned_to_zero():
    for n in (2, 5, 13):
        ops = build_operators(CollocationGrid(n, -2.0, 3.7))
        assert np.all(ops.p_mat[0] == 0.0)
        assert np.all(ops.h_mat[0] == 0.0)


def test_shift_invariance():
    a = build_operators(CollocationGrid(7, 0.0, 1.3))
    b = build_operators(CollocationGrid(7, 17.3, 1.3))
    assert np.array_equal(a.q_mat, b.q_mat)
    assert np.array_equal(a.p_mat, b.p_mat)
    assert np.max(np.abs(a.h_mat - b.h_mat)) < 1e-12


def test_n2_operators_are_two_point_rules():
    # with two nodes the interpolant is the chord, so differentiation is
    # the finite difference and integration the trapezoid
    dt = 0.4
    ops = build_operators(CollocationGrid(2, 0.0, dt))
    assert np.allclose(ops.q_mat, np.array([[-1.0, 1.0], [-1.0, 1.0]]) / dt)
    assert np.allclose(ops.p_mat, np.array([[0.0, 0.0], [0.5, 0.5]]) * dt)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3.0, 3.0), min_size=5, max_size=5))
def test_interpolate_reproduces_nodes(coef):
    grid = CollocationGrid(5, 1.0, 2.0)
    vals = chebvals(grid.nodes, np.asarray(coef))
    for t, v in zip(grid.physical_nodes, vals):
        assert interpolate(grid, vals, float(t)) == pytest.approx(v, abs=1e-12)


def test_interpolate_matches_polynomial_between_nodes():
    grid = CollocationGrid(7, 0.0, 2.0)
    poly = np.array([0.3, -1.2, 0.5, 0.0, 2.0, -0.7, 0.1])
    vals = chebvals(grid.nodes, poly)
    for t in np.linspace(0.0, 2.0, 17):
        tau = t - 1.0
        assert interpolate(grid, vals, t) == pytest.approx(
            chebvals(tau, poly), abs=1e-12)


def test_interpolate_vector_values_and_domain_check():
    grid = CollocationGrid(5, 0.0, 1.0)
    vals = np.column_stack([grid.physical_nodes, grid.physical_nodes ** 2])
    out = interpolate(grid, vals, 0.5)
    assert out.shape == (2,)
    assert out[0] == pytest.approx(0.5, abs=1e-13)
    assert out[1] == pytest.approx(0.25, abs=1e-13)
    with pytest.raises(ValueError):
        interpolate(grid, vals, 1.5)
