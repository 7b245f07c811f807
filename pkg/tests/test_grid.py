import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erf

from rdmlab.errors import BudgetExceeded
from rdmlab.grid import Cell, axis_rule, block_grid, cells_covering, make_grid, truncation_radius
from rdmlab.model import ParticleConfig


def test_midpoint_two_points():
    r = axis_rule(2, 1.0, "midpoint")
    np.testing.assert_allclose(r.nodes, [-0.5, 0.5])
    np.testing.assert_allclose(r.weights, [1.0, 1.0])


def test_gauss_legendre_exactness():
    r = axis_rule(5, 1.0, "gauss_legendre")
    assert np.sum(r.weights * r.nodes**8) == pytest.approx(2 / 9, abs=1e-14)


def test_gaussian_tail_integral():
    r = axis_rule(64, 6.0, "gauss_legendre")
    val = np.sum(r.weights * np.exp(-r.nodes**2))
    oracle = math.sqrt(math.pi) * erf(6.0)
    assert val == pytest.approx(oracle, abs=1e-10)
    assert val == pytest.approx(math.sqrt(math.pi), abs=1e-10)


@pytest.mark.parametrize("rule,degree", [("midpoint", 1), ("gauss_legendre", None)])
@pytest.mark.parametrize("n", [2, 3, 7, 12])
def test_monomial_exactness(rule, degree, n):
    R = 1.7
    r = axis_rule(n, R, rule)
    assert np.all(r.weights > 0) and np.all(np.diff(r.nodes) > 0)
    top = degree if degree is not None else 2 * n - 1
    for k in range(top + 1):
        exact = (R ** (k + 1) - (-R) ** (k + 1)) / (k + 1)
        assert np.sum(r.weights * r.nodes**k) == pytest.approx(exact, rel=1e-12, abs=1e-12)


def test_invalid_rule_arguments():
    with pytest.raises(ValueError):
        axis_rule(1, 1.0)
    with pytest.raises(ValueError):
        axis_rule(4, 0.0)
    with pytest.raises(ValueError):
        axis_rule(4, 1.0, "simpson")


def test_grid_shape_and_index_bijection():
    g = make_grid(ParticleConfig(3, 1, 1), 5, 2.0)
    assert g.total_points == 125 == math.prod(g.shape)
    pts = g.points()
    assert pts.shape == (125, 3, 1)
    idx = [g.index(g.multi_index(i)) for i in range(g.total_points)]
    assert idx == list(range(125))
    mi = g.multi_index(37)
    for p in range(3):
        assert pts[37, p, 0] == g.axes[p].nodes[mi[p]]
    assert g.weights().sum() == pytest.approx(4.0**3)


def test_split_is_product():
    g = make_grid(ParticleConfig(3, 2, 1), 4, 1.0, "gauss_legendre")
    c, h = g.split(1)
    assert c.total_points * h.total_points == g.total_points
    np.testing.assert_allclose(np.outer(h.weights(), c.weights()).sum(), g.weights().sum())
    assert g.particles_identical()


def test_budget_exceeded_suggests_size():
    with pytest.raises(BudgetExceeded, match="at most"):
        make_grid(ParticleConfig(3, 3, 1), 20, 2.0, budget=10**6)


def test_fingerprint_changes_with_grid():
    pc = ParticleConfig(2, 1, 1)
    a = make_grid(pc, 6, 2.0).fingerprint()
    assert a == make_grid(pc, 6, 2.0).fingerprint()
    assert a != make_grid(pc, 6, 2.5).fingerprint()
    assert a != make_grid(pc, 6, 2.0, "gauss_legendre").fingerprint()


def test_truncation_radius_examples():
    assert truncation_radius(1.0, math.exp(-10)) == pytest.approx(10.0)
    assert truncation_radius(2.0, math.exp(-10)) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        truncation_radius(1.0, 1.5)


@given(st.floats(0.01, 100.0), st.floats(1e-12, 0.99))
def test_truncation_radius_scaling(kappa, eps):
    R = truncation_radius(kappa, eps)
    assert truncation_radius(2 * kappa, eps) == pytest.approx(R / 2)
    assert math.exp(-kappa * R) == pytest.approx(eps, rel=1e-9)


def test_cells_covering_examples():
    g1 = make_grid(ParticleConfig(2, 1, 1), 8, 1.0)
    assert sorted(c.nu for c in cells_covering(g1, 1)) == [(-1,), (0,)]
    g2 = make_grid(ParticleConfig(3, 1, 2), 8, 2.0)
    assert len(cells_covering(g2, 2)) == 16


@pytest.mark.parametrize("box,K", [(1.0, 1), (2.0, 2), (1.5, 2), (2.5, 1)])
def test_cells_partition_grid_nodes(box, K):
    g = make_grid(ParticleConfig(3, 1, K), 10, box)
    check, _ = g.split(K)
    pts = check.points()
    cells = cells_covering(g, K)
    count = sum(c.contains(pts).astype(int) for c in cells)
    assert np.all(count == 1)


def test_cell_bounds_half_open():
    c = Cell((1, -2))
    np.testing.assert_array_equal(c.lower, [1, -2])
    np.testing.assert_array_equal(c.upper, [2, -1])
    assert c.contains(np.array([1.0, -2.0]))
    assert not c.contains(np.array([2.0, -1.5]))


def test_block_grid_box():
    g = block_grid(2, 1, 4, [1.0, -1.0], [2.0, 0.0])
    pts = g.points()
    assert np.all(Cell((1, -1)).contains(pts))
    assert g.weights().sum() == pytest.approx(1.0)
