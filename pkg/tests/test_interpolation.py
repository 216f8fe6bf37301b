import numpy as np
import pytest

from h2bem.clustering import AxisBox
from h2bem.interpolation import TensorGrid, chebyshev_nodes_1d, lagrange_eval, shift_grid
from h2bem.quadkernel import Kernel, KernelKind


def test_nodes_theta0():
    nodes = chebyshev_nodes_1d(0, -1.0, 1.0)
    assert nodes.shape == (1,)
    assert abs(nodes[0]) <= 1e-15


def test_nodes_theta1():
    nodes = np.sort(chebyshev_nodes_1d(1, -1.0, 1.0))
    assert np.allclose(nodes, [-np.sqrt(2) / 2, np.sqrt(2) / 2])


def test_nodes_theta2_mapped():
    nodes = np.sort(chebyshev_nodes_1d(2, 0.0, 2.0))
    assert np.allclose(nodes, [1 - np.sqrt(3) / 2, 1.0, 1 + np.sqrt(3) / 2])


def test_nodes_interior_and_symmetric():
    for theta in (1, 3, 6):
        nodes = chebyshev_nodes_1d(theta, 2.0, 5.0)
        assert nodes.min() > 2.0 and nodes.max() < 5.0
        assert np.allclose(np.sort(nodes) + np.sort(nodes)[::-1], 7.0)


@pytest.fixture(scope="module")
def grid():
    return TensorGrid(3, AxisBox([0.0, -1.0, 2.0], [2.0, 1.0, 5.0]))


def test_cardinal_property(grid):
    pts = grid.points()
    assert pts.shape == (grid.size, 3)
    vals = grid.eval(pts)
    assert np.array_equal(vals, np.eye(grid.size)) or np.abs(vals - np.eye(grid.size)).max() <= 1e-13


def test_lagrange_eval_scalar_api(grid):
    theta = grid.theta
    pts = grid.points()
    nu = (1, 2, 0)
    flat = (nu[0] * (theta + 1) + nu[1]) * (theta + 1) + nu[2]
    assert lagrange_eval(grid, nu, pts[flat]) == pytest.approx(1.0)
    other = (0, 0, 0)
    assert abs(lagrange_eval(grid, other, pts[flat])) <= 1e-13


def test_partition_of_unity(grid, rng):
    x = rng.uniform(0, 1, (100, 3)) * [2.0, 2.0, 3.0] + [0.0, -1.0, 2.0]
    assert np.abs(grid.eval(x).sum(axis=1) - 1.0).max() <= 1e-13


def test_polynomial_reproduction(grid, rng):
    f = lambda x: x[:, 0] * x[:, 1]
    coef = f(grid.points())
    x = rng.uniform(0, 1, (100, 3)) * [2.0, 2.0, 3.0] + [0.0, -1.0, 2.0]
    assert np.abs(grid.eval(x) @ coef - f(x)).max() <= 1e-12


def test_tensor_polynomial_reproduction_full_degree(grid, rng):
    # coordinate degree up to theta in every axis
    f = lambda x: (x[:, 0] ** 3) * (x[:, 1] ** 2 - x[:, 1]) * (x[:, 2] ** 3 + 1)
    coef = f(grid.points())
    x = rng.uniform(0, 1, (50, 3)) * [2.0, 2.0, 3.0] + [0.0, -1.0, 2.0]
    ref = f(x)
    assert np.abs(grid.eval(x) @ coef - ref).max() <= 1e-10 * np.abs(ref).max()


def test_gradient_matches_finite_differences(grid, rng):
    x = rng.uniform(0.2, 0.8, (20, 3)) * [2.0, 2.0, 3.0] + [0.0, -1.0, 2.0]
    _, grad = grid.eval_grad(x)
    h = 1e-6
    for axis in range(3):
        xp, xm = x.copy(), x.copy()
        xp[:, axis] += h
        xm[:, axis] -= h
        fd = (grid.eval(xp) - grid.eval(xm)) / (2 * h)
        assert np.abs(fd - grad[:, :, axis]).max() <= 1e-8


def test_shift_zero_is_identity(grid):
    shifted = shift_grid(grid, np.zeros(3))
    assert np.array_equal(shifted.nodes, grid.nodes)
    assert np.array_equal(shifted.box.lower, grid.box.lower)


def test_shift_translates_points():
    grid = TensorGrid(2, AxisBox([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]))
    shifted = shift_grid(grid, np.array([1.0, 0.0, 0.0]))
    assert np.allclose(shifted.points(), grid.points() + [1.0, 0.0, 0.0])
    assert np.allclose(shifted.box.lower, [1.0, 0.0, 0.0])


def test_shift_translation_identity(grid, rng):
    m = rng.uniform(-3, 3, 3)
    shifted = shift_grid(grid, m)
    x = rng.uniform(0, 1, (100, 3)) * [2.0, 2.0, 3.0] + [0.0, -1.0, 2.0]
    assert np.abs(shifted.eval(x + m) - grid.eval(x)).max() <= 1e-13


def test_interpolation_error_decays_with_degree(rng):
    """Tensor interpolation of 1/(4 pi |x-y|) on a well-separated admissible
    box pair loses at least a factor 2 per unit degree."""
    kernel = Kernel(KernelKind.SINGLE_LAYER_LAPLACE)
    box_x = AxisBox([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    box_y = AxisBox([2.5, 0.0, 0.0], [3.5, 1.0, 1.0])
    xs = rng.uniform(0, 1, (40, 3))
    ys = rng.uniform(0, 1, (40, 3)) + [2.5, 0.0, 0.0]
    exact = kernel.coupling(xs[:, None, :], ys[None, :, :])
    errors = []
    for theta in range(2, 7):
        gx = TensorGrid(theta, box_x)
        gy = TensorGrid(theta, box_y)
        s = kernel.coupling(gx.points()[:, None, :], gy.points()[None, :, :])
        approx = gx.eval(xs) @ s @ gy.eval(ys).T
        errors.append(np.abs(approx - exact).max())
    for coarse, fine in zip(errors, errors[1:]):
        assert fine <= coarse / 2.0
