import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import hankel1

from phaseless.exceptions import ZeroDisplacementError
from phaseless.greens import far_field_coefficient, outgoing_green, singular_cell_weight


def test_3d_kernel_frozen_value():
    got = outgoing_green(np.array([1.0, 0.0, 0.0]), 1.0, 3)
    assert_allclose(got, -np.exp(1j) / (4 * np.pi), rtol=1e-15)


def test_3d_kernel_radial_formula(rng):
    xs = rng.standard_normal((20, 3))
    k = 2.7
    r = np.linalg.norm(xs, axis=1)
    assert_allclose(outgoing_green(xs, k, 3), -np.exp(1j * k * r) / (4 * np.pi * r), rtol=1e-14)


def test_2d_kernel_is_hankel(rng):
    xs = rng.standard_normal((20, 2))
    k = 1.9
    r = np.linalg.norm(xs, axis=1)
    assert_allclose(outgoing_green(xs, k, 2), -0.25j * hankel1(0, k * r), rtol=1e-14)


def test_2d_kernel_satisfies_helmholtz():
    # radial check: u'' + u'/r + k^2 u = 0 away from the origin,
    # finite differences on a fine radial stencil
    k = 3.0
    r0, h = 1.3, 1e-5
    u = lambda r: outgoing_green(np.array([r, 0.0]), k, 2)
    lap = (u(r0 + h) - 2 * u(r0) + u(r0 - h)) / h**2 + (u(r0 + h) - u(r0 - h)) / (2 * h * r0)
    assert abs(lap + k**2 * u(r0)) < 1e-5


def test_zero_displacement_raises():
    with pytest.raises(ZeroDisplacementError):
        outgoing_green(np.zeros(2), 1.0, 2)
    with pytest.raises(ZeroDisplacementError):
        outgoing_green(np.array([[1.0, 0.0], [0.0, 0.0]]), 1.0, 2)


def test_far_field_coefficient_frozen():
    assert_allclose(far_field_coefficient(3, 1.0), -2 * np.pi**2, rtol=1e-15)
    # k-scaling exponents: (d-3)/2
    assert_allclose(
        far_field_coefficient(3, 4.0), far_field_coefficient(3, 1.0), rtol=1e-15
    )
    assert_allclose(
        abs(far_field_coefficient(2, 4.0)),
        abs(far_field_coefficient(2, 1.0)) / 2.0,
        rtol=1e-12,
    )


@pytest.mark.parametrize("dim", [2, 3])
def test_singular_cell_weight_matches_quadrature(dim):
    # integrate the kernel in polar/spherical coordinates over the
    # equal-measure disc or ball; the angular part is trivial
    k = 2.3
    vol = 0.02
    if dim == 2:
        a = np.sqrt(vol / np.pi)
        rs = np.linspace(0, a, 20001)[1:]
        vals = -0.25j * hankel1(0, k * rs) * 2 * np.pi * rs
    else:
        a = (3 * vol / (4 * np.pi)) ** (1 / 3)
        rs = np.linspace(0, a, 20001)[1:]
        vals = -np.exp(1j * k * rs) / (4 * np.pi * rs) * 4 * np.pi * rs**2
    quad = np.trapezoid(vals, rs)
    assert abs(quad - singular_cell_weight(k, dim, vol)) < 5e-6


def test_singular_weight_small_cell_limit():
    # shrinking the cell must shrink the weight
    w1 = abs(singular_cell_weight(2.0, 2, 1e-2))
    w2 = abs(singular_cell_weight(2.0, 2, 1e-4))
    assert w2 < w1


def test_argument_validation():
    with pytest.raises(ValueError):
        outgoing_green(np.ones(2), -1.0, 2)
    with pytest.raises(ValueError):
        far_field_coefficient(4, 1.0)
    with pytest.raises(ValueError):
        singular_cell_weight(1.0, 2, 0.0)
