import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import j1

from phaseless.exceptions import SupportOutsideBoxError
from phaseless.grids import GridSpec
from phaseless.potentials import (
    BallPrimitive,
    GaussianPrimitive,
    PotentialSpec,
    analytic_hat,
    rasterize,
    spec_from_dict,
    spec_to_dict,
    sup_weighted_norm,
    support_distance,
    supports_disjoint,
)

# Independent midpoint-quadrature values for the transform with the
# e^{+ip.x} kernel, 2048^2 nodes over the support bounding box.  The
# ball values carry the quadrature's own boundary error (~2e-7); the
# smooth gaussian integrates to ~1e-10.
BALL_HAT_ORACLE = {
    (0.0, 0.0): (0.00497372685996815, 0.0),
    (2.0943951023931953, 0.0): (0.0038874976675744768, 0.0028244323830145064),
    (3.5, -1.25): (0.0011919640530778743, 0.004293576633481645),
    (12.0, 5.0): (-0.0006323352697148985, 0.0003804107565976819),
}
GAUSS_HAT_ORACLE = {
    (0.0, 0.0): (0.00160400939254205, 0.0),
    (2.5, 1.0): (0.0012120655394687921, -0.0009214175551425092),
    (-7.0, 3.0): (-0.0008024775695938359, -0.0006875332177810489),
}


def test_ball_hat_against_quadrature_oracle():
    v = PotentialSpec.ball((0.3, -0.2), 0.25, 1.0)
    for p, (re, im) in BALL_HAT_ORACLE.items():
        got = analytic_hat(v, np.array(p))
        assert abs(got - complex(re, im)) < 3e-7


def test_gaussian_hat_against_quadrature_oracle():
    v = PotentialSpec.gaussian((-0.4, 0.35), width=0.12, cutoff=0.5, amplitude=0.7)
    for p, (re, im) in GAUSS_HAT_ORACLE.items():
        got = analytic_hat(v, np.array(p))
        assert abs(got - complex(re, im)) < 1e-9


def test_ball_hat_closed_form_cross_check():
    # second independent route: centered ball transform is
    # A (2pi)^-2 e^{ip.c} 2 pi R J1(R|p|)/|p|
    center = np.array([0.3, -0.2])
    R, A = 0.25, 1.0
    v = PotentialSpec.ball(tuple(center), R, A)
    rng = np.random.default_rng(5)
    ps = rng.uniform(-15, 15, size=(50, 2))
    pn = np.linalg.norm(ps, axis=1)
    expected = (
        A
        * (2 * np.pi) ** -2
        * np.exp(1j * ps @ center)
        * 2.0
        * np.pi
        * R
        * j1(R * pn)
        / pn
    )
    assert_allclose(analytic_hat(v, ps), expected, atol=1e-14)


def test_hat_at_zero_is_scaled_volume():
    v = PotentialSpec.ball((0.0, 0.0), 0.5, 2.0)
    expected = 2.0 * np.pi * 0.25 / (2 * np.pi) ** 2
    assert_allclose(analytic_hat(v, np.zeros(2)), expected, rtol=1e-14)


def test_hat_linearity_of_sum():
    a = PotentialSpec.ball((0.2, 0.0), 0.3, 1.0)
    b = PotentialSpec.gaussian((-0.5, 0.4), width=0.1, cutoff=0.35, amplitude=0.5)
    p = np.array([[1.2, -0.7], [4.0, 2.0]])
    assert_allclose(analytic_hat(a + b, p), analytic_hat(a, p) + analytic_hat(b, p), rtol=1e-14)


def test_translate_phase_law():
    v = PotentialSpec.ball((0.0, 0.0), 0.4, 1.0)
    y = np.array([0.3, -0.7])
    p = np.array([[2.0, 1.0], [-3.0, 0.5]])
    shifted = v.translate(tuple(y))
    assert_allclose(analytic_hat(shifted, p), analytic_hat(v, p) * np.exp(1j * p @ y), rtol=1e-13)


def test_rasterize_pointwise_ball(box_grid, off_center_ball):
    f = rasterize(off_center_ball, box_grid)
    nodes = box_grid.nodes()
    r = np.linalg.norm(nodes - np.array([0.3, -0.2]), axis=1)
    expected = np.where(r <= 0.25, 1.0, 0.0)
    assert_allclose(f.values.reshape(-1), expected)


def test_rasterize_requires_support_inside_box():
    g = GridSpec(2, 16, (-1.0, -1.0), (1.0, 1.0))
    with pytest.raises(SupportOutsideBoxError):
        rasterize(PotentialSpec.ball((0.9, 0.0), 0.3, 1.0), g)


def test_rasterized_mass_converges_to_ball_area():
    v = PotentialSpec.ball((0.1, 0.05), 0.5, 1.0)
    masses = []
    for n in (32, 128):
        g = GridSpec(2, n, (-1.0, -1.0), (1.0, 1.0))
        f = rasterize(v, g)
        masses.append(float(np.sum(f.values.real) * g.cell_volume))
    exact = np.pi * 0.25
    assert abs(masses[1] - exact) < abs(masses[0] - exact)
    assert abs(masses[1] - exact) < 4e-3


def test_support_distance_and_disjoint():
    a = PotentialSpec.ball((0.0, 0.0), 0.3, 1.0)
    b = PotentialSpec.ball((1.0, 0.0), 0.3, 1.0)
    assert_allclose(support_distance(a, b), 0.4, rtol=1e-12)
    assert supports_disjoint(a, b)
    c = PotentialSpec.ball((0.5, 0.0), 0.3, 1.0)
    assert not supports_disjoint(a, c)
    # touching counts as overlapping: the gap must be strictly positive
    d = PotentialSpec.ball((0.6, 0.0), 0.3, 1.0)
    assert not supports_disjoint(a, d)


def test_bounding_center_radius_and_diameter():
    v = PotentialSpec.ball((0.0, 0.0), 0.2, 1.0) + PotentialSpec.ball((1.0, 0.0), 0.1, 1.0)
    center, radius = v.bounding_center_radius()
    assert radius >= 0.6
    assert v.diameter() >= 1.1
    assert v.diameter() <= 2.0 * radius + 1e-12


def test_sup_weighted_norm_ball_exact():
    # weight (1+|x|^2)^(sigma/2) peaks at the far edge of the support
    v = PotentialSpec.ball((0.0, 0.0), 1.0, 1.0)
    assert_allclose(sup_weighted_norm(v, 4.0), 4.0, rtol=1e-6)
    off = PotentialSpec.ball((2.0, 0.0), 0.5, 1.0)
    assert_allclose(sup_weighted_norm(off, 2.0), 7.25, rtol=1e-6)
    assert_allclose(sup_weighted_norm(off, 0.0), 1.0, rtol=1e-12)


def test_gaussian_cutoff_is_hard():
    v = PotentialSpec.gaussian((0.0, 0.0), width=0.5, cutoff=0.6, amplitude=1.0)
    g = GridSpec(2, 64, (-1.0, -1.0), (1.0, 1.0))
    f = rasterize(v, g)
    nodes = g.nodes()
    outside = np.linalg.norm(nodes, axis=1) > 0.6
    assert np.all(f.values.reshape(-1)[outside] == 0.0)


def test_spec_serialization_round_trip():
    v = PotentialSpec.ball((0.3, -0.2), 0.25, 1.0) + PotentialSpec.gaussian(
        (0.44, 0.0), width=0.035, cutoff=0.12, amplitude=0.8j
    )
    d = spec_to_dict(v)
    back = spec_from_dict(d)
    assert spec_to_dict(back) == d
    p = np.array([[1.0, 2.0], [0.5, -1.5]])
    assert_allclose(analytic_hat(back, p), analytic_hat(v, p), rtol=1e-15)


def test_spec_from_dict_rejects_unknown_kind():
    with pytest.raises(Exception):
        spec_from_dict({"dim": 2, "components": [{"kind": "torus"}]})


def test_primitive_validation():
    with pytest.raises(ValueError):
        BallPrimitive((0.0, 0.0), -0.1, 1.0)
    with pytest.raises(ValueError):
        GaussianPrimitive((0.0, 0.0), -0.5, 0.2, 1.0)
    with pytest.raises(ValueError):
        PotentialSpec.ball((0.0, 0.0), 0.2, 1.0).translate((1.0,))


def test_is_zero():
    assert PotentialSpec(2, ()).is_zero()
    assert not PotentialSpec.ball((0, 0), 0.1, 1.0).is_zero()
