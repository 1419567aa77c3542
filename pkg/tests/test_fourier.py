import numpy as np
import pytest
from numpy.testing import assert_allclose

from phaseless.exceptions import GridMismatchError
from phaseless.fourier import forward_transform, inverse_transform
from phaseless.grids import GridSpec, ScalarField
from phaseless.potentials import PotentialSpec, analytic_hat, rasterize

SMOOTH = PotentialSpec.gaussian((0.1, -0.2), width=0.3, cutoff=1.2, amplitude=1.0)


def test_round_trip_identity():
    g = GridSpec(2, 48, (-1.5, -1.5), (1.5, 1.5))
    f = rasterize(SMOOTH, g)
    back = inverse_transform(forward_transform(f))
    assert float(np.max(np.abs(back.values - f.values))) < 1e-12


def test_round_trip_complex_field(rng):
    g = GridSpec(2, 32, (-1.0, -1.0), (1.0, 1.0))
    vals = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    f = ScalarField(g, vals)
    back = inverse_transform(forward_transform(f))
    assert float(np.max(np.abs(back.values - vals))) < 1e-12


def test_transform_matches_analytic_hat_for_smooth_potential():
    g = GridSpec(2, 64, (-1.5, -1.5), (1.5, 1.5))
    F = forward_transform(rasterize(SMOOTH, g))
    nodes = F.grid.nodes()
    keep = np.linalg.norm(nodes, axis=1) <= 10.0
    hat = analytic_hat(SMOOTH, nodes[keep])
    assert float(np.max(np.abs(F.values.reshape(-1)[keep] - hat))) < 5e-7


def test_smooth_transform_convergence_beats_factor_three():
    errs = {}
    for n in (32, 64):
        g = GridSpec(2, n, (-1.5, -1.5), (1.5, 1.5))
        F = forward_transform(rasterize(SMOOTH, g))
        nodes = F.grid.nodes()
        keep = np.linalg.norm(nodes, axis=1) <= 10.0
        errs[n] = float(np.max(np.abs(F.values.reshape(-1)[keep] - analytic_hat(SMOOTH, nodes[keep]))))
    assert errs[32] / errs[64] >= 3.0


def test_discontinuous_support_converges_slower():
    # sharp-edged supports hit the quadrature's boundary floor; the
    # refinement gain must be visibly worse than for the smooth case
    ball = PotentialSpec.ball((0.1, -0.2), 0.5, 1.0)
    errs = {}
    for n in (32, 64):
        g = GridSpec(2, n, (-1.5, -1.5), (1.5, 1.5))
        F = forward_transform(rasterize(ball, g))
        nodes = F.grid.nodes()
        keep = np.linalg.norm(nodes, axis=1) <= 10.0
        errs[n] = float(np.max(np.abs(F.values.reshape(-1)[keep] - analytic_hat(ball, nodes[keep]))))
    ratio_ball = errs[32] / errs[64]
    assert ratio_ball < 3.0
    assert errs[64] > 1e-5


def test_parseval_with_kernel_normalization():
    g = GridSpec(2, 64, (-1.5, -1.5), (1.5, 1.5))
    f = rasterize(SMOOTH, g)
    F = forward_transform(f)
    space = float(np.sum(np.abs(f.values) ** 2) * g.cell_volume)
    spectral = float(np.sum(np.abs(F.values) ** 2) * F.grid.cell_volume)
    assert_allclose(spectral, space / (2 * np.pi) ** 2, rtol=1e-12)


def test_real_field_conjugate_symmetry():
    g = GridSpec(2, 48, (-1.5, -1.5), (1.5, 1.5))
    F = forward_transform(rasterize(SMOOTH, g))
    assert F.conjugate_symmetry_error() < 1e-13


def test_inverse_requires_matching_grid():
    g = GridSpec(2, 32, (-1.0, -1.0), (1.0, 1.0))
    other = GridSpec(2, 32, (-2.0, -2.0), (2.0, 2.0))
    F = forward_transform(rasterize(PotentialSpec.ball((0, 0), 0.3, 1.0), g))
    with pytest.raises(GridMismatchError):
        inverse_transform(F, other)
