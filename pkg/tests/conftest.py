import numpy as np
import pytest

from phaseless.grids import GridSpec
from phaseless.potentials import PotentialSpec
from phaseless.synthesis import BackgroundSet


@pytest.fixture
def box_grid():
    return GridSpec(2, 64, (-1.5, -1.5), (1.5, 1.5))


@pytest.fixture
def off_center_ball():
    return PotentialSpec.ball((0.3, -0.2), 0.25, 1.0)


@pytest.fixture
def two_ball_refs():
    # centers chosen so the center difference is not commensurate with
    # any probe lattice used in the tests; aligned centers put exact
    # phase-degeneracy nodes on the grid and inflate the mask.
    return BackgroundSet(
        (
            PotentialSpec.ball((-0.93, -0.61), 0.3, 1.0),
            PotentialSpec.ball((0.88, 0.79), 0.45, 1.0),
        )
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
