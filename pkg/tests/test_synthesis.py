import numpy as np
import pytest
from numpy.testing import assert_allclose

from phaseless.exceptions import BackgroundValidationError
from phaseless.geometry import EnergySet
from phaseless.grids import GridSpec
from phaseless.potentials import PotentialSpec, analytic_hat
from phaseless.solver import SolverConfig
from phaseless.synthesis import (
    FLAG_OK,
    FLAG_SOLVER_FAILED,
    BackgroundSet,
    read_dataset,
    synthesize,
    translation_twin_demo,
    validate_backgrounds,
    write_dataset,
)

PGRID = GridSpec(2, 12, (-2.0, -2.0), (2.0, 2.0)).dual()
ENERGIES = EnergySet((4.0, 9.0))


def test_born_values_are_squared_transforms(off_center_ball, two_ball_refs):
    ds = synthesize(off_center_ball, two_ball_refs, ENERGIES, PGRID)
    assert ds.values.shape[1] == 3
    variants = [off_center_ball] + [off_center_ball + w for w in two_ball_refs.backgrounds]
    for row, ch in enumerate(ds.channels):
        p = np.asarray(ch.transfer)
        for col, spec in enumerate(variants):
            expected = abs(analytic_hat(spec, p)) ** 2
            assert_allclose(ds.values[row, col], expected, rtol=1e-13, atol=1e-300)
    assert np.all(ds.flags == FLAG_OK)


def test_refsfree_dataset_has_single_column(off_center_ball):
    ds = synthesize(off_center_ball, None, ENERGIES, PGRID)
    assert ds.values.shape[1] == 1
    assert ds.n_refs == 0


def test_single_reference_gives_two_columns(off_center_ball):
    refs = BackgroundSet((PotentialSpec.ball((-1.0, -1.0), 0.3, 1.0),))
    ds = synthesize(off_center_ball, refs, ENERGIES, PGRID)
    assert ds.values.shape[1] == 2


def test_overlapping_reference_rejected(off_center_ball):
    refs = BackgroundSet((PotentialSpec.ball((0.35, -0.2), 0.3, 1.0),))
    with pytest.raises(BackgroundValidationError, match="overlap"):
        synthesize(off_center_ball, refs, ENERGIES, PGRID)


def test_identical_references_rejected():
    w = PotentialSpec.ball((0.8, 0.8), 0.3, 1.0)
    with pytest.raises(BackgroundValidationError, match="identical"):
        BackgroundSet((w, PotentialSpec.ball((0.8, 0.8), 0.3, 1.0)))


def test_zero_reference_rejected():
    with pytest.raises(BackgroundValidationError, match="zero"):
        BackgroundSet((PotentialSpec(2, ()),))


def test_background_count_limits(off_center_ball):
    balls = tuple(PotentialSpec.ball((0.9 * j, -0.9), 0.1, 1.0) for j in range(3))
    with pytest.raises(BackgroundValidationError):
        BackgroundSet(balls)
    with pytest.raises(BackgroundValidationError):
        BackgroundSet(())


def test_channel_rows_address_probe_nodes(off_center_ball):
    ds = synthesize(off_center_ball, None, ENERGIES, PGRID)
    nodes = PGRID.nodes()
    for ch, idx in zip(ds.channels, ds.node_index):
        assert_allclose(nodes[idx], ch.transfer, atol=1e-12)
    lookup = ds.row_lookup()
    assert len(lookup) == len(ds.channels)
    rows4 = ds.rows_for_energy(4.0)
    assert all(ds.channels[r].energy == 4.0 for r in rows4)


def test_failed_solves_are_flagged_not_dropped(tmp_path):
    # an iteration cap this tight cannot converge on a strong scatterer
    strong = PotentialSpec.ball((0.0, 0.0), 0.4, 60.0)
    grid = GridSpec(2, 48, (-1.5, -1.5), (1.5, 1.5))
    cfg = SolverConfig(method="born", max_iterations=2, fallback=False)
    ds = synthesize(
        strong, None, EnergySet((4.0,)), PGRID, mode="full-solver", grid=grid, solver=cfg
    )
    assert np.all(ds.flags == FLAG_SOLVER_FAILED)
    assert np.all(np.isnan(ds.values))
    base = str(tmp_path / "failed")
    write_dataset(ds, base)
    back = read_dataset(base)
    assert np.all(back.flags == FLAG_SOLVER_FAILED)
    assert np.all(np.isnan(back.values))


def test_dataset_roundtrip(tmp_path, off_center_ball, two_ball_refs):
    ds = synthesize(off_center_ball, two_ball_refs, ENERGIES, PGRID)
    base = str(tmp_path / "ds")
    write_dataset(ds, base, target=off_center_ball)
    back = read_dataset(base)
    assert back.mode == ds.mode
    assert back.pgrid.key() == ds.pgrid.key()
    assert back.energies == ds.energies
    assert back.node_index == ds.node_index
    assert np.array_equal(back.values, ds.values)
    assert back.backgrounds is not None
    assert back.backgrounds.count == 2


def test_dataset_hash_guards_tampering(tmp_path, off_center_ball):
    ds = synthesize(off_center_ball, None, ENERGIES, PGRID)
    base = str(tmp_path / "ds")
    write_dataset(ds, base)
    with open(base + ".csv") as fh:
        text = fh.read()
    with open(base + ".csv", "w") as fh:
        fh.write(text.replace("4.0", "4.1", 1))
    with pytest.raises(ValueError, match="hash"):
        read_dataset(base)


def test_withheld_target_not_recorded(tmp_path, off_center_ball):
    import json

    ds = synthesize(off_center_ball, None, ENERGIES, PGRID)
    base = str(tmp_path / "blind")
    write_dataset(ds, base, withhold_target=True, target=off_center_ball)
    with open(base + ".json") as fh:
        header = json.load(fh)
    assert header["target"] is None
    assert header["target_withheld"] is True


def test_translation_twin_is_invisible(off_center_ball):
    gap = translation_twin_demo(off_center_ball, (0.3, -0.4), 9.0, PGRID)
    assert gap < 1e-12
    assert translation_twin_demo(off_center_ball, (0.0, 0.0), 9.0, PGRID) == 0.0


def test_validate_backgrounds_translate_detector():
    w1 = PotentialSpec.ball((0.0, 0.0), 0.3, 1.0)
    y = (0.6, -0.4)
    refs = BackgroundSet((w1, w1.translate(y)))
    report = validate_backgrounds(refs, PGRID)
    assert report.translate_degeneracy
    assert_allclose(report.estimated_shift, y, atol=1e-8)
    assert any("translate" in w for w in report.warnings)


def test_validate_backgrounds_healthy_pair(two_ball_refs):
    pg = GridSpec(2, 48, (-1.6, -1.6), (1.6, 1.6)).dual()
    report = validate_backgrounds(two_ball_refs, pg)
    assert not report.translate_degeneracy
    assert report.estimated_shift is None
    assert report.degenerate_pair_fraction is not None
    assert 0.0 <= report.degenerate_pair_fraction < 0.25
    # ball transforms vanish on rings; every flagged node sits near one
    assert len(report.zero_radii) == 2
    for radii in report.zero_radii:
        assert all(r > 0 for r in radii)


def test_validate_backgrounds_explicit_threshold(two_ball_refs):
    pg = GridSpec(2, 48, (-1.6, -1.6), (1.6, 1.6)).dual()
    strict = validate_backgrounds(two_ball_refs, pg, eps_zero=1e-30)
    assert strict.zero_fraction == (0.0, 0.0)
    loose = validate_backgrounds(two_ball_refs, pg, eps_zero=1e30)
    assert loose.zero_fraction == (1.0, 1.0)


def test_worker_split_is_bitwise_stable(off_center_ball):
    grid = GridSpec(2, 32, (-1.5, -1.5), (1.5, 1.5))
    pg = GridSpec(2, 8, (-2.0, -2.0), (2.0, 2.0)).dual()
    one = synthesize(
        off_center_ball, None, EnergySet((9.0,)), pg, mode="full-solver", grid=grid, workers=1
    )
    two = synthesize(
        off_center_ball, None, EnergySet((9.0,)), pg, mode="full-solver", grid=grid, workers=2
    )
    assert np.array_equal(one.values, two.values)
    assert np.array_equal(one.flags, two.flags)
