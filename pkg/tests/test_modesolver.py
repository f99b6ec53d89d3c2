"""Effective-index solver: anchors, convergence, sweeps, voltage response."""

import math

import numpy as np
import pytest

from tilnsim.errors import ConfigError, DomainError, NotGuidedError
from tilnsim.modesolver import (
    Electrode,
    GridSpec,
    ModeSolver,
    PairGeometry,
    WaveguideGeometry,
)

LAMBDA = 0.812
STANDARD_PAIR = PairGeometry(
    WaveguideGeometry(5.6, electrode=Electrode(gap_um=4.0, orientation=1)),
    WaveguideGeometry(5.6, electrode=Electrode(gap_um=4.0, orientation=-1)),
    4.0,
)


def test_mode_count_anchors(solver):
    for pol in ("TM", "TE"):
        assert solver.modes_supported(WaveguideGeometry(2.2), LAMBDA, pol) == (0,)
        assert solver.modes_supported(WaveguideGeometry(5.6), LAMBDA, pol) == (0, 1)
    assert solver.modes_supported(WaveguideGeometry(4.0), LAMBDA, "TM") == (0, 1)


def test_effective_index_anchors(solver):
    # Regression values for the packaged calibration.
    even = solver.mode(WaveguideGeometry(5.6), LAMBDA, "TM", 0)
    odd = solver.mode(WaveguideGeometry(5.6), LAMBDA, "TM", 1)
    single = solver.mode(WaveguideGeometry(2.2), LAMBDA, "TM", 0)
    assert even.n_eff == pytest.approx(2.178873176244533, abs=1e-9)
    assert odd.n_eff == pytest.approx(2.176546942325821, abs=1e-9)
    assert single.n_eff == pytest.approx(2.175386617966855, abs=1e-9)


def test_effective_index_bounds(solver, material):
    n_sub = material.index(LAMBDA, "TM")
    peak = n_sub + material.surface_index_change(5.6, "TM", LAMBDA)
    for m in (0, 1):
        mode = solver.mode(WaveguideGeometry(5.6), LAMBDA, "TM", m)
        assert n_sub < mode.n_eff < peak


def test_beta_consistent_with_neff(solver):
    mode = solver.mode(WaveguideGeometry(5.6), LAMBDA, "TM", 0)
    assert mode.beta == pytest.approx(
        2.0 * math.pi * mode.n_eff / (LAMBDA * 1e-6), rel=1e-15
    )


def test_not_guided_and_bad_index(solver):
    with pytest.raises(NotGuidedError):
        solver.mode(WaveguideGeometry(2.2), LAMBDA, "TM", 1)
    with pytest.raises(DomainError):
        solver.mode(WaveguideGeometry(5.6), LAMBDA, "TM", 2)


def test_grid_halving_convergence(solver):
    fine = ModeSolver(
        solver.material,
        GridSpec(depth_step_um=0.01, lateral_step_um=0.01),
    )
    for m in (0, 1):
        coarse_mode = solver.mode(WaveguideGeometry(5.6), LAMBDA, "TM", m)
        fine_mode = fine.mode(WaveguideGeometry(5.6), LAMBDA, "TM", m)
        assert abs(coarse_mode.n_eff - fine_mode.n_eff) < 1e-6


def test_width_sweep_monotone_and_notes(solver):
    widths = np.linspace(2.0, 8.0, 13)
    sweep = solver.width_sweep(widths, LAMBDA, "TM")
    assert sweep.n_eff.shape == (13, 2)
    for column in (0, 1):
        guided = sweep.n_eff[:, column]
        guided = guided[np.isfinite(guided)]
        assert all(a < b for a, b in zip(guided, guided[1:]))
    # narrow guides drop the odd mode and the sweep keeps going
    assert np.isnan(sweep.n_eff[0, 1])
    assert np.isfinite(sweep.beta[np.isfinite(sweep.n_eff)]).all()


def test_phasematch_width_anchor(solver):
    target = solver.mode(WaveguideGeometry(5.6), LAMBDA, "TM", 1)
    width = solver.find_phasematch_width(target, beta_tol=0.05, width_tol_um=1e-6)
    assert width == pytest.approx(3.2698, abs=5e-3)
    matched = solver.mode(WaveguideGeometry(width), LAMBDA, "TM", 0)
    assert abs(matched.beta - target.beta) < 0.05


def test_phasematch_width_none_when_bracket_excludes(solver):
    target = solver.mode(WaveguideGeometry(5.6), LAMBDA, "TM", 1)
    assert (
        solver.find_phasematch_width(target, bracket_um=(4.2, 4.6)) is None
    )


def test_mode_field_normalized_and_confined(solver):
    x, field, n_eff = solver.mode_field(WaveguideGeometry(5.6), LAMBDA, "TM", 0)
    dx = x[1] - x[0]
    assert np.trapezoid(field**2, dx=dx) == pytest.approx(1.0, rel=1e-6)
    edge = max(abs(field[0]), abs(field[-1]))
    assert edge < 1e-3 * np.max(np.abs(field))
    # single-grid value; the extrapolated solver answer is a few 1e-9 away
    assert n_eff == pytest.approx(2.178873176244533, abs=1e-7)


def test_mode_field_parity(solver):
    x, field, _ = solver.mode_field(WaveguideGeometry(5.6), LAMBDA, "TM", 1)
    # odd lateral mode: antisymmetric about the channel centre
    centre = np.argmin(np.abs(x))
    probe = min(centre, len(x) - 1 - centre) - 1
    left = field[centre - probe]
    right = field[centre + probe]
    assert left == pytest.approx(-right, abs=1e-6 * np.max(np.abs(field)))


def test_pair_betas_cutoff_marking(solver):
    pair = PairGeometry(WaveguideGeometry(2.2), WaveguideGeometry(5.6), 6.0)
    betas = solver.pair_betas(pair, LAMBDA, "TM")
    assert math.isfinite(betas[0]) and math.isnan(betas[1])
    assert math.isfinite(betas[2]) and math.isfinite(betas[3])


def test_coupling_coefficient_decays_with_separation(solver):
    guide = WaveguideGeometry(2.2)
    near = solver.pair_coupling_coefficient(
        PairGeometry(guide, guide, 4.0), LAMBDA, "TM", 0, 0
    )
    far = solver.pair_coupling_coefficient(
        PairGeometry(guide, guide, 7.0), LAMBDA, "TM", 0, 0
    )
    assert near > far > 0.0


def test_coupling_matches_supermode_splitting(solver):
    guide = WaveguideGeometry(2.2)
    pair = PairGeometry(guide, guide, 5.0)
    kappa = solver.pair_coupling_coefficient(pair, LAMBDA, "TM", 0, 0)
    supermodes = solver.pair_supermodes(pair, LAMBDA, "TM")
    k0 = 2.0 * math.pi / (LAMBDA * 1e-6)
    splitting = (supermodes[0] - supermodes[1]) * k0
    assert splitting == pytest.approx(2.0 * kappa, rel=0.02)


def test_voltage_shifts_are_antisymmetric(solver):
    unbiased = solver.pair_betas(
        STANDARD_PAIR.with_common_voltage(0.0), LAMBDA, "TM"
    )
    biased = solver.pair_betas(STANDARD_PAIR.with_common_voltage(20.0), LAMBDA, "TM")
    shift_1 = biased[0] - unbiased[0]  # orientation +1 guide
    shift_2 = biased[2] - unbiased[2]  # orientation -1 guide
    assert shift_1 == pytest.approx(-shift_2, rel=5e-3)
    # positive voltage on a +1 electrode lowers the extraordinary index
    assert shift_1 < 0.0 < shift_2


def test_voltage_sweep_requires_electrodes(solver):
    bare = PairGeometry(WaveguideGeometry(5.6), WaveguideGeometry(5.6), 4.0)
    with pytest.raises(ConfigError):
        solver.voltage_sweep_pair(bare, LAMBDA, "TM", [0.0, 10.0])


def test_voltage_sweep_table_shape(solver):
    sweep = solver.voltage_sweep_pair(STANDARD_PAIR, LAMBDA, "TM", [0.0, 15.0, 30.0])
    assert sweep.beta.shape == (3, 4)
    assert not sweep.hit_cutoff
    assert np.isfinite(sweep.beta).all()


def test_crossing_voltage_anchor_and_orientation_sign(solver):
    v_star = solver.find_crossing_voltage(STANDARD_PAIR, LAMBDA, "TM")
    assert v_star is not None
    assert v_star == pytest.approx(28.678, abs=0.05)
    mismatch = solver.crossing_mismatch(STANDARD_PAIR, LAMBDA, "TM")
    assert abs(mismatch(v_star)) < 0.1
    flipped = PairGeometry(
        WaveguideGeometry(5.6, electrode=Electrode(gap_um=4.0, orientation=-1)),
        WaveguideGeometry(5.6, electrode=Electrode(gap_um=4.0, orientation=1)),
        4.0,
    )
    assert solver.find_crossing_voltage(flipped, LAMBDA, "TM") is None
    v_neg = solver.find_crossing_voltage(flipped, LAMBDA, "TM", v_max=-100.0)
    assert v_neg is not None
    assert v_neg == pytest.approx(-v_star, abs=1e-3)


def test_grid_validation_errors(material):
    with pytest.raises(ConfigError):
        ModeSolver(material, GridSpec(depth_step_um=0.0))
    with pytest.raises(ConfigError):
        ModeSolver(material, GridSpec(lateral_step_um=2.0))
    with pytest.raises(ConfigError):
        ModeSolver(material, GridSpec(depth_extent_um=3.0))
    with pytest.raises(ConfigError):
        ModeSolver(material, GridSpec(depth_table_points=4))


def test_pair_geometry_validation():
    with pytest.raises((ConfigError, DomainError)):
        PairGeometry(WaveguideGeometry(5.6), WaveguideGeometry(5.6), 0.0)
    with pytest.raises((ConfigError, DomainError)):
        WaveguideGeometry(-1.0)
