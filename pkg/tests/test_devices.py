"""Device layer: analyzers, rotators, modal Pauli operators, coupler, CNOT."""

import math
from dataclasses import replace

import numpy as np
import pytest

from tilnsim.coupling import mode_rotation, reduce_to_blocks, unitarity_defect
from tilnsim.devices import (
    ComponentPhases,
    CnotCircuit,
    ModeAnalyzer,
    ModeAnalyzerSpec,
    ModeRotator,
    ModeRotatorSpec,
    PhasePlan,
    TwoModeCoupler,
    TwoModeCouplerSpec,
    analyzer_action,
    cnot_unitary,
    component_phases,
    crossing_voltage,
    exchange_phase,
    half_wave_length,
    load_circuit_description,
    phase_equalize,
    rotation_angle,
    rotator_unitary,
    rotator_voltages,
    sigma_x_unitary,
    sigma_z_cascade,
    sigma_z_paths,
    sigma_z_tmw_length,
    stage_unitary,
    circuit_unitary,
    tmw_coupler_unitary,
    tune_tmw_coupler,
)
from tilnsim.errors import (
    ConfigError,
    DesignError,
    DomainError,
    InfeasiblePlanError,
)
from tilnsim.modesolver import WaveguideGeometry
from tilnsim.quantum import phase_aligned_distance, truth_table

TAU = 2.0 * math.pi
FLIP = np.array([[0.0, -1.0j], [-1.0j, 0.0]])


@pytest.fixture(scope="module")
def rotator(solver):
    return ModeRotator(ModeRotatorSpec(), solver)


@pytest.fixture(scope="module")
def designed_rotator(solver):
    return ModeRotator.designed(solver)


# ---------------------------------------------------------------------------
# Mode rotator
# ---------------------------------------------------------------------------


def test_null_voltage_from_material_constants(solver, material, rotator):
    # Independent route: chi from the Pockels formula, the theta = 0 null at
    # pair mismatch sqrt(3) pi / L.
    spec = rotator.spec
    n = solver.mode(
        WaveguideGeometry(spec.coupler_width_um),
        spec.wavelength_um,
        spec.polarization,
        0,
    ).n_eff
    r = material.pockels.coefficient(spec.polarization) * 1e-12
    chi = TAU * r * n**3 / (spec.wavelength_um * 1e-6 * spec.coupler_gap_um * 1e-6)
    null_mismatch = math.sqrt(3.0) * math.pi / spec.coupler_length_m
    v1 = rotator_voltages(0.0, rotator).v1
    assert v1 == pytest.approx(null_mismatch / chi, rel=1e-12)
    assert v1 == pytest.approx(6.055968454130591, abs=1e-6)


def test_designed_rotator_derives_length_from_kappa(designed_rotator):
    spec = designed_rotator.spec
    assert spec.coupler_length_m == pytest.approx(
        math.pi / (2.0 * designed_rotator.kappa), rel=1e-12
    )
    assert rotator_voltages(0.0, designed_rotator).v1 == pytest.approx(
        4.756341213834588, rel=1e-6
    )


def test_rotation_angle_roundtrip(rotator):
    for theta in np.linspace(0.05, math.pi - 0.05, 9):
        v1 = rotator_voltages(float(theta), rotator).v1
        assert rotation_angle(v1, rotator) == pytest.approx(theta, abs=1e-12)


def test_drive_voltage_decreases_monotonically(rotator):
    thetas = np.linspace(0.0, math.pi, 21)
    v1s = [rotator_voltages(float(t), rotator).v1 for t in thetas]
    assert all(a > b for a, b in zip(v1s, v1s[1:]))
    assert v1s[-1] == 0.0


def test_rotator_realizes_rotation_up_to_phase(rotator):
    for theta in (0.0, 0.3, math.pi / 2, 2.5, math.pi):
        voltages = rotator_voltages(theta, rotator)
        u = rotator_unitary(*voltages, rotator)
        assert phase_aligned_distance(u, mode_rotation(theta)) < 1e-9


def test_rotations_compose_as_a_group(rotator):
    rng = np.random.default_rng(31)
    for _ in range(10):
        a, b = rng.uniform(0.0, math.pi / 2, size=2)
        ua = rotator_unitary(*rotator_voltages(a, rotator), rotator)
        ub = rotator_unitary(*rotator_voltages(b, rotator), rotator)
        assert phase_aligned_distance(ua @ ub, mode_rotation(a + b)) < 1e-9


def test_sigma_x_is_the_mode_flip(rotator):
    x = sigma_x_unitary(rotator)
    assert np.allclose(x, FLIP, atol=1e-12)
    assert phase_aligned_distance(x @ x, np.eye(2)) < 1e-12


def test_opposite_arm_trims_keep_the_pure_flip(rotator):
    matched = rotator_unitary(0.0, 1.3, -1.3, rotator)
    assert phase_aligned_distance(matched, FLIP) < 1e-12
    unmatched = rotator_unitary(0.0, 1.3, 0.7, rotator)
    assert phase_aligned_distance(unmatched, FLIP) > 0.1


def test_inconsistent_kappa_rejected(solver):
    with pytest.raises(DesignError):
        ModeRotator(ModeRotatorSpec(), solver, kappa=1200.0)


def test_rotation_angle_domain(rotator):
    with pytest.raises(DomainError):
        rotator_voltages(-0.1, rotator)
    with pytest.raises(DomainError):
        rotator_voltages(math.pi + 0.1, rotator)


def test_rotator_spec_validation():
    with pytest.raises(DesignError):
        ModeRotatorSpec(coupler_length_m=0.0)
    with pytest.raises(DesignError):
        ModeRotatorSpec(flip_order=2)
    with pytest.raises(DesignError):
        ModeRotatorSpec(voltages=(1.0, 2.0))


# ---------------------------------------------------------------------------
# Mode analyzer
# ---------------------------------------------------------------------------


def test_designed_tm_analyzer_geometry(tm_analyzer):
    spec = tm_analyzer.spec
    assert spec.gap_um == 5.0
    assert spec.aux_width_um == pytest.approx(3.269772, abs=1e-4)
    assert spec.coupling_length_m == pytest.approx(6.1787e-3, rel=1e-3)
    assert tm_analyzer.exchange_power > 0.999
    assert tm_analyzer.offdesign_kept_power == pytest.approx(0.99518, abs=1e-4)


def test_designed_te_analyzer_geometry(te_analyzer):
    assert te_analyzer.spec.gap_um == 7.0
    assert te_analyzer.exchange_power > 0.999
    assert te_analyzer.offdesign_kept_power > 0.99


def test_exchange_phase_bookkeeping():
    assert exchange_phase(1) == pytest.approx(-math.pi / 2)
    assert exchange_phase(3) == pytest.approx(-3 * math.pi / 2)
    with pytest.raises(DesignError):
        exchange_phase(2)


def test_analyzer_routes_design_polarization(tm_analyzer):
    even_only = analyzer_action(tm_analyzer, 1.0, 0.0)
    assert even_only.kept_even == 1.0
    assert even_only.extracted == 0.0

    odd_only = analyzer_action(tm_analyzer, 0.0, 1.0)
    assert odd_only.design_polarization
    assert odd_only.extracted_parity == "even"
    assert odd_only.extracted_power > 0.999
    assert np.angle(odd_only.extracted) == pytest.approx(-math.pi / 2, abs=1e-3)
    assert odd_only.kept_power < 1e-6


def test_analyzer_second_exchange_restores_odd_parity(cnot_circuit):
    analyzer = cnot_circuit.tm_analyzer
    assert analyzer.spec.odd_output
    action = analyzer_action(analyzer, 0.0, 1.0)
    assert action.extracted_parity == "odd"
    assert action.extracted_power > 0.999
    assert abs(np.angle(action.extracted)) == pytest.approx(math.pi, abs=1e-3)


def test_analyzer_passes_other_polarization(tm_analyzer):
    action = analyzer_action(tm_analyzer, 0.0, 1.0, polarization="TE")
    assert not action.design_polarization
    assert action.kept_power > 0.99
    assert action.extracted_power <= 0.01
    assert action.anomaly_rad != 0.0


def test_narrow_gap_leaks_too_much(solver, tm_analyzer):
    with pytest.raises(DesignError):
        ModeAnalyzer(replace(tm_analyzer.spec, gap_um=4.0), solver)


def test_coarse_aux_width_detunes_the_exchange(solver):
    # A hand-rounded auxiliary width misses phase match at this tolerance.
    with pytest.raises(DesignError):
        ModeAnalyzer(ModeAnalyzerSpec(5.6, 3.4, 4.0, 6.2e-3), solver)


def test_fabrication_detuning_rejected(solver, tm_analyzer):
    with pytest.raises(DesignError):
        ModeAnalyzer(tm_analyzer.spec, solver, delta_beta_offset=200.0)


def test_combiner_inverts_the_exchange(tm_analyzer):
    for pol in ("TM", "TE"):
        exchange = tm_analyzer.exchange_unitary(pol)
        combiner = tm_analyzer.combiner_unitary(pol)
        assert unitarity_defect(exchange) < 1e-12
        assert np.allclose(combiner @ exchange, np.eye(2), atol=1e-12)


# ---------------------------------------------------------------------------
# Modal sigma-z
# ---------------------------------------------------------------------------


def test_half_wave_length_formula():
    assert half_wave_length(1000.0, 900.0) == pytest.approx(math.pi / 100.0)
    with pytest.raises(DomainError):
        half_wave_length(1000.0, 1000.0)


def test_dispersion_sigma_z_length(solver):
    length = sigma_z_tmw_length(solver, 5.6)
    assert length == pytest.approx(1.745310292031388e-4, rel=1e-9)


def test_equal_phase_design_rule(tm_analyzer):
    even_path, odd_path = sigma_z_paths(tm_analyzer, 0.02)
    arm = tm_analyzer.design_arm
    assert odd_path >= even_path
    assert odd_path - even_path < TAU / arm.beta_aux
    residue = math.remainder(
        arm.beta_aux * odd_path - arm.beta_even_main * even_path, TAU
    )
    assert abs(residue) < 1e-6


def test_sigma_z_cascade_is_diagonal_flip(tm_analyzer):
    result = sigma_z_cascade(tm_analyzer, tm_analyzer)
    assert abs(result.deviation_rad) < 1e-6
    assert result.aux_leak_power < 1e-6
    assert phase_aligned_distance(result.unitary, np.diag([1.0, -1.0])) < 1e-4
    squared = result.unitary @ result.unitary
    assert phase_aligned_distance(squared, np.eye(2)) < 1e-4


def test_sigma_z_reports_and_trims_path_errors(tm_analyzer):
    off = sigma_z_cascade(tm_analyzer, tm_analyzer, phase_error_rad=0.1)
    assert off.deviation_rad == pytest.approx(0.1, abs=1e-6)
    trimmed = sigma_z_cascade(
        tm_analyzer, tm_analyzer, phase_error_rad=0.1, compensation_rad=-0.1
    )
    assert abs(trimmed.deviation_rad) < 1e-6


def test_sigma_z_exchange_order_parity(solver, tm_analyzer, te_analyzer):
    # A triple exchange needs a wider gap to hold the off-design leak at a
    # third of the coupling strength over three times the length.
    third = ModeAnalyzer.designed(
        solver, polarization="TM", flip_order=3, gap_um=7.0
    )
    with pytest.raises(DesignError):
        sigma_z_cascade(third, tm_analyzer)
    result = sigma_z_cascade(third, third)
    assert abs(result.deviation_rad) < 1e-6
    with pytest.raises(DesignError):
        sigma_z_cascade(tm_analyzer, te_analyzer)


# ---------------------------------------------------------------------------
# Two-mode-waveguide coupler
# ---------------------------------------------------------------------------


def test_coupler_spec_validation():
    with pytest.raises(DesignError):
        TwoModeCouplerSpec(orientations=(1, 0))
    with pytest.raises(DesignError):
        TwoModeCouplerSpec(flip_order=4)
    with pytest.raises(DesignError):
        TwoModeCouplerSpec(width_um=-5.6)


def test_overdriven_guide_loses_second_mode(solver):
    with pytest.raises(DesignError):
        TwoModeCoupler(TwoModeCouplerSpec(voltage=100.0), solver)


def test_coupler_pairings_move_with_voltage(solver):
    coupler = TwoModeCoupler(TwoModeCouplerSpec(), solver)
    unbiased = reduce_to_blocks(coupler.four_mode("TM", 0.0))
    assert [(b.mode_a, b.mode_b) for b in unbiased.blocks] == [(0, 2), (1, 3)]
    nominal = reduce_to_blocks(coupler.four_mode("TM"))
    assert nominal.blocks == ()
    v_star = crossing_voltage(coupler)
    assert v_star == pytest.approx(28.678, abs=0.05)
    crossed = reduce_to_blocks(coupler.four_mode("TM", v_star))
    assert [(b.mode_a, b.mode_b) for b in crossed.blocks] == [(0, 3)]
    assert tuple(crossed.passthrough) == (1, 2)


def test_same_orientation_electrodes_never_cross(solver):
    coupler = TwoModeCoupler(TwoModeCouplerSpec(orientations=(1, 1)), solver)
    assert crossing_voltage(coupler) is None
    with pytest.raises(DesignError):
        tune_tmw_coupler(coupler)


def test_tuned_coupler_exchanges_tm_and_passes_te(cnot_circuit):
    coupler = cnot_circuit.coupler
    assert coupler.spec.voltage == pytest.approx(28.678, abs=0.05)
    assert coupler.spec.electrode_length_m == pytest.approx(10.9346e-3, rel=1e-3)
    u_tm = tmw_coupler_unitary(coupler, "TM")
    assert unitarity_defect(u_tm) < 1e-12
    assert abs(u_tm[3, 0]) ** 2 >= 0.999
    u_te = tmw_coupler_unitary(coupler, "TE")
    assert unitarity_defect(u_te) < 1e-12
    assert all(abs(u_te[i, i]) ** 2 >= 0.99 for i in range(4))


# ---------------------------------------------------------------------------
# CNOT circuit and phase planning
# ---------------------------------------------------------------------------


def test_cnot_constructor_guards(solver, tm_analyzer, te_analyzer, cnot_circuit):
    coupler = cnot_circuit.coupler
    with pytest.raises(DesignError):
        CnotCircuit(te_analyzer, te_analyzer, coupler)
    with pytest.raises(DesignError):
        CnotCircuit(cnot_circuit.tm_analyzer, tm_analyzer, coupler)
    untuned = TwoModeCoupler(TwoModeCouplerSpec(), solver)
    with pytest.raises(DesignError):
        CnotCircuit(cnot_circuit.tm_analyzer, te_analyzer, untuned)


def test_phase_plan_harvests_circuit_constants(cnot_circuit):
    plan = cnot_circuit.phase_plan()
    assert plan.beta_even_tm == pytest.approx(16859930.94, rel=1e-6)
    assert plan.beta_odd_tm == pytest.approx(16841930.75, rel=1e-6)
    assert plan.beta_even_te == pytest.approx(17460694.42, rel=1e-6)
    assert plan.beta_odd_te == pytest.approx(17446601.53, rel=1e-6)
    assert plan.beta_exchange_tm == pytest.approx(16850683.31, rel=1e-6)
    assert plan.beta_through_te == pytest.approx(17457272.23, rel=1e-6)
    assert plan.coupler_length_m == cnot_circuit.coupler.spec.electrode_length_m
    assert plan.analyzer_anomaly_rad == cnot_circuit.tm_analyzer.offdesign_anomaly_rad
    assert not plan.has_arms


def test_component_phases_requires_arms(cnot_circuit):
    plan = cnot_circuit.phase_plan()
    with pytest.raises(DomainError):
        component_phases(plan)
    with pytest.raises(DomainError):
        cnot_unitary(cnot_circuit, plan)


def test_phase_equalize_meets_minima_and_closes_spread(cnot_circuit):
    plan = cnot_circuit.phase_plan()
    minima = (0.012, 0.0005, 0.002)
    solved = phase_equalize(plan, minima)
    arms = (solved.even_arm_m, solved.odd_tm_arm_m, solved.odd_te_arm_m)
    assert all(arm >= low - 1e-15 for arm, low in zip(arms, minima))
    phases = component_phases(solved)
    assert phases.even_tm == phases.odd_tm
    assert phases.spread_rad() < 1e-9


def test_phase_spread_is_modular():
    phases = ComponentPhases(0.0, 0.0, TAU - 1e-12, 1e-12)
    assert phases.spread_rad() < 1e-11


def test_phase_equalize_infeasible_reports_residuals(cnot_circuit):
    plan = replace(cnot_circuit.phase_plan(), beta_odd_tm=-5.0)
    with pytest.raises(InfeasiblePlanError) as excinfo:
        phase_equalize(plan)
    assert sorted(excinfo.value.residuals) == ["odd_te_arm", "odd_tm_arm"]


def test_equalized_cnot_reaches_unit_fidelity(cnot_circuit):
    solved = phase_equalize(cnot_circuit.phase_plan())
    result = cnot_circuit.unitary(solved)
    assert result.fidelity >= 1.0 - 1e-9
    table = truth_table(result.unitary)
    assert table.is_cnot
    assert unitarity_defect(result.unitary) < 1e-9


def test_honest_magnitudes_budget_the_fidelity(cnot_circuit):
    solved = phase_equalize(cnot_circuit.phase_plan())
    result = cnot_circuit.unitary(solved, include_coupling_magnitudes=True)
    m = result.magnitudes
    assert m[0] == pytest.approx(1.0, abs=1e-6)
    assert m[2] == 1.0
    assert m[3] == pytest.approx(0.995175, abs=1e-4)
    assert result.fidelity == pytest.approx(sum(m) / 4.0, abs=1e-9)
    assert result.fidelity > 0.995


def test_ideal_cnot_squares_to_identity():
    result = cnot_unitary(None, ideal_phases=True)
    assert result.fidelity == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(result.unitary @ result.unitary, np.eye(4), atol=1e-15)


def test_cnot_unitary_argument_guards(cnot_circuit):
    with pytest.raises(DomainError):
        cnot_unitary(None)
    solved = phase_equalize(cnot_circuit.phase_plan())
    with pytest.raises(DomainError):
        cnot_unitary(None, solved, include_coupling_magnitudes=True)


# ---------------------------------------------------------------------------
# Declarative circuit descriptions
# ---------------------------------------------------------------------------

CIRCUIT_TOML = """
wavelength_um = 0.812

[[stage]]
kind = "mode-rotator"
name = "rot"
theta = 1.5707963267948966

[[stage]]
kind = "phase-modulator"
name = "trim"
arm = "even"
voltage = 0.0
"""


def test_circuit_description_round_trip(solver):
    description = load_circuit_description(CIRCUIT_TOML)
    assert description.wavelength_um == 0.812
    assert [s.name for s in description.stages] == ["rot", "trim"]
    assert description.stage("rot").kind == "mode-rotator"
    u_tm = circuit_unitary(description, solver, "TM")
    assert phase_aligned_distance(u_tm, mode_rotation(math.pi / 2)) < 1e-9
    with pytest.raises(ConfigError):
        description.stage("missing")


def test_circuit_description_from_bytes_and_path(tmp_path, solver):
    path = tmp_path / "circuit.toml"
    path.write_text(CIRCUIT_TOML)
    from_path = load_circuit_description(path)
    from_bytes = load_circuit_description(CIRCUIT_TOML.encode())
    assert from_path == from_bytes


def test_sigma_z_stage_builds_from_geometry(solver):
    toml = """
wavelength_um = 0.812

[[stage]]
kind = "sigma-z"
name = "z"
two_mode_width_um = 5.6
gap_um = 5.0
"""
    description = load_circuit_description(toml)
    u = stage_unitary(description.stages[0], solver, "TM")
    assert phase_aligned_distance(u, np.diag([1.0, -1.0])) < 1e-4


def test_tuned_coupler_stage_is_the_exchange(solver, cnot_circuit):
    spec = cnot_circuit.coupler.spec
    toml = f"""
wavelength_um = 0.812

[[stage]]
kind = "two-mode-coupler"
name = "xc"
voltage = {spec.voltage!r}
electrode_length_m = {spec.electrode_length_m!r}
"""
    description = load_circuit_description(toml)
    u_tm = stage_unitary(description.stages[0], solver, "TM")
    assert abs(u_tm[1, 0]) ** 2 > 0.999
    u_te = stage_unitary(description.stages[0], solver, "TE")
    assert np.allclose(u_te, np.eye(2))


def test_circuit_description_errors():
    with pytest.raises(ConfigError):
        load_circuit_description({"wavelength_um": 0.812, "laser": True})
    with pytest.raises(ConfigError):
        load_circuit_description({"stage": "not-a-list"})
    with pytest.raises(ConfigError):
        load_circuit_description({"stage": [{"kind": "prism"}]})
    with pytest.raises(ConfigError):
        load_circuit_description({"stage": [{"kind": "mode-rotator", "zap": 1}]})
    with pytest.raises(ConfigError):
        load_circuit_description({"stage": [{"kind": "mode-analyzer"}]})
    with pytest.raises(ConfigError):
        load_circuit_description({"stage": ["mode-rotator"]})


def test_lone_analyzer_stage_has_no_two_mode_unitary(solver):
    toml = """
[[stage]]
kind = "mode-analyzer"
name = "a"
two_mode_width_um = 5.6
gap_um = 5.0
"""
    description = load_circuit_description(toml)
    with pytest.raises(ConfigError):
        stage_unitary(description.stages[0], solver, "TM")
