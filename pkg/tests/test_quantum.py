"""Modal-qubit states, gate checks, and entanglement measures."""

import math

import numpy as np
import pytest

from tilnsim.errors import ConfigError, DomainError
from tilnsim.quantum import (
    JOINT_BASIS_LABELS,
    JointState,
    ModalQubit,
    apply,
    cnot_matrix,
    concurrence,
    gate_fidelity,
    haar_random_state,
    normalize_global_phase,
    phase_aligned_distance,
    state_from_document,
    state_to_document,
    truth_table,
)


def _concurrence_from_partial_trace(state: JointState) -> float:
    """Independent oracle: C = sqrt(2 (1 - Tr rho_pol^2)) for pure states."""
    table = state.amplitudes.reshape(2, 2)  # [polarization, mode]
    rho_pol = table @ table.conj().T
    purity = float(np.real(np.trace(rho_pol @ rho_pol)))
    return math.sqrt(max(0.0, 2.0 * (1.0 - purity)))


def test_state_normalization_enforced():
    q = ModalQubit([0.6, 0.8j])
    assert np.linalg.norm(q.amplitudes) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        ModalQubit([3.0, 4.0j])  # not normalized
    with pytest.raises(DomainError):
        JointState([1.0, 0.0, 0.0])  # wrong dimension
    with pytest.raises(DomainError):
        ModalQubit([0.0, 0.0])


def test_joint_product_ordering():
    st = JointState.product([0.0, 1.0], ModalQubit([0.0, 1.0]))
    assert abs(st.amplitudes[JOINT_BASIS_LABELS.index("odd,TE")]) == pytest.approx(1.0)
    st = JointState.product([1.0, 0.0], ModalQubit([1.0, 0.0]))
    assert abs(st.amplitudes[JOINT_BASIS_LABELS.index("even,TM")]) == pytest.approx(1.0)


def test_basis_state_labels():
    for index, label in enumerate(JOINT_BASIS_LABELS):
        st = JointState.basis_state(label)
        assert st.amplitudes[index] == pytest.approx(1.0)
    with pytest.raises(DomainError):
        JointState.basis_state("odd,TT")


def test_normalize_global_phase_leading_entry_real():
    vec = np.exp(1.3j) * np.array([0.6, 0.8j])
    fixed = normalize_global_phase(vec)
    assert fixed[0].imag == pytest.approx(0.0, abs=1e-15)
    assert fixed[0].real > 0


def test_cnot_matrix_is_involutive_permutation():
    u = cnot_matrix()
    np.testing.assert_allclose(u @ u, np.eye(4), atol=1e-15)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-15)


def test_cnot_flips_mode_only_for_tm():
    u = cnot_matrix()
    tm_even = JointState.basis_state("even,TM")
    te_even = JointState.basis_state("even,TE")
    assert abs(apply(u, tm_even).amplitudes[1]) == pytest.approx(1.0)
    assert abs(apply(u, te_even).amplitudes[2]) == pytest.approx(1.0)


def test_apply_rejects_nonunitary_and_bad_shapes():
    with pytest.raises(DomainError):
        apply(np.diag([1.0, 0.5]), ModalQubit([1.0, 0.0]))
    with pytest.raises(DomainError):
        apply(np.eye(4), ModalQubit([1.0, 0.0]))
    with pytest.raises(DomainError):
        apply(np.eye(3), JointState([1.0, 0.0, 0.0, 0.0]))


def test_concurrence_matches_partial_trace_oracle():
    rng = np.random.default_rng(101)
    for _ in range(40):
        state = haar_random_state(rng)
        assert concurrence(state) == pytest.approx(
            _concurrence_from_partial_trace(state), abs=1e-12
        )


def test_concurrence_extremes():
    rng = np.random.default_rng(103)
    for _ in range(10):
        product = JointState.product(
            haar_random_state(rng, dim=2).amplitudes, haar_random_state(rng, dim=2)
        )
        assert concurrence(product) == pytest.approx(0.0, abs=1e-12)
    bell = JointState(np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2.0))
    assert concurrence(bell) == pytest.approx(1.0, abs=1e-12)


def test_entangler_state_through_cnot():
    plus_even = JointState.product(
        [math.sqrt(0.5), math.sqrt(0.5)], ModalQubit([1.0, 0.0])
    )
    out = apply(cnot_matrix(), plus_even)
    assert concurrence(out) == pytest.approx(1.0, abs=1e-12)


def test_gate_fidelity_phase_invariance():
    rng = np.random.default_rng(107)
    u = cnot_matrix()
    assert gate_fidelity(u, np.exp(0.7j) * u) == pytest.approx(1.0, abs=1e-12)
    assert gate_fidelity(u, np.eye(4)) < 0.9
    with pytest.raises(DomainError):
        gate_fidelity(u, np.eye(3))


def test_phase_aligned_distance_properties():
    rng = np.random.default_rng(109)
    v = haar_random_state(rng).amplitudes
    assert phase_aligned_distance(np.exp(2.1j) * v, v) == pytest.approx(0.0, abs=1e-12)
    w = haar_random_state(rng).amplitudes
    assert phase_aligned_distance(w, v) >= 0.0
    with pytest.raises(DomainError):
        phase_aligned_distance(v, v[:3])


def test_truth_table_accepts_cnot_and_reports_failure():
    good = truth_table(cnot_matrix())
    assert good.is_cnot
    assert good.fidelity == pytest.approx(1.0, abs=1e-12)
    assert min(good.populations) == pytest.approx(1.0, abs=1e-12)
    broken = cnot_matrix().astype(complex)
    broken[3, 3] = np.exp(0.3j)  # one component phase out of step
    report = truth_table(broken)
    assert not report.is_cnot
    assert max(report.phase_deviations_rad) == pytest.approx(0.3, abs=1e-12)
    doc = report.to_document()
    assert doc["is_cnot"] is False
    assert len(doc["populations"]) == 4


def test_truth_table_requires_4x4():
    with pytest.raises(DomainError):
        truth_table(np.eye(2))


def test_haar_states_are_seeded_and_normalized():
    a = haar_random_state(np.random.default_rng(5)).amplitudes
    b = haar_random_state(np.random.default_rng(5)).amplitudes
    np.testing.assert_allclose(a, b, atol=0.0)
    assert np.linalg.norm(a) == pytest.approx(1.0)


def test_state_document_roundtrip():
    rng = np.random.default_rng(113)
    for state in (haar_random_state(rng, dim=2), haar_random_state(rng, dim=4)):
        doc = state_to_document(state)
        back = state_from_document(doc)
        np.testing.assert_allclose(back.amplitudes, state.amplitudes, atol=1e-15)
    with pytest.raises(ConfigError):
        state_from_document({"basis": ["nope"], "amplitudes": [[1.0, 0.0]]})
