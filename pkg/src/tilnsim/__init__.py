"""Coupled-mode simulation of Ti-diffused lithium niobate photonic circuits.

The package models diffused-channel waveguide circuits at the
coupled-mode-theory level: a graded-index effective-index mode solver
feeds two-mode coupling kernels, from which the composed devices of a
modal-qubit processor are built and verified -- mode analyzers, modal
Pauli operators, the voltage-programmed mode rotator, and a
dispersion-managed polarization-controlled mode flip (CNOT).
"""

from .coupling import (
    CouplerParams,
    FourModeCoupler,
    amplitude_evolution,
    cascade_decomposition,
    cross_power,
    mode_rotation,
    polar_form,
    reduce_to_blocks,
    transfer_matrix,
    unitary_from_document,
    unitary_to_document,
)
from .devices import (
    AnalyzerAction,
    CnotCircuit,
    CnotResult,
    ComponentPhases,
    ModeAnalyzer,
    ModeAnalyzerSpec,
    ModeRotator,
    ModeRotatorSpec,
    PhasePlan,
    SigmaZResult,
    TwoModeCoupler,
    TwoModeCouplerSpec,
    analyzer_action,
    circuit_unitary,
    cnot_unitary,
    component_phases,
    crossing_voltage,
    half_wave_length,
    load_circuit_description,
    phase_equalize,
    rotation_angle,
    rotator_unitary,
    rotator_voltages,
    sigma_x_unitary,
    sigma_z_cascade,
    sigma_z_tmw_length,
    tmw_coupler_unitary,
    tune_tmw_coupler,
)
from .errors import (
    AmbiguousPairingError,
    ConfigError,
    DesignError,
    DomainError,
    InfeasiblePlanError,
    NotGuidedError,
    NumericError,
    TilnsimError,
)
from .material import (
    MaterialModel,
    PockelsCoefficients,
    SellmeierSet,
    TiIndiffusionParams,
    default_material,
    load_material_config,
)
from .modesolver import (
    Electrode,
    GridSpec,
    GuidedMode,
    ModeSolver,
    PairGeometry,
    WaveguideGeometry,
)
from .quantum import (
    JointState,
    ModalQubit,
    apply,
    cnot_matrix,
    concurrence,
    gate_fidelity,
    haar_random_state,
    phase_aligned_distance,
    truth_table,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousPairingError",
    "AnalyzerAction",
    "CnotCircuit",
    "CnotResult",
    "ComponentPhases",
    "ConfigError",
    "CouplerParams",
    "DesignError",
    "DomainError",
    "Electrode",
    "FourModeCoupler",
    "GridSpec",
    "GuidedMode",
    "InfeasiblePlanError",
    "JointState",
    "MaterialModel",
    "ModalQubit",
    "ModeAnalyzer",
    "ModeAnalyzerSpec",
    "ModeRotator",
    "ModeRotatorSpec",
    "ModeSolver",
    "NotGuidedError",
    "NumericError",
    "PairGeometry",
    "PhasePlan",
    "PockelsCoefficients",
    "SellmeierSet",
    "SigmaZResult",
    "TiIndiffusionParams",
    "TilnsimError",
    "TwoModeCoupler",
    "TwoModeCouplerSpec",
    "WaveguideGeometry",
    "amplitude_evolution",
    "analyzer_action",
    "apply",
    "cascade_decomposition",
    "circuit_unitary",
    "cnot_matrix",
    "cnot_unitary",
    "component_phases",
    "concurrence",
    "cross_power",
    "crossing_voltage",
    "default_material",
    "gate_fidelity",
    "haar_random_state",
    "half_wave_length",
    "load_circuit_description",
    "load_material_config",
    "mode_rotation",
    "phase_aligned_distance",
    "phase_equalize",
    "polar_form",
    "reduce_to_blocks",
    "rotation_angle",
    "rotator_unitary",
    "rotator_voltages",
    "sigma_x_unitary",
    "sigma_z_cascade",
    "sigma_z_tmw_length",
    "tmw_coupler_unitary",
    "transfer_matrix",
    "truth_table",
    "tune_tmw_coupler",
    "unitary_from_document",
    "unitary_to_document",
    "__version__",
]
