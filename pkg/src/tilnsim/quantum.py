"""Modal-qubit state algebra.

A modal qubit lives in the two lowest lateral modes of a two-mode channel:
basis (|even>, |odd>).  A joint photon state over spatial mode and
polarization uses the fixed product order

    (even, TM), (odd, TM), (even, TE), (odd, TE)

with polarization as the leading (control) factor.  States are unit-norm
complex amplitude vectors; the global-phase convention used for reports
makes the first nonzero amplitude real and non-negative.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

MODE_LABELS = ("even", "odd")
JOINT_BASIS_LABELS = ("even,TM", "odd,TM", "even,TE", "odd,TE")

_NORM_TOL = 1e-9


def _as_unit_vector(amplitudes, dim: int, tol: float = _NORM_TOL) -> np.ndarray:
    vec = np.asarray(amplitudes, dtype=complex)
    if vec.shape != (dim,):
        raise DomainError(f"state must have shape ({dim},), got {vec.shape}")
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > tol:
        raise DomainError(f"state norm {norm} deviates from 1 by more than {tol}")
    return vec


def normalize_global_phase(amplitudes: np.ndarray) -> np.ndarray:
    """Rotate a state so its first nonzero amplitude is real non-negative."""
    vec = np.asarray(amplitudes, dtype=complex).copy()
    for z in vec:
        if abs(z) > 0.0:
            vec *= cmath.exp(-1j * cmath.phase(z))
            break
    return vec


@dataclass(frozen=True)
class ModalQubit:
    """One photon in the (even, odd) lateral-mode basis of a two-mode guide."""

    amplitudes: np.ndarray = field(default_factory=lambda: np.array([1.0 + 0j, 0.0 + 0j]))

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _as_unit_vector(self.amplitudes, 2))

    @property
    def alpha_even(self) -> complex:
        return complex(self.amplitudes[0])

    @property
    def alpha_odd(self) -> complex:
        return complex(self.amplitudes[1])

    @classmethod
    def from_poincare(cls, polar: float, azimuth: float) -> "ModalQubit":
        """State at the given Poincare-sphere point (|even> at the north pole)."""
        if not (0.0 <= polar <= math.pi):
            raise DomainError(f"polar angle must lie in [0, pi], got {polar}")
        return cls(
            np.array(
                [math.cos(0.5 * polar), math.sin(0.5 * polar) * cmath.exp(1j * azimuth)]
            )
        )

    def poincare(self) -> tuple[float, float]:
        """(polar, azimuth) on the modal Poincare sphere.

        polar = 0 is |even>, polar = pi is |odd>; the azimuth is the phase
        of alpha_odd relative to alpha_even (0 by convention at the poles).
        """
        a1, a2 = self.amplitudes
        polar = 2.0 * math.atan2(abs(a2), abs(a1))
        if abs(a1) == 0.0 or abs(a2) == 0.0:
            return polar, 0.0
        return polar, cmath.phase(a2 * a1.conjugate())


@dataclass(frozen=True)
class JointState:
    """Photon state over (mode x polarization), in the fixed joint order."""

    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _as_unit_vector(self.amplitudes, 4))

    @classmethod
    def product(cls, polarization_amplitudes, mode: ModalQubit) -> "JointState":
        """Tensor product (TM, TE) x (even, odd) in the joint basis order."""
        pol = _as_unit_vector(polarization_amplitudes, 2)
        return cls(np.kron(pol, mode.amplitudes))

    @classmethod
    def basis_state(cls, label: str) -> "JointState":
        try:
            idx = JOINT_BASIS_LABELS.index(label)
        except ValueError:
            raise DomainError(
                f"unknown basis label {label!r}; expected one of {JOINT_BASIS_LABELS}"
            ) from None
        vec = np.zeros(4, dtype=complex)
        vec[idx] = 1.0
        return cls(vec)

    def normalized_phase(self) -> np.ndarray:
        return normalize_global_phase(self.amplitudes)


def apply(unitary: np.ndarray, state, unitarity_tol: float = 1e-10):
    """Apply a unitary to a ModalQubit or JointState, checking unitarity."""
    u = np.asarray(unitary, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DomainError(f"operator must be square, got shape {u.shape}")
    defect = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
    if defect > unitarity_tol:
        raise DomainError(f"operator is not unitary (defect {defect:.3e} > {unitarity_tol:.1e})")
    if isinstance(state, ModalQubit):
        if u.shape != (2, 2):
            raise DomainError("ModalQubit needs a 2x2 operator")
        return ModalQubit(u @ state.amplitudes)
    if isinstance(state, JointState):
        if u.shape != (4, 4):
            raise DomainError("JointState needs a 4x4 operator")
        return JointState(u @ state.amplitudes)
    raise DomainError(f"unsupported state type {type(state).__name__}")


def concurrence(state: JointState) -> float:
    """Two-qubit pure-state concurrence over the (polarization, mode) split.

    C = 2 |a_(e,TM) a_(o,TE) - a_(o,TM) a_(e,TE)|; 0 for product states,
    1 for maximally entangled ones.
    """
    a = state.amplitudes
    return 2.0 * abs(a[0] * a[3] - a[1] * a[2])


def cnot_matrix() -> np.ndarray:
    """Ideal mode-flip CNOT: swaps even/odd for TM, identity for TE."""
    return np.array(
        [
            [0, 1, 0, 0],
            [1, 0, 0, 0],
            [0, 0, 1, 0],
            [0, 0, 0, 1],
        ],
        dtype=complex,
    )


def gate_fidelity(u: np.ndarray, target: np.ndarray) -> float:
    """Normalized process overlap |tr(U^dag V)|^2 / d^2 (1 iff equal up to phase)."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(target, dtype=complex)
    if u.shape != v.shape or u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DomainError("gate_fidelity needs two square matrices of equal shape")
    d = u.shape[0]
    return abs(np.trace(u.conj().T @ v)) ** 2 / d**2


def phase_aligned_distance(candidate, reference) -> float:
    """Euclidean distance after removing the optimal global phase.

    Works on state vectors and matrices alike (compared entrywise); the
    minimizing phase is the argument of <reference, candidate>.
    """
    a = np.asarray(candidate, dtype=complex).ravel()
    b = np.asarray(reference, dtype=complex).ravel()
    if a.shape != b.shape:
        raise DomainError("phase_aligned_distance needs equal shapes")
    overlap = np.vdot(b, a)
    phase = np.angle(overlap) if abs(overlap) > 0.0 else 0.0
    return float(np.linalg.norm(a - np.exp(1j * phase) * b))


@dataclass(frozen=True)
class TruthTableReport:
    """Basis-by-basis verification of a candidate CNOT unitary."""

    is_cnot: bool
    fidelity: float
    populations: tuple[float, ...]
    phase_deviations_rad: tuple[float, ...]
    targets: tuple[int, ...]
    population_tol: float
    phase_tol_rad: float

    def to_document(self) -> dict:
        return {
            "is_cnot": self.is_cnot,
            "fidelity": self.fidelity,
            "basis": list(JOINT_BASIS_LABELS),
            "targets": [JOINT_BASIS_LABELS[t] for t in self.targets],
            "populations": list(self.populations),
            "phase_deviations_rad": list(self.phase_deviations_rad),
            "population_tol": self.population_tol,
            "phase_tol_rad": self.phase_tol_rad,
        }


def truth_table(
    unitary: np.ndarray,
    population_tol: float = 1e-6,
    phase_tol_rad: float = 1e-6,
) -> TruthTableReport:
    """Check a 4x4 unitary against the mode-flip CNOT truth table.

    Each joint basis state must map to its CNOT partner with unit
    population; residual per-state phases are compared after removing one
    overall phase (taken from the first basis column).
    """
    u = np.asarray(unitary, dtype=complex)
    if u.shape != (4, 4):
        raise DomainError(f"truth_table expects a 4x4 matrix, got {u.shape}")
    targets = (1, 0, 2, 3)
    populations = []
    phases = []
    for k, t in enumerate(targets):
        out = u[:, k]
        populations.append(float(abs(out[t]) ** 2))
        phases.append(cmath.phase(out[t]) if abs(out[t]) > 0 else 0.0)
    ref = phases[0]
    deviations = [abs(math.remainder(p - ref, 2.0 * math.pi)) for p in phases]
    fid = gate_fidelity(u, cnot_matrix())
    ok = all(p >= 1.0 - population_tol for p in populations) and all(
        d < phase_tol_rad for d in deviations
    )
    return TruthTableReport(
        is_cnot=bool(ok),
        fidelity=float(fid),
        populations=tuple(populations),
        phase_deviations_rad=tuple(deviations),
        targets=targets,
        population_tol=population_tol,
        phase_tol_rad=phase_tol_rad,
    )


def haar_random_state(rng: np.random.Generator, dim: int = 4):
    """Haar-uniform pure state of the given dimension (2 or 4)."""
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    vec /= np.linalg.norm(vec)
    return ModalQubit(vec) if dim == 2 else JointState(vec)


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def state_to_document(state) -> dict:
    """States as ordered [re, im] pairs with their basis labels."""
    if isinstance(state, ModalQubit):
        labels = MODE_LABELS
    elif isinstance(state, JointState):
        labels = JOINT_BASIS_LABELS
    else:
        raise DomainError(f"unsupported state type {type(state).__name__}")
    return {
        "basis": list(labels),
        "amplitudes": [[float(z.real), float(z.imag)] for z in state.amplitudes],
    }


def state_from_document(doc: dict):
    """Inverse of :func:`state_to_document`."""
    try:
        labels = tuple(doc["basis"])
        amps = np.array([complex(re, im) for re, im in doc["amplitudes"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed state document: {exc}") from exc
    if labels == MODE_LABELS:
        return ModalQubit(amps)
    if labels == JOINT_BASIS_LABELS:
        return JointState(amps)
    raise ConfigError(f"unrecognized basis labels {labels}")
