"""Two-mode coupled-mode propagation: transfer matrices and factorizations.

Everything here is exact 2x2 unitary algebra on the slowly-varying
amplitudes of a pair of co-propagating modes with coupling coefficient
``kappa`` (rad/m), propagation-constant mismatch ``delta_beta = beta_1 -
beta_2`` (rad/m) and interaction length ``length`` (m).  With

    gamma = sqrt(kappa**2 + delta_beta**2 / 4)

the amplitude transfer matrix over the interaction region is

    T = [[A, -1j*B], [-1j*conj(B), conj(A)]]
    A = exp(1j*delta_beta*L/2) * (cos(gamma*L) - 1j*(delta_beta/(2*gamma))*sin(gamma*L))
    B = (kappa/gamma) * exp(1j*delta_beta*L/2) * sin(gamma*L)

T is unitary with unit determinant.  Its polar parametrization uses a
mixing angle theta in [0, pi] and two phases:

    T = [[cos(theta/2)*e^{1j*phi_a},  -1j*sin(theta/2)*e^{1j*phi_b}],
         [-1j*sin(theta/2)*e^{-1j*phi_b}, cos(theta/2)*e^{-1j*phi_a}]]

which factorizes into a cascade of two phase plates around a pure mode
rotation,

    T = e^{-1j*phi_b} * T3 * T2 * T1
    T1 = diag(1, e^{-1j*Gamma_1}),  Gamma_1 = phi_a - phi_b
    T2 = [[cos(theta/2), -1j*sin(theta/2)], [-1j*sin(theta/2), cos(theta/2)]]
    T3 = diag(e^{-1j*Gamma_2}, 1),  Gamma_2 = -phi_a - phi_b

The polar angles are branch-safe for any (kappa, delta_beta, length): the
diagonal phase is recovered with a two-argument arctangent so interaction
lengths past the first coupling cycle reconstruct exactly.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import AmbiguousPairingError, ConfigError, DomainError

#: Default |delta_beta|*L classification thresholds for mode-pair reduction.
MATCHED_PHASE_THRESHOLD = math.pi / 8.0
PASSTHROUGH_PHASE_THRESHOLD = 2.0 * math.pi


@dataclass(frozen=True)
class CouplerParams:
    """Parameters of one two-mode interaction region.

    kappa is non-negative by convention; a sign picked up by the overlap
    integral belongs to the mode-sign convention and is folded into the
    phases, not kept here.
    """

    kappa: float
    delta_beta: float
    length: float

    def __post_init__(self):
        if self.kappa < 0:
            raise DomainError(f"kappa must be >= 0, got {self.kappa}")
        if self.length < 0:
            raise DomainError(f"length must be >= 0, got {self.length}")
        for name in ("kappa", "delta_beta", "length"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")

    @property
    def gamma(self) -> float:
        """Generalized coupling rate sqrt(kappa^2 + delta_beta^2/4)."""
        return math.hypot(self.kappa, 0.5 * self.delta_beta)


def _ab_elements(params: CouplerParams) -> tuple[complex, complex]:
    gamma = params.gamma
    if gamma == 0.0:
        return 1.0 + 0.0j, 0.0 + 0.0j
    gl = gamma * params.length
    phase = cmath.exp(0.5j * params.delta_beta * params.length)
    sin_gl = math.sin(gl)
    cos_gl = math.cos(gl)
    a = phase * complex(cos_gl, -(0.5 * params.delta_beta / gamma) * sin_gl)
    b = (params.kappa / gamma) * sin_gl * phase
    return a, b


def transfer_matrix(params: CouplerParams) -> np.ndarray:
    """2x2 unitary amplitude transfer matrix of the interaction region."""
    a, b = _ab_elements(params)
    return np.array([[a, -1j * b], [-1j * b.conjugate(), a.conjugate()]])


def cross_power(params: CouplerParams) -> float:
    """Fraction of power transferred to the other mode, |B|^2 = (kappa/gamma)^2 sin^2(gamma L)."""
    _, b = _ab_elements(params)
    return abs(b) ** 2


@dataclass(frozen=True)
class PolarForm:
    """Mixing angle and phases of a two-mode transfer matrix."""

    theta: float
    phi_a: float
    phi_b: float

    def matrix(self) -> np.ndarray:
        ch = math.cos(0.5 * self.theta)
        sh = math.sin(0.5 * self.theta)
        ea = cmath.exp(1j * self.phi_a)
        eb = cmath.exp(1j * self.phi_b)
        return np.array(
            [
                [ch * ea, -1j * sh * eb],
                [-1j * sh / eb, ch / ea],
            ]
        )


def polar_form(params: CouplerParams) -> PolarForm:
    """Branch-safe polar angles (theta, phi_a, phi_b) of the transfer matrix.

    theta lands in [0, pi]; sign information from later coupling cycles is
    carried by the phases so that ``polar_form(p).matrix()`` reproduces
    ``transfer_matrix(p)`` to machine precision for any parameters.
    """
    gamma = params.gamma
    if gamma == 0.0:
        return PolarForm(theta=0.0, phi_a=0.0, phi_b=0.0)
    gl = gamma * params.length
    sin_gl = math.sin(gl)
    cos_gl = math.cos(gl)
    common = 0.5 * params.delta_beta * params.length
    cross = (params.kappa / gamma) * sin_gl
    theta = 2.0 * math.asin(min(1.0, abs(cross)))
    phi_b = common if cross >= 0.0 else common + math.pi
    # arg of (cos - 1j*(delta_beta/2 gamma)*sin); atan2 keeps the branch
    # correct when cos(gamma L) crosses zero.
    phi_a = common + math.atan2(-(0.5 * params.delta_beta / gamma) * sin_gl, cos_gl)
    return PolarForm(theta=theta, phi_a=phi_a, phi_b=phi_b)


@dataclass(frozen=True)
class CascadeDecomposition:
    """Phase-plate / rotation / phase-plate factorization of a coupler."""

    theta: float
    gamma_1: float
    gamma_2: float
    global_phase: float

    def factors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(T1, T2, T3) with T = e^{1j*global_phase} * T3 @ T2 @ T1."""
        t1 = np.array([[1.0, 0.0], [0.0, cmath.exp(-1j * self.gamma_1)]])
        ch = math.cos(0.5 * self.theta)
        sh = math.sin(0.5 * self.theta)
        t2 = np.array([[ch, -1j * sh], [-1j * sh, ch]])
        t3 = np.array([[cmath.exp(-1j * self.gamma_2), 0.0], [0.0, 1.0]])
        return t1, t2, t3

    def matrix(self) -> np.ndarray:
        t1, t2, t3 = self.factors()
        return cmath.exp(1j * self.global_phase) * (t3 @ t2 @ t1)


def cascade_decomposition(params: CouplerParams) -> CascadeDecomposition:
    """Factor the transfer matrix into phase plates around a mode rotation."""
    pf = polar_form(params)
    return CascadeDecomposition(
        theta=pf.theta,
        gamma_1=pf.phi_a - pf.phi_b,
        gamma_2=-pf.phi_a - pf.phi_b,
        global_phase=-pf.phi_b,
    )


def mode_rotation(theta: float) -> np.ndarray:
    """Pure two-mode rotation by ``theta`` (the T2 cascade factor)."""
    ch = math.cos(0.5 * theta)
    sh = math.sin(0.5 * theta)
    return np.array([[ch, -1j * sh], [-1j * sh, ch]])


def amplitude_evolution(
    params: CouplerParams, input_amplitudes: Sequence[complex], z: Sequence[float]
) -> np.ndarray:
    """Amplitudes along the coupler: rows are (a1(z), a2(z)) at each z.

    ``z`` positions are in metres, each within [0, length].  Power is
    conserved exactly because every step is the unitary transfer matrix
    evaluated at that z.
    """
    a0 = np.asarray(input_amplitudes, dtype=complex)
    if a0.shape != (2,):
        raise DomainError(f"input amplitudes must have shape (2,), got {a0.shape}")
    out = np.empty((len(z), 2), dtype=complex)
    for i, zi in enumerate(z):
        if zi < 0 or zi > params.length * (1 + 1e-12):
            raise DomainError(f"z={zi} outside [0, {params.length}]")
        out[i] = transfer_matrix(replace(params, length=float(zi))) @ a0
    return out


def unitarity_defect(u: np.ndarray) -> float:
    """max |U^dag U - I|, a cheap unitarity residual."""
    u = np.asarray(u)
    eye = np.eye(u.shape[0])
    return float(np.max(np.abs(u.conj().T @ u - eye)))


# --------------------------------------------------------------------------
# Coupling coefficient from mode overlap
# --------------------------------------------------------------------------


def coupling_coefficient(
    x_m: np.ndarray,
    field_a: np.ndarray,
    field_b: np.ndarray,
    delta_n2_b: np.ndarray,
    beta_a: float,
    beta_b: float,
    wavelength_um: float,
) -> float:
    """Directional coupling coefficient of mode a driven by guide b (rad/m).

    Standard scalar coupled-mode overlap: with fields normalized to unit
    power (integral |f|^2 dx = 1) and ``delta_n2_b`` the squared-index
    perturbation of guide b alone,

        kappa_ab = k0^2 / (2*sqrt(beta_a*beta_b)) * integral f_a dn2_b f_b dx

    Arguments are sampled on the common transverse grid ``x_m`` (metres).
    The sign of the integral reflects arbitrary mode-sign conventions, so
    the magnitude is returned.
    """
    x = np.asarray(x_m, dtype=float)
    fa = np.asarray(field_a, dtype=float)
    fb = np.asarray(field_b, dtype=float)
    dn2 = np.asarray(delta_n2_b, dtype=float)
    if not (x.shape == fa.shape == fb.shape == dn2.shape):
        raise DomainError("x, fields and perturbation must share one grid")
    if beta_a <= 0 or beta_b <= 0:
        raise DomainError("propagation constants must be positive")
    fa = fa / math.sqrt(np.trapezoid(fa * fa, x))
    fb = fb / math.sqrt(np.trapezoid(fb * fb, x))
    k0 = 2.0 * math.pi / (wavelength_um * 1e-6)
    overlap = np.trapezoid(fa * dn2 * fb, x)
    return abs(k0 * k0 / (2.0 * math.sqrt(beta_a * beta_b)) * overlap)


def symmetric_coupling_coefficient(kappa_ab: float, kappa_ba: float) -> float:
    """Geometric mean of the two directional coefficients of a guide pair."""
    if kappa_ab < 0 or kappa_ba < 0:
        raise DomainError("directional coefficients must be non-negative")
    return math.sqrt(kappa_ab * kappa_ba)


# --------------------------------------------------------------------------
# Four-mode (two guides x two parities) block reduction
# --------------------------------------------------------------------------

FOUR_MODE_LABELS = ("wg1_even", "wg1_odd", "wg2_even", "wg2_odd")
_CROSS_PAIRS = ((0, 2), (0, 3), (1, 2), (1, 3))


@dataclass(frozen=True)
class FourModeCoupler:
    """Two parallel two-mode guides over a common interaction length.

    ``betas`` are the four isolated-guide propagation constants in the
    order (wg1 even, wg1 odd, wg2 even, wg2 odd); ``kappas`` the four
    inter-guide coupling coefficients keyed by cross pairs in the order
    (e1-e2, e1-o2, o1-e2, o1-o2).  Same-guide parities are orthogonal
    eigenmodes of the same channel and do not couple directly.
    """

    betas: tuple[float, float, float, float]
    kappas: tuple[float, float, float, float]
    length: float

    def __post_init__(self):
        if len(self.betas) != 4 or len(self.kappas) != 4:
            raise DomainError("need 4 betas and 4 cross-pair kappas")
        if self.length <= 0:
            raise DomainError("length must be positive")
        if any(k < 0 for k in self.kappas):
            raise DomainError("kappas must be non-negative")


@dataclass(frozen=True)
class Block:
    """One retained coupled pair in the reduction."""

    mode_a: int
    mode_b: int
    params: CouplerParams
    kind: str  # "matched" or "partial"


@dataclass(frozen=True)
class BlockReduction:
    """Outcome of the pairing analysis: coupled blocks plus passthroughs."""

    blocks: tuple[Block, ...]
    passthrough: tuple[int, ...]
    coupler: FourModeCoupler

    def unitary(self, length: float | None = None) -> np.ndarray:
        """4x4 transfer matrix: detuned blocks plus phased passthroughs.

        Passthrough modes accumulate exp(-1j*beta*L); each block carries
        its common propagation phase exp(-1j*(beta_a+beta_b)*L/2) times the
        envelope transfer matrix.  ``length`` evaluates the same pairing at
        a partial length (for evolution traces along the device).
        """
        n = 4
        u = np.zeros((n, n), dtype=complex)
        length = self.coupler.length if length is None else float(length)
        if not 0.0 <= length <= self.coupler.length * (1.0 + 1e-12):
            raise DomainError(
                f"evaluation length {length} outside [0, {self.coupler.length}]"
            )
        for m in self.passthrough:
            u[m, m] = cmath.exp(-1j * self.coupler.betas[m] * length)
        for blk in self.blocks:
            t = transfer_matrix(
                CouplerParams(blk.params.kappa, blk.params.delta_beta, length)
            )
            common = cmath.exp(
                -0.5j * (self.coupler.betas[blk.mode_a] + self.coupler.betas[blk.mode_b]) * length
            )
            i, k = blk.mode_a, blk.mode_b
            u[i, i] = common * t[0, 0]
            u[i, k] = common * t[0, 1]
            u[k, i] = common * t[1, 0]
            u[k, k] = common * t[1, 1]
        return u


def reduce_to_blocks(
    coupler: FourModeCoupler,
    matched_threshold: float = MATCHED_PHASE_THRESHOLD,
    passthrough_threshold: float = PASSTHROUGH_PHASE_THRESHOLD,
) -> BlockReduction:
    """Classify the four cross-guide pairs into coupled blocks and passthroughs.

    A pair with accumulated mismatch |delta_beta|*L below ``matched_threshold``
    is a matched block; above ``passthrough_threshold`` both modes pass
    through untouched (up to propagation phase); in between the pair is kept
    as a genuine detuned block -- no snapping to ideal behaviour.  A mode
    that would sit in two retained blocks at once is refused explicitly.
    """
    if not 0 < matched_threshold < passthrough_threshold:
        raise ConfigError(
            f"need 0 < matched_threshold < passthrough_threshold, got "
            f"{matched_threshold}, {passthrough_threshold}"
        )
    blocks = []
    used: dict[int, tuple[int, int]] = {}
    for (i, k), kappa in zip(_CROSS_PAIRS, coupler.kappas):
        dbeta = coupler.betas[i] - coupler.betas[k]
        accum = abs(dbeta) * coupler.length
        if accum > passthrough_threshold:
            continue
        kind = "matched" if accum < matched_threshold else "partial"
        for m in (i, k):
            if m in used:
                raise AmbiguousPairingError(
                    f"mode {FOUR_MODE_LABELS[m]} is phase-matched to two partners: "
                    f"pair {used[m]} and pair {(i, k)}"
                )
            used[m] = (i, k)
        blocks.append(
            Block(
                mode_a=i,
                mode_b=k,
                params=CouplerParams(kappa=kappa, delta_beta=dbeta, length=coupler.length),
                kind=kind,
            )
        )
    passthrough = tuple(m for m in range(4) if m not in used)
    return BlockReduction(blocks=tuple(blocks), passthrough=passthrough, coupler=coupler)


# --------------------------------------------------------------------------
# Serialization: unitaries as JSON-friendly documents
# --------------------------------------------------------------------------


def unitary_to_document(u: np.ndarray, global_phase: float = 0.0, basis=None) -> dict:
    """Serialize a unitary as a row-major document with [re, im] pairs."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {u.shape}")
    doc = {
        "shape": list(u.shape),
        "global_phase": float(global_phase),
        "entries": [[float(z.real), float(z.imag)] for z in u.ravel(order="C")],
    }
    if basis is not None:
        doc["basis"] = list(basis)
    return doc


def unitary_from_document(doc: dict) -> tuple[np.ndarray, float]:
    """Inverse of :func:`unitary_to_document`; returns (matrix, global_phase)."""
    try:
        n, m = doc["shape"]
        entries = doc["entries"]
        phase = float(doc.get("global_phase", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed unitary document: {exc}") from exc
    if n != m or len(entries) != n * m:
        raise ConfigError("unitary document shape and entry count disagree")
    flat = np.array([complex(re, im) for re, im in entries])
    return flat.reshape(n, m), phase
