"""Composed waveguide devices for modal-qubit processing.

Builds the block-level devices out of the material model, the mode solver,
and the two-mode coupling kernel: the mode analyzer/combiner, the modal
half-wave (sigma-z) elements, the voltage-programmed mode rotator (and the
sigma-x flip it degenerates to), the polarization-selective two-mode
electro-optic coupler, and the dispersion-managed single-photon CNOT
circuit with its arm-length phase equalizer.

Phase bookkeeping
-----------------
Device-level phases use the *advance* convention: a straight segment of
length ``l`` multiplies an amplitude by ``exp(+j beta l)``, and a full
even/odd exchange of odd order ``q`` contributes its envelope factor
``exp(-j q pi / 2)``.  Exchange envelopes are the coupled-mode transfer
matrices of :mod:`tilnsim.coupling` with the common average propagation
phase removed; that common phase is reported separately where it matters
(the arm-length planner carries it explicitly).  Within the block-level
model, interactions whose accumulated mismatch exceeds the passthrough
threshold contribute no power exchange; parity-preserving interactions of
the even modes inside analyzers are neglected on the same grounds.

Units: transverse geometry in micrometres, lengths of couplers and arms in
metres, propagation constants in rad/m, voltages in volts, angles in
radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .coupling import (
    MATCHED_PHASE_THRESHOLD,
    CouplerParams,
    FourModeCoupler,
    cascade_decomposition,
    cross_power,
    polar_form,
    reduce_to_blocks,
    transfer_matrix,
)
from .errors import (
    ConfigError,
    DesignError,
    DomainError,
    InfeasiblePlanError,
    NotGuidedError,
)
from .material import check_polarization
from .modesolver import Electrode, ModeSolver, PairGeometry, WaveguideGeometry

DESIGN_WAVELENGTH_UM = 0.812

#: Largest off-design-polarization power leak an analyzer may show before
#: construction is rejected (the retained power must stay above 99 %).
MAX_OFFDESIGN_LEAK = 0.01

_TAU = 2.0 * math.pi


def _wrap(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return math.remainder(angle, _TAU)


def _require_odd(value: int, name: str) -> int:
    if not isinstance(value, int) or value < 1 or value % 2 == 0:
        raise DesignError(f"{name} must be an odd positive integer, got {value!r}")
    return value


def exchange_phase(order: int) -> float:
    """Envelope phase of a full even/odd exchange of odd ``order``: -order*pi/2."""
    _require_odd(order, "order")
    return -0.5 * math.pi * order


def _other_pol(pol: str) -> str:
    return "TE" if pol == "TM" else "TM"


# ---------------------------------------------------------------------------
# Mode analyzer / combiner
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeAnalyzerSpec:
    """Geometry of a parity-routing analyzer.

    A two-mode guide of width ``two_mode_width_um`` runs parallel to an
    auxiliary single-mode guide of width ``aux_width_um`` (edge-to-edge
    ``gap_um``) over ``coupling_length_m``.  For the design polarization the
    odd mode of the wide guide phase-matches the fundamental of the
    auxiliary guide and is extracted; the other polarization stays put.
    ``odd_output`` selects the variant with a second, mirror-image exchange
    region that re-forms the extracted light as an odd mode in a second
    two-mode guide.  The S-bend and port fields only set the passive layout
    (the bend contributes a fixed propagation phase).
    """

    two_mode_width_um: float
    aux_width_um: float
    gap_um: float
    coupling_length_m: float
    polarization: str = "TM"
    odd_output: bool = False
    flip_order: int = 1
    wavelength_um: float = DESIGN_WAVELENGTH_UM
    sbend_length_m: float = 10e-3
    port_separation_um: float = 127.0

    def __post_init__(self) -> None:
        check_polarization(self.polarization)
        _require_odd(self.flip_order, "flip_order")
        for name in ("two_mode_width_um", "aux_width_um", "gap_um"):
            if getattr(self, name) <= 0:
                raise DesignError(f"{name} must be positive")
        if self.coupling_length_m <= 0:
            raise DesignError("coupling_length_m must be positive")
        if self.sbend_length_m <= 0 or self.port_separation_um <= 0:
            raise DesignError("S-bend dimensions must be positive")

    def pair_geometry(self) -> PairGeometry:
        return PairGeometry(
            WaveguideGeometry(self.two_mode_width_um),
            WaveguideGeometry(self.aux_width_um),
            self.gap_um,
        )


@dataclass(frozen=True)
class _AnalyzerArm:
    """Solved per-polarization data of one analyzer coupling region."""

    params: CouplerParams
    beta_even_main: float
    beta_odd_main: float
    beta_aux: float

    @property
    def mismatch_phase(self) -> float:
        return abs(self.params.delta_beta) * self.params.length


class ModeAnalyzer:
    """A :class:`ModeAnalyzerSpec` bound to a solver, validated on creation.

    Raises :class:`DesignError` when the design polarization is not
    phase-matched (accumulated mismatch above the matched-block threshold),
    when the other polarization is *also* matched, or when the off-design
    leak exceeds ``MAX_OFFDESIGN_LEAK``.  ``delta_beta_offset`` adds a
    fabrication-style detuning to the design-polarization pair.
    """

    def __init__(
        self,
        spec: ModeAnalyzerSpec,
        solver: ModeSolver | None = None,
        *,
        delta_beta_offset: float = 0.0,
    ) -> None:
        self.spec = spec
        self.solver = solver if solver is not None else ModeSolver()
        self.delta_beta_offset = float(delta_beta_offset)
        pair = spec.pair_geometry()
        lam = spec.wavelength_um
        arms: dict[str, _AnalyzerArm] = {}
        for pol in ("TM", "TE"):
            wide = self.solver.mode(pair.guide_1, lam, pol, 1)
            even = self.solver.mode(pair.guide_1, lam, pol, 0)
            aux = self.solver.mode(pair.guide_2, lam, pol, 0)
            kappa = self.solver.pair_coupling_coefficient(pair, lam, pol, 1, 0)
            delta = wide.beta - aux.beta
            if pol == spec.polarization:
                delta += self.delta_beta_offset
            arms[pol] = _AnalyzerArm(
                CouplerParams(kappa, delta, spec.coupling_length_m),
                even.beta,
                wide.beta,
                aux.beta,
            )
        design = arms[spec.polarization]
        if design.mismatch_phase > MATCHED_PHASE_THRESHOLD:
            raise DesignError(
                "analyzer is not phase-matched for its design polarization: "
                f"|delta_beta|*L = {design.mismatch_phase:.3f} rad exceeds "
                f"{MATCHED_PHASE_THRESHOLD:.3f}"
            )
        other = arms[_other_pol(spec.polarization)]
        if other.mismatch_phase <= MATCHED_PHASE_THRESHOLD:
            raise DesignError(
                "non-design polarization is phase-matched too: "
                f"|delta_beta|*L = {other.mismatch_phase:.3f} rad"
            )
        leak = cross_power(other.params)
        if leak > MAX_OFFDESIGN_LEAK:
            raise DesignError(
                f"non-design polarization leaks {leak:.4f} of the odd power "
                f"(limit {MAX_OFFDESIGN_LEAK}); widen the gap or shorten the coupler"
            )
        self._arms = arms

    @classmethod
    def designed(
        cls,
        solver: ModeSolver | None = None,
        *,
        two_mode_width_um: float = 5.6,
        gap_um: float | None = None,
        polarization: str = "TM",
        odd_output: bool = False,
        flip_order: int = 1,
        wavelength_um: float = DESIGN_WAVELENGTH_UM,
        beta_tol: float = 0.02,
    ) -> "ModeAnalyzer":
        """Solve the auxiliary width and coupling length for a clean analyzer.

        The default gaps (5 um for a TM design, 7 um for TE, at the standard
        5.6 um two-mode guide) keep the off-design leak a few times below the
        1 % construction limit.
        """
        check_polarization(polarization)
        solver = solver if solver is not None else ModeSolver()
        if gap_um is None:
            gap_um = 5.0 if polarization == "TM" else 7.0
        target = solver.mode(
            WaveguideGeometry(two_mode_width_um), wavelength_um, polarization, 1
        )
        aux_width = solver.find_phasematch_width(
            target, beta_tol=beta_tol, width_tol_um=1e-6
        )
        if aux_width is None:
            raise DesignError(
                "no single-mode width phase-matches the odd mode of "
                f"w={two_mode_width_um} um at {wavelength_um} um {polarization}"
            )
        pair = PairGeometry(
            WaveguideGeometry(two_mode_width_um), WaveguideGeometry(aux_width), gap_um
        )
        kappa = solver.pair_coupling_coefficient(pair, wavelength_um, polarization, 1, 0)
        length = flip_order * math.pi / (2.0 * kappa)
        spec = ModeAnalyzerSpec(
            two_mode_width_um,
            aux_width,
            gap_um,
            length,
            polarization=polarization,
            odd_output=odd_output,
            flip_order=flip_order,
            wavelength_um=wavelength_um,
        )
        return cls(spec, solver)

    # -- solved data ---------------------------------------------------------

    def arm(self, polarization: str | None = None) -> _AnalyzerArm:
        pol = check_polarization(polarization or self.spec.polarization)
        return self._arms[pol]

    @property
    def design_arm(self) -> _AnalyzerArm:
        return self._arms[self.spec.polarization]

    @property
    def offdesign_arm(self) -> _AnalyzerArm:
        return self._arms[_other_pol(self.spec.polarization)]

    @property
    def exchange_power(self) -> float:
        """Power fraction moved to the auxiliary guide for the design pair."""
        return cross_power(self.design_arm.params)

    @property
    def offdesign_kept_power(self) -> float:
        """Power fraction the mismatched polarization retains."""
        return 1.0 - cross_power(self.offdesign_arm.params)

    @property
    def offdesign_anomaly_rad(self) -> float:
        """Envelope phase the detained odd mode picks up off-design."""
        return polar_form(self.offdesign_arm.params).phi_a

    def exchange_unitary(self, polarization: str | None = None) -> np.ndarray:
        """Envelope transfer on (odd-of-main-guide, aux-guide) amplitudes."""
        return transfer_matrix(self.arm(polarization).params)

    def combiner_unitary(self, polarization: str | None = None) -> np.ndarray:
        """The reverse-direction map: conjugate transpose of the exchange."""
        return self.exchange_unitary(polarization).conj().T


@dataclass(frozen=True)
class AnalyzerAction:
    """Routing of one modal state through an analyzer.

    Amplitudes are envelope-level (common propagation phase removed).
    ``kept_even``/``kept_odd`` stay in the input two-mode guide;
    ``extracted`` leaves on the auxiliary port with parity
    ``extracted_parity``.
    """

    polarization: str
    design_polarization: bool
    kept_even: complex
    kept_odd: complex
    extracted: complex
    extracted_parity: str
    anomaly_rad: float

    @property
    def kept_power(self) -> float:
        return abs(self.kept_even) ** 2 + abs(self.kept_odd) ** 2

    @property
    def extracted_power(self) -> float:
        return abs(self.extracted) ** 2


def analyzer_action(
    analyzer: ModeAnalyzer,
    even_amplitude: complex,
    odd_amplitude: complex,
    polarization: str | None = None,
) -> AnalyzerAction:
    """Route a modal state (even, odd amplitudes) through an analyzer.

    For the design polarization the odd component transfers to the
    auxiliary path with phase ``-q*pi/2`` per exchange; for the other
    polarization both components remain, the odd one acquiring the
    mismatched-block diagonal phase.
    """
    spec = analyzer.spec
    pol = check_polarization(polarization or spec.polarization)
    arm = analyzer.arm(pol)
    t = transfer_matrix(arm.params)
    kept_odd = t[0, 0] * odd_amplitude
    extracted = t[1, 0] * odd_amplitude
    parity = "even"
    if spec.odd_output:
        # Mirror-image second exchange: the auxiliary even mode re-forms as
        # an odd mode in the second two-mode guide (pair roles swapped, so
        # the detuning changes sign).
        swapped = CouplerParams(
            arm.params.kappa, -arm.params.delta_beta, arm.params.length
        )
        extracted = transfer_matrix(swapped)[1, 0] * extracted
        parity = "odd"
    return AnalyzerAction(
        polarization=pol,
        design_polarization=pol == spec.polarization,
        kept_even=complex(even_amplitude),
        kept_odd=complex(kept_odd),
        extracted=complex(extracted),
        extracted_parity=parity,
        anomaly_rad=float(np.angle(t[0, 0])),
    )


# ---------------------------------------------------------------------------
# Modal sigma-z
# ---------------------------------------------------------------------------


def half_wave_length(beta_even: float, beta_odd: float) -> float:
    """Length over which modal dispersion accumulates a pi phase difference."""
    diff = beta_even - beta_odd
    if not math.isfinite(diff) or diff == 0.0:
        raise DomainError(
            "degenerate propagation constants: the half-wave length is infinite"
        )
    return math.pi / abs(diff)


def sigma_z_tmw_length(
    solver: ModeSolver,
    width_um: float,
    wavelength_um: float = DESIGN_WAVELENGTH_UM,
    polarization: str = "TM",
) -> float:
    """Two-mode-guide length realizing sigma-z by modal dispersion alone."""
    geometry = WaveguideGeometry(width_um)
    even = solver.mode(geometry, wavelength_um, polarization, 0)
    odd = solver.mode(geometry, wavelength_um, polarization, 1)
    return half_wave_length(even.beta, odd.beta)


def sigma_z_paths(
    analyzer: ModeAnalyzer,
    even_path_m: float,
    min_odd_path_m: float | None = None,
) -> tuple[float, float]:
    """Shortest odd-path length satisfying the equal-phase design rule.

    Solves ``beta_aux * L_o = beta_even * L_e  (mod 2 pi)`` for the smallest
    ``L_o`` at or above ``min_odd_path_m`` (default: the even path length).
    """
    if even_path_m <= 0:
        raise DesignError("even_path_m must be positive")
    arm = analyzer.design_arm
    minimum = even_path_m if min_odd_path_m is None else min_odd_path_m
    target = arm.beta_even_main * even_path_m
    k = math.ceil((arm.beta_aux * minimum - target) / _TAU - 1e-12)
    odd_path = (target + _TAU * k) / arm.beta_aux
    if odd_path < minimum:
        odd_path = (target + _TAU * (k + 1)) / arm.beta_aux
    return even_path_m, odd_path


@dataclass(frozen=True)
class SigmaZResult:
    """Composed analyzer-combiner cascade and its deviation from diag(1, -1)."""

    unitary: np.ndarray
    deviation_rad: float
    even_path_m: float
    odd_path_m: float
    aux_leak_power: float
    report: str


def sigma_z_cascade(
    analyzer: ModeAnalyzer,
    combiner: ModeAnalyzer,
    even_path_m: float | None = None,
    odd_path_m: float | None = None,
    *,
    phase_error_rad: float = 0.0,
    compensation_rad: float = 0.0,
) -> SigmaZResult:
    """Sigma-z from an analyzer and a combiner joined by two paths.

    The odd component is exchanged out, travels ``odd_path_m`` on the
    auxiliary route, and is exchanged back; the two exchanges contribute
    ``-(q_a + q_c) * pi / 2`` while the even component only accrues
    propagation phase.  Path lengths defaulting to the equal-phase design
    rule give diag(1, -1) up to a global phase; any residual is returned as
    ``deviation_rad`` (an uncompensated mismatch is reported, never hidden).
    ``phase_error_rad`` emulates a fabrication error on the odd path and
    ``compensation_rad`` an electro-optic trim.
    """
    if combiner.spec.polarization != analyzer.spec.polarization:
        raise DesignError("analyzer and combiner must share a design polarization")
    if combiner.spec.wavelength_um != analyzer.spec.wavelength_um:
        raise DesignError("analyzer and combiner must share a design wavelength")
    q_sum = analyzer.spec.flip_order + combiner.spec.flip_order
    if q_sum % 4 != 2:
        raise DesignError(
            "exchange orders "
            f"{analyzer.spec.flip_order} and {combiner.spec.flip_order} make the "
            "two exchange phases cancel instead of adding to pi; use orders "
            "congruent modulo 4"
        )
    if even_path_m is None:
        even_path_m = 0.02
    if odd_path_m is None:
        _, odd_path_m = sigma_z_paths(analyzer, even_path_m)

    arm_a = analyzer.design_arm
    arm_c = combiner.design_arm
    t_a = transfer_matrix(arm_a.params)
    t_c = transfer_matrix(arm_c.params)

    def embed(t: np.ndarray) -> np.ndarray:
        m = np.eye(3, dtype=complex)
        m[1:, 1:] = t
        return m

    propagation = np.diag(
        [
            np.exp(1j * arm_a.beta_even_main * even_path_m),
            np.exp(1j * arm_a.beta_odd_main * even_path_m),
            np.exp(
                1j * (arm_a.beta_aux * odd_path_m + phase_error_rad + compensation_rad)
            ),
        ]
    )
    full = embed(t_c) @ propagation @ embed(t_a)
    unitary = full[:2, :2].copy()
    aux_leak = float(abs(full[2, 0]) ** 2 + abs(full[2, 1]) ** 2)
    deviation = _wrap(
        float(np.angle(unitary[1, 1])) - float(np.angle(unitary[0, 0])) - math.pi
    )
    report = (
        f"sigma-z cascade: deviation {deviation:+.3e} rad from diag(1,-1); "
        f"paths L_e={even_path_m * 1e3:.4f} mm, L_o={odd_path_m * 1e3:.4f} mm; "
        f"auxiliary leak {aux_leak:.3e}"
    )
    return SigmaZResult(
        unitary=unitary,
        deviation_rad=deviation,
        even_path_m=even_path_m,
        odd_path_m=odd_path_m,
        aux_leak_power=aux_leak,
        report=report,
    )


# ---------------------------------------------------------------------------
# Mode rotator / sigma-x
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeRotatorSpec:
    """Analyzer + electro-optic coupler + combiner realizing mode rotation.

    The coupler is a pair of identical single-mode guides; its electrode
    spacing doubles as the guide separation.  ``voltages`` are the operating
    point (coupler drive, input-arm modulator on the odd path, output-arm
    modulator on the even path).
    """

    coupler_width_um: float = 2.2
    coupler_length_m: float = 1.73e-3
    coupler_gap_um: float = 5.0
    modulator_length_m: float = 5e-3
    modulator_gap_um: float = 5.0
    polarization: str = "TM"
    wavelength_um: float = DESIGN_WAVELENGTH_UM
    flip_order: int = 1
    voltages: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        check_polarization(self.polarization)
        _require_odd(self.flip_order, "flip_order")
        for name in (
            "coupler_width_um",
            "coupler_length_m",
            "coupler_gap_um",
            "modulator_length_m",
            "modulator_gap_um",
        ):
            if getattr(self, name) <= 0:
                raise DesignError(f"{name} must be positive")
        if len(self.voltages) != 3:
            raise DesignError("voltages must be a (V1, V2, V3) triple")

    def with_voltages(self, v1: float, v2: float, v3: float) -> "ModeRotatorSpec":
        return replace(self, voltages=(float(v1), float(v2), float(v3)))


class RotatorVoltages(NamedTuple):
    v1: float
    v2: float
    v3: float


class ModeRotator:
    """A rotator spec bound to a solver.

    The coupling coefficient defaults to the value implied by the design
    invariant ``L = q pi / (2 kappa)``; pass ``kappa`` (or build with
    :meth:`designed`) to use a geometry-derived coefficient instead.  The
    effective index of the single-mode guide feeds the electro-optic
    voltage conversions.
    """

    def __init__(
        self,
        spec: ModeRotatorSpec,
        solver: ModeSolver | None = None,
        *,
        kappa: float | None = None,
    ) -> None:
        self.spec = spec
        self.solver = solver if solver is not None else ModeSolver()
        mode = self.solver.mode(
            WaveguideGeometry(spec.coupler_width_um),
            spec.wavelength_um,
            spec.polarization,
            0,
        )
        self.n_eff = mode.n_eff
        if kappa is None:
            kappa = spec.flip_order * math.pi / (2.0 * spec.coupler_length_m)
        elif abs(spec.flip_order * math.pi / (2.0 * kappa) - spec.coupler_length_m) > (
            0.05 * spec.coupler_length_m
        ):
            raise DesignError(
                "coupler length is not an odd multiple of pi/(2 kappa): "
                f"kappa={kappa:.2f} rad/m wants "
                f"L={spec.flip_order * math.pi / (2 * kappa) * 1e3:.3f} mm, "
                f"spec has {spec.coupler_length_m * 1e3:.3f} mm"
            )
        self.kappa = float(kappa)
        r = self.solver.material.pockels.coefficient(spec.polarization) * 1e-12
        lam_m = spec.wavelength_um * 1e-6
        n3 = self.n_eff**3
        #: rad/m of pair mismatch per volt on the coupler electrodes
        self.mismatch_per_volt = _TAU * r * n3 / (lam_m * spec.coupler_gap_um * 1e-6)
        #: radians of arm phase per volt on one phase modulator
        self.phase_per_volt = (
            math.pi * r * n3 * spec.modulator_length_m
        ) / (lam_m * spec.modulator_gap_um * 1e-6)

    @classmethod
    def designed(
        cls,
        solver: ModeSolver | None = None,
        *,
        coupler_width_um: float = 2.2,
        coupler_gap_um: float = 5.0,
        polarization: str = "TM",
        wavelength_um: float = DESIGN_WAVELENGTH_UM,
        flip_order: int = 1,
        **spec_kwargs,
    ) -> "ModeRotator":
        """Derive the coupler length from the geometry's coupling coefficient."""
        solver = solver if solver is not None else ModeSolver()
        guide = WaveguideGeometry(coupler_width_um)
        pair = PairGeometry(guide, guide, coupler_gap_um)
        kappa = solver.pair_coupling_coefficient(pair, wavelength_um, polarization, 0, 0)
        spec = ModeRotatorSpec(
            coupler_width_um=coupler_width_um,
            coupler_length_m=flip_order * math.pi / (2.0 * kappa),
            coupler_gap_um=coupler_gap_um,
            polarization=polarization,
            wavelength_um=wavelength_um,
            flip_order=flip_order,
            **spec_kwargs,
        )
        return cls(spec, solver, kappa=kappa)

    def coupler_params(self, v1: float) -> CouplerParams:
        return CouplerParams(
            self.kappa, v1 * self.mismatch_per_volt, self.spec.coupler_length_m
        )


def rotation_angle(v1: float, rotator: ModeRotator) -> float:
    """Rotation angle theta realized by coupler drive ``v1``."""
    params = rotator.coupler_params(v1)
    if params.gamma == 0.0:
        return 0.0
    ratio = (params.kappa / params.gamma) * math.sin(params.gamma * params.length)
    return 2.0 * math.asin(min(1.0, abs(ratio)))


def rotator_voltages(theta: float, rotator: ModeRotator) -> RotatorVoltages:
    """Operating voltages for a rotation by ``theta``.

    Inverts theta = 2 asin[(kappa/gamma) sin(gamma L)] for the coupler
    mismatch (V1), then cancels the two retardation factors of the cascade
    decomposition with the arm modulators (V2 on the odd input arm, V3 on
    the even output arm).  V1 falls monotonically from the sqrt(3) pi null
    at theta = 0 to zero at theta = pi, where any V2 = -V3 pair works and
    the returned triple is (0, 0, 0).
    """
    if not 0.0 <= theta <= math.pi:
        raise DomainError(f"rotation angle must lie in [0, pi], got {theta}")
    spec = rotator.spec
    half = spec.flip_order * math.pi / 2.0
    target = math.sin(0.5 * theta)
    if target >= 1.0:
        u = half
    elif target <= 0.0:
        u = half + math.pi / 2.0
    else:

        def objective(x: float) -> float:
            return (half / x) * abs(math.sin(x)) - target

        u = brentq(objective, half, half + math.pi / 2.0, xtol=1e-15, rtol=8.9e-16)
    delta_beta = 2.0 * math.sqrt(max(0.0, u * u - half * half)) / spec.coupler_length_m
    v1 = delta_beta / rotator.mismatch_per_volt
    cascade = cascade_decomposition(rotator.coupler_params(v1))
    v2 = _wrap(cascade.gamma_1) / rotator.phase_per_volt
    v3 = _wrap(cascade.gamma_2) / rotator.phase_per_volt
    return RotatorVoltages(v1, v2, v3)


def rotator_unitary(
    v1: float, v2: float, v3: float, rotator: ModeRotator
) -> np.ndarray:
    """Two-mode unitary of the rotator at voltages (V1, V2, V3).

    With the compensating (V2, V3) of :func:`rotator_voltages` this is the
    pure rotation by theta(V1) up to a global phase; with V2 = V3 = 0 it is
    the bare coupler transfer including both retardation factors.
    """
    coupler = transfer_matrix(rotator.coupler_params(v1))
    chi = rotator.phase_per_volt
    m_in = np.diag([1.0, np.exp(1j * chi * v2)])
    m_out = np.diag([np.exp(1j * chi * v3), 1.0])
    return m_out @ coupler @ m_in


def sigma_x_unitary(rotator: ModeRotator) -> np.ndarray:
    """The mode flipper: the rotator driven to theta = pi (sigma-x up to phase)."""
    voltages = rotator_voltages(math.pi, rotator)
    return rotator_unitary(*voltages, rotator)


# ---------------------------------------------------------------------------
# Polarization-selective two-mode coupler
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoModeCouplerSpec:
    """Electro-optic coupler between two identical two-mode guides.

    Electrodes of opposite field orientation sit over the two guides, so a
    common drive voltage pushes their indices apart; at the crossing voltage
    the even mode of one guide phase-matches the odd mode of the other for
    the polarization served by the strong Pockels coefficient.
    """

    width_um: float = 5.6
    separation_um: float = 4.0
    electrode_length_m: float = 2.2e-3
    electrode_gap_um: float = 4.0
    voltage: float = 36.0
    orientations: tuple[int, int] = (1, -1)
    wavelength_um: float = DESIGN_WAVELENGTH_UM
    flip_order: int = 1

    def __post_init__(self) -> None:
        _require_odd(self.flip_order, "flip_order")
        if self.width_um <= 0 or self.separation_um <= 0:
            raise DesignError("guide width and separation must be positive")
        if self.electrode_length_m <= 0 or self.electrode_gap_um <= 0:
            raise DesignError("electrode dimensions must be positive")
        if tuple(abs(o) for o in self.orientations) != (1, 1):
            raise DesignError("orientations must be +1 or -1 per guide")

    def with_voltage(self, voltage: float) -> "TwoModeCouplerSpec":
        return replace(self, voltage=float(voltage))

    def with_length(self, length_m: float) -> "TwoModeCouplerSpec":
        return replace(self, electrode_length_m=float(length_m))

    def pair_geometry(self, voltage: float | None = None) -> PairGeometry:
        v = self.voltage if voltage is None else voltage
        guides = tuple(
            WaveguideGeometry(
                self.width_um,
                electrode=Electrode(
                    voltage=v,
                    gap_um=self.electrode_gap_um,
                    orientation=orientation,
                ),
            )
            for orientation in self.orientations
        )
        return PairGeometry(guides[0], guides[1], self.separation_um)


class TwoModeCoupler:
    """A :class:`TwoModeCouplerSpec` bound to a solver.

    Construction checks that both guides carry two modes for both
    polarizations at the operating voltage.
    """

    def __init__(self, spec: TwoModeCouplerSpec, solver: ModeSolver | None = None):
        self.spec = spec
        self.solver = solver if solver is not None else ModeSolver()
        pair = spec.pair_geometry()
        for pol in ("TM", "TE"):
            for guide, label in ((pair.guide_1, "guide 1"), (pair.guide_2, "guide 2")):
                supported = self.solver.modes_supported(guide, spec.wavelength_um, pol)
                if 0 not in supported or 1 not in supported:
                    raise DesignError(
                        f"{label} is not two-moded for {pol} at the operating "
                        f"voltage (guided modes: {supported})"
                    )

    def betas(self, polarization: str, voltage: float | None = None) -> np.ndarray:
        pair = self.spec.pair_geometry(voltage)
        return self.solver.pair_betas(pair, self.spec.wavelength_um, polarization)

    def four_mode(
        self, polarization: str, voltage: float | None = None
    ) -> FourModeCoupler:
        """Propagation constants plus the four cross-guide couplings."""
        spec = self.spec
        pair = spec.pair_geometry(voltage)
        betas = self.solver.pair_betas(pair, spec.wavelength_um, polarization)
        if not np.all(np.isfinite(betas)):
            raise NotGuidedError(
                "all four modes must be guided to build the coupler"
            )
        kappas = tuple(
            self.solver.pair_coupling_coefficient(
                pair, spec.wavelength_um, polarization, m1, m2
            )
            for m1, m2 in ((0, 0), (0, 1), (1, 0), (1, 1))
        )
        return FourModeCoupler(tuple(betas), kappas, spec.electrode_length_m)


def tmw_coupler_unitary(
    coupler: TwoModeCoupler, polarization: str, voltage: float | None = None
) -> np.ndarray:
    """4x4 transfer on (even1, odd1, even2, odd2) from the block reduction."""
    reduction = reduce_to_blocks(coupler.four_mode(polarization, voltage))
    return reduction.unitary()


def crossing_voltage(
    coupler: TwoModeCoupler, polarization: str = "TM", v_max: float = 100.0
) -> float | None:
    """Drive voltage where even(guide 1) phase-matches odd(guide 2)."""
    return coupler.solver.find_crossing_voltage(
        coupler.spec.pair_geometry(),
        coupler.spec.wavelength_um,
        polarization,
        v_max=v_max,
    )


def tune_tmw_coupler(
    coupler: TwoModeCoupler, polarization: str = "TM", v_max: float = 100.0
) -> TwoModeCoupler:
    """Retune drive voltage and electrode length for full even-odd transfer.

    Sets the voltage to the exact crossing and the length to an odd multiple
    of the cross-coupling length there, closing the residual-transfer gap a
    nominal operating point leaves open.
    """
    spec = coupler.spec
    v_star = crossing_voltage(coupler, polarization, v_max)
    if v_star is None:
        raise DesignError(
            f"no even/odd crossing below {v_max} V for {polarization}; "
            "check the electrode orientations"
        )
    pair = spec.pair_geometry(v_star)
    kappa = coupler.solver.pair_coupling_coefficient(
        pair, spec.wavelength_um, polarization, 0, 1
    )
    length = spec.flip_order * math.pi / (2.0 * kappa)
    tuned = spec.with_voltage(v_star).with_length(length)
    return TwoModeCoupler(tuned, coupler.solver)


# ---------------------------------------------------------------------------
# Dispersion-managed CNOT
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhasePlan:
    """Arm lengths and constants fixing the four component phases.

    The circuit routes the four joint components over three paths: the even
    components share the middle path (arm ``even_arm_m`` on each side of the
    exchange coupler), the odd-TM component uses the upper path (arms
    ``odd_tm_arm_m``), and the odd-TE component bypasses the coupler on the
    lower path (arms ``odd_te_arm_m``).  ``beta_exchange_tm`` is the common
    propagation constant of the matched TM pair inside the coupler;
    ``beta_through_te`` is the TE even constant passing under the same
    electrodes; ``analyzer_anomaly_rad`` is the envelope phase the odd-TE
    component collects per transit of a TM-design analyzer.  Orders are the
    odd exchange multiples of the TM analyzer, the coupler, and the TE
    analyzer.
    """

    coupler_length_m: float
    beta_even_tm: float
    beta_odd_tm: float
    beta_even_te: float
    beta_odd_te: float
    beta_exchange_tm: float
    beta_through_te: float
    analyzer_anomaly_rad: float = 0.0
    analyzer_order_tm: int = 1
    coupler_order: int = 1
    analyzer_order_te: int = 1
    even_arm_m: float | None = None
    odd_tm_arm_m: float | None = None
    odd_te_arm_m: float | None = None

    def __post_init__(self) -> None:
        _require_odd(self.analyzer_order_tm, "analyzer_order_tm")
        _require_odd(self.coupler_order, "coupler_order")
        _require_odd(self.analyzer_order_te, "analyzer_order_te")
        if self.coupler_length_m < 0:
            raise DesignError("coupler_length_m must be non-negative")
        for name in ("even_arm_m", "odd_tm_arm_m", "odd_te_arm_m"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise DesignError(f"{name} must be non-negative when given")

    @property
    def has_arms(self) -> bool:
        return None not in (self.even_arm_m, self.odd_tm_arm_m, self.odd_te_arm_m)

    def with_arms(self, l1: float, l2: float, l3: float) -> "PhasePlan":
        return replace(
            self, even_arm_m=float(l1), odd_tm_arm_m=float(l2), odd_te_arm_m=float(l3)
        )


@dataclass(frozen=True)
class ComponentPhases:
    """Output phases of the four joint components (radians)."""

    even_tm: float
    odd_tm: float
    even_te: float
    odd_te: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.even_tm, self.odd_tm, self.even_te, self.odd_te)

    def spread_rad(self) -> float:
        """Largest pairwise distance modulo 2 pi."""
        values = self.as_tuple()
        return max(
            abs(_wrap(a - b)) for i, a in enumerate(values) for b in values[i + 1 :]
        )


def component_phases(plan: PhasePlan) -> ComponentPhases:
    """Evaluate the four component phases of a fully specified plan.

    The two TM components traverse the same segments in opposite order, so
    their phases are one and the same expression.
    """
    if not plan.has_arms:
        raise DomainError("plan is missing arm lengths; run phase_equalize first")
    flips_tm = (2 * plan.analyzer_order_tm + plan.coupler_order) * math.pi / 2.0
    phi_tm = (
        plan.beta_even_tm * plan.even_arm_m
        + plan.beta_odd_tm * plan.odd_tm_arm_m
        + plan.beta_exchange_tm * plan.coupler_length_m
        - flips_tm
    )
    phi_even_te = (
        2.0 * plan.beta_even_te * plan.even_arm_m
        + plan.beta_through_te * plan.coupler_length_m
    )
    phi_odd_te = (
        2.0 * plan.beta_odd_te * plan.odd_te_arm_m
        - plan.analyzer_order_te * math.pi
        + 2.0 * plan.analyzer_anomaly_rad
    )
    return ComponentPhases(phi_tm, phi_tm, phi_even_te, phi_odd_te)


def _first_admissible(minimum: float, rate: float, target: float) -> float:
    """Smallest x >= minimum with rate*x = target (mod 2 pi); rate > 0."""
    residue = (target - rate * minimum) % _TAU
    if residue > _TAU - 1e-10:
        residue = 0.0
    return minimum + residue / rate


def phase_equalize(
    plan: PhasePlan,
    min_arm_lengths_m: Sequence[float] = (0.0, 0.0, 0.0),
) -> PhasePlan:
    """Choose arm lengths that equalize all four component phases.

    The TM pair is equal by construction, leaving two congruences: one ties
    the odd-TM arm to the even arm, the other ties the odd-TE arm to the
    even arm.  Solutions therefore form a one-parameter family (the even
    arm) on a lattice with periods 2 pi / beta_odd_tm and pi / beta_odd_te;
    the returned representative has the minimal total arm length among all
    solutions respecting the minima (ties resolved toward the shortest even
    arm).  Raises :class:`InfeasiblePlanError` with the residual congruences
    when the constants admit no solution.
    """
    l1_min, l2_min, l3_min = (float(v) for v in min_arm_lengths_m)
    if min(l1_min, l2_min, l3_min) < 0:
        raise DesignError("minimum arm lengths must be non-negative")

    flips_tm = (2 * plan.analyzer_order_tm + plan.coupler_order) * math.pi / 2.0
    slope_2 = 2.0 * plan.beta_even_te - plan.beta_even_tm
    offset_2 = (
        -(plan.beta_exchange_tm - plan.beta_through_te) * plan.coupler_length_m
        + flips_tm
    )
    offset_3 = (
        plan.beta_through_te * plan.coupler_length_m
        + plan.analyzer_order_te * math.pi
        - 2.0 * plan.analyzer_anomaly_rad
    )
    residuals = {
        "odd_tm_arm": f"beta_odd_tm * l2 = {slope_2:.6g} * l1 + {offset_2:.6g} (mod 2 pi)",
        "odd_te_arm": f"2 beta_odd_te * l3 = {2.0 * plan.beta_even_te:.6g} * l1 "
        f"+ {offset_3:.6g} (mod 2 pi)",
    }
    constants = {
        "beta_odd_tm": plan.beta_odd_tm,
        "beta_odd_te": plan.beta_odd_te,
        "beta_even_tm": plan.beta_even_tm,
        "beta_even_te": plan.beta_even_te,
    }
    for name, value in constants.items():
        if not math.isfinite(value) or value <= 0.0:
            raise InfeasiblePlanError(
                f"cannot equalize phases: {name} = {value!r} gives the "
                "congruences no period",
                residuals=residuals,
            )

    def l2_of(l1: float) -> float:
        return _first_admissible(l2_min, plan.beta_odd_tm, slope_2 * l1 + offset_2)

    def l3_of(l1: float) -> float:
        return _first_admissible(
            l3_min, 2.0 * plan.beta_odd_te, 2.0 * plan.beta_even_te * l1 + offset_3
        )

    # Any solution with l1 beyond the combined sawtooth periods cannot beat
    # the one at l1_min, so candidates are l1_min plus every wrap point of
    # either sawtooth inside that window.
    window = _TAU / plan.beta_odd_tm + math.pi / plan.beta_odd_te
    candidates = [l1_min]
    for rate, level in (
        (slope_2, plan.beta_odd_tm * l2_min - offset_2),
        (2.0 * plan.beta_even_te, 2.0 * plan.beta_odd_te * l3_min - offset_3),
    ):
        if abs(rate) < 1e-12:
            continue
        k_lo = math.floor((rate * l1_min - level) / _TAU) - 1
        k_hi = math.ceil((rate * (l1_min + window) - level) / _TAU) + 1
        lo, hi = sorted((k_lo, k_hi))
        for k in range(lo, hi + 1):
            l1 = (level + _TAU * k) / rate
            if l1_min < l1 <= l1_min + window:
                candidates.append(l1)

    best: tuple[float, float, float] | None = None
    best_total = math.inf
    for l1 in sorted(candidates):
        l2, l3 = l2_of(l1), l3_of(l1)
        total = l1 + l2 + l3
        if total < best_total - 1e-15:
            best, best_total = (l1, l2, l3), total
    assert best is not None
    solved = plan.with_arms(*best)
    check = component_phases(solved)
    if check.spread_rad() > 1e-9:
        raise InfeasiblePlanError(
            f"arm solve left a residual spread of {check.spread_rad():.3e} rad",
            residuals=residuals,
        )
    return solved


class CnotCircuit:
    """Polarization-controlled mode flip: analyzers routing around an
    exchange coupler.

    The TM-design analyzer sends the odd-TM component to the coupler's
    second guide; even components ride the middle path through the first
    guide; the TE-design analyzer detours the odd-TE component around the
    coupler entirely.  At the coupler's crossing voltage the TM components
    exchange parity while TE passes through, flipping the modal qubit
    exactly when the polarization qubit is TM.
    """

    def __init__(
        self,
        tm_analyzer: ModeAnalyzer,
        te_analyzer: ModeAnalyzer,
        coupler: TwoModeCoupler,
    ) -> None:
        if tm_analyzer.spec.polarization != "TM":
            raise DesignError("tm_analyzer must be designed for TM")
        if te_analyzer.spec.polarization != "TE":
            raise DesignError("te_analyzer must be designed for TE")
        wavelengths = {
            tm_analyzer.spec.wavelength_um,
            te_analyzer.spec.wavelength_um,
            coupler.spec.wavelength_um,
        }
        if len(wavelengths) != 1:
            raise DesignError(f"stage wavelengths disagree: {sorted(wavelengths)}")
        tm_blocks = reduce_to_blocks(coupler.four_mode("TM")).blocks
        if len(tm_blocks) != 1 or (tm_blocks[0].mode_a, tm_blocks[0].mode_b) != (0, 3):
            raise DesignError(
                "the coupler must retain exactly the even(1)/odd(2) TM block "
                f"at its operating voltage (got {tm_blocks!r}); tune it first"
            )
        te_blocks = reduce_to_blocks(coupler.four_mode("TE")).blocks
        if te_blocks:
            raise DesignError(
                f"TE must pass through the coupler untouched (got {te_blocks!r})"
            )
        self.tm_analyzer = tm_analyzer
        self.te_analyzer = te_analyzer
        self.coupler = coupler
        self._tm_block = tm_blocks[0]

    @classmethod
    def designed(
        cls, solver: ModeSolver | None = None, wavelength_um: float = DESIGN_WAVELENGTH_UM
    ) -> "CnotCircuit":
        """Solve analyzers and tune the coupler from the standard geometry."""
        solver = solver if solver is not None else ModeSolver()
        tm_analyzer = ModeAnalyzer.designed(
            solver, polarization="TM", odd_output=True, wavelength_um=wavelength_um
        )
        te_analyzer = ModeAnalyzer.designed(
            solver, polarization="TE", odd_output=False, wavelength_um=wavelength_um
        )
        coupler = tune_tmw_coupler(
            TwoModeCoupler(
                TwoModeCouplerSpec(wavelength_um=wavelength_um), solver
            )
        )
        return cls(tm_analyzer, te_analyzer, coupler)

    @property
    def wavelength_um(self) -> float:
        return self.coupler.spec.wavelength_um

    def phase_plan(self) -> PhasePlan:
        """Measured constants of the circuit, arms left for the equalizer."""
        tm = self.tm_analyzer.design_arm
        te = self.te_analyzer.design_arm
        betas_tm = self.coupler.betas("TM")
        betas_te = self.coupler.betas("TE")
        return PhasePlan(
            coupler_length_m=self.coupler.spec.electrode_length_m,
            beta_even_tm=tm.beta_even_main,
            beta_odd_tm=tm.beta_odd_main,
            beta_even_te=te.beta_even_main,
            beta_odd_te=te.beta_odd_main,
            beta_exchange_tm=float(0.5 * (betas_tm[0] + betas_tm[3])),
            beta_through_te=float(betas_te[0]),
            analyzer_anomaly_rad=self.tm_analyzer.offdesign_anomaly_rad,
            analyzer_order_tm=self.tm_analyzer.spec.flip_order,
            coupler_order=self.coupler.spec.flip_order,
            analyzer_order_te=self.te_analyzer.spec.flip_order,
        )

    def component_magnitudes(self) -> tuple[float, float, float, float]:
        """Honest block-level amplitude magnitudes of the four components."""
        exchange = math.sqrt(cross_power(self._tm_block.params))
        analyzer_tm = self.tm_analyzer.exchange_power
        m_tm = analyzer_tm * exchange
        m_even_te = 1.0
        m_odd_te = (
            self.tm_analyzer.offdesign_kept_power * self.te_analyzer.exchange_power
        )
        return (m_tm, m_tm, m_even_te, m_odd_te)

    def unitary(
        self,
        plan: PhasePlan | None = None,
        *,
        ideal_phases: bool = False,
        include_coupling_magnitudes: bool = False,
    ) -> "CnotResult":
        return cnot_unitary(
            self,
            plan,
            ideal_phases=ideal_phases,
            include_coupling_magnitudes=include_coupling_magnitudes,
        )


@dataclass(frozen=True)
class CnotResult:
    """Composed gate matrix with its fidelity and per-component phases."""

    unitary: np.ndarray
    fidelity: float
    phases: ComponentPhases
    magnitudes: tuple[float, float, float, float]
    report: str


def cnot_unitary(
    circuit: CnotCircuit | None,
    plan: PhasePlan | None = None,
    *,
    ideal_phases: bool = False,
    include_coupling_magnitudes: bool = False,
) -> CnotResult:
    """4x4 gate on the (even/odd) x (TM/TE) basis.

    With ``ideal_phases`` (or a plan whose arms equalize the phases) the
    matrix is the modal-flip permutation controlled by polarization, up to
    one global phase.  Imperfect plans yield fidelity < 1 together with the
    per-component phase report.  Honest exchange magnitudes from the bound
    devices are folded in on request; they require ``circuit``.
    """
    from .quantum import cnot_matrix

    if ideal_phases:
        phases = ComponentPhases(0.0, 0.0, 0.0, 0.0)
    else:
        if plan is None:
            raise DomainError("a phase plan is required unless ideal_phases is set")
        phases = component_phases(plan)
    if include_coupling_magnitudes:
        if circuit is None:
            raise DomainError("coupling magnitudes require a bound circuit")
        magnitudes = circuit.component_magnitudes()
    else:
        magnitudes = (1.0, 1.0, 1.0, 1.0)

    unitary = np.zeros((4, 4), dtype=complex)
    unitary[1, 0] = magnitudes[0] * np.exp(1j * phases.even_tm)
    unitary[0, 1] = magnitudes[1] * np.exp(1j * phases.odd_tm)
    unitary[2, 2] = magnitudes[2] * np.exp(1j * phases.even_te)
    unitary[3, 3] = magnitudes[3] * np.exp(1j * phases.odd_te)
    fidelity = float(abs(np.trace(unitary.conj().T @ cnot_matrix())) / 4.0)
    spread = phases.spread_rad()
    report = (
        f"CNOT fidelity {fidelity:.9f}; component phases (rad): "
        f"even,TM {phases.even_tm:+.6f}; odd,TM {phases.odd_tm:+.6f}; "
        f"even,TE {phases.even_te:+.6f}; odd,TE {phases.odd_te:+.6f}; "
        f"spread {spread:.3e} rad mod 2 pi"
    )
    return CnotResult(unitary, fidelity, phases, magnitudes, report)


# ---------------------------------------------------------------------------
# Declarative circuit descriptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseModulatorSpec:
    """A single-arm electro-optic phase trim."""

    length_m: float = 5e-3
    gap_um: float = 5.0
    voltage: float = 0.0
    arm: str = "odd"
    polarization: str = "TM"
    wavelength_um: float = DESIGN_WAVELENGTH_UM
    guide_width_um: float | None = None

    def __post_init__(self) -> None:
        check_polarization(self.polarization)
        if self.arm not in ("even", "odd"):
            raise DesignError("arm must be 'even' or 'odd'")
        if self.length_m <= 0 or self.gap_um <= 0:
            raise DesignError("modulator dimensions must be positive")


@dataclass(frozen=True)
class CircuitStage:
    kind: str
    name: str
    spec: object


@dataclass(frozen=True)
class CircuitDescription:
    wavelength_um: float
    stages: tuple[CircuitStage, ...]

    def stage(self, name: str) -> CircuitStage:
        for stage in self.stages:
            if stage.name == name:
                return stage
        raise ConfigError(f"no stage named {name!r}")


_STAGE_KEYS: dict[str, tuple[set[str], set[str]]] = {
    "mode-analyzer": (
        {"two_mode_width_um", "gap_um"},
        {
            "aux_width_um",
            "coupling_length_m",
            "polarization",
            "odd_output",
            "flip_order",
            "sbend_length_m",
            "port_separation_um",
        },
    ),
    "mode-rotator": (
        set(),
        {
            "coupler_width_um",
            "coupler_length_m",
            "coupler_gap_um",
            "modulator_length_m",
            "modulator_gap_um",
            "polarization",
            "flip_order",
            "voltages",
            "theta",
        },
    ),
    "two-mode-coupler": (
        set(),
        {
            "width_um",
            "separation_um",
            "electrode_length_m",
            "electrode_gap_um",
            "voltage",
            "orientations",
            "flip_order",
        },
    ),
    "phase-modulator": (
        set(),
        {"length_m", "gap_um", "voltage", "arm", "polarization", "guide_width_um"},
    ),
    "sigma-z": (
        {"two_mode_width_um", "gap_um"},
        {
            "aux_width_um",
            "coupling_length_m",
            "polarization",
            "flip_order",
            "even_path_m",
            "odd_path_m",
        },
    ),
}


def _check_stage_keys(kind: str, mapping: Mapping[str, object]) -> None:
    required, optional = _STAGE_KEYS[kind]
    keys = set(mapping) - {"kind", "name"}
    missing = required - keys
    unknown = keys - required - optional
    if missing:
        raise ConfigError(f"stage {kind!r} is missing keys: {sorted(missing)}")
    if unknown:
        raise ConfigError(f"stage {kind!r} has unknown keys: {sorted(unknown)}")


def circuit_from_mapping(mapping: Mapping[str, object]) -> CircuitDescription:
    """Build a circuit description from a parsed TOML-style mapping."""
    known_top = {"wavelength_um", "stage"}
    unknown = set(mapping) - known_top
    if unknown:
        raise ConfigError(f"unknown circuit keys: {sorted(unknown)}")
    wavelength = float(mapping.get("wavelength_um", DESIGN_WAVELENGTH_UM))
    raw_stages = mapping.get("stage", [])
    if not isinstance(raw_stages, Sequence) or isinstance(raw_stages, (str, bytes)):
        raise ConfigError("'stage' must be an array of tables")
    stages: list[CircuitStage] = []
    for index, raw in enumerate(raw_stages):
        if not isinstance(raw, Mapping):
            raise ConfigError(f"stage #{index} is not a table")
        kind = raw.get("kind")
        if kind not in _STAGE_KEYS:
            raise ConfigError(
                f"stage #{index} has unknown kind {kind!r}; "
                f"expected one of {sorted(_STAGE_KEYS)}"
            )
        name = str(raw.get("name", f"stage{index}"))
        _check_stage_keys(kind, raw)
        body = {k: v for k, v in raw.items() if k not in ("kind", "name")}
        stages.append(CircuitStage(kind, name, _stage_spec(kind, body, wavelength)))
    return CircuitDescription(wavelength, tuple(stages))


def _stage_spec(kind: str, body: dict, wavelength_um: float) -> object:
    if kind == "mode-analyzer" or kind == "sigma-z":
        body = dict(body)
        paths = (body.pop("even_path_m", None), body.pop("odd_path_m", None))
        if body.get("aux_width_um") is None or body.get("coupling_length_m") is None:
            # Geometry left open: resolved against a solver at build time.
            spec: object = dict(body, wavelength_um=wavelength_um)
        else:
            spec = ModeAnalyzerSpec(wavelength_um=wavelength_um, **body)
        if kind == "sigma-z":
            return (spec, *paths)
        return spec
    if kind == "mode-rotator":
        body = dict(body)
        theta = body.pop("theta", None)
        voltages = body.pop("voltages", None)
        spec = ModeRotatorSpec(wavelength_um=wavelength_um, **body)
        if voltages is not None:
            spec = spec.with_voltages(*voltages)
        return (spec, theta)
    if kind == "two-mode-coupler":
        body = dict(body)
        if "orientations" in body:
            body["orientations"] = tuple(int(v) for v in body["orientations"])
        return TwoModeCouplerSpec(wavelength_um=wavelength_um, **body)
    if kind == "phase-modulator":
        return PhaseModulatorSpec(wavelength_um=wavelength_um, **body)
    raise ConfigError(f"unhandled stage kind {kind!r}")


def load_circuit_description(source) -> CircuitDescription:
    """Read a circuit description from TOML bytes, text, or a file path."""
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
        import tomli as tomllib

    if isinstance(source, bytes):
        data = tomllib.loads(source.decode("utf-8"))
    elif isinstance(source, str) and "\n" in source:
        data = tomllib.loads(source)
    elif isinstance(source, Mapping):
        data = source
    else:
        with open(source, "rb") as handle:
            data = tomllib.load(handle)
    return circuit_from_mapping(data)


def phase_modulator_unitary(
    spec: PhaseModulatorSpec, solver: ModeSolver, polarization: str
) -> np.ndarray:
    """diag phase on one arm; identity for the unaddressed polarization."""
    if polarization != spec.polarization:
        return np.eye(2, dtype=complex)
    if spec.guide_width_um is not None:
        n = solver.mode(
            WaveguideGeometry(spec.guide_width_um), spec.wavelength_um, polarization, 0
        ).n_eff
    else:
        n = solver.material.index(spec.wavelength_um, polarization)
    r = solver.material.pockels.coefficient(polarization) * 1e-12
    phase = (
        math.pi
        * r
        * n**3
        * spec.length_m
        * spec.voltage
        / (spec.wavelength_um * 1e-6 * spec.gap_um * 1e-6)
    )
    if spec.arm == "even":
        return np.diag([np.exp(1j * phase), 1.0]).astype(complex)
    return np.diag([1.0, np.exp(1j * phase)]).astype(complex)


def stage_unitary(
    stage: CircuitStage, solver: ModeSolver, polarization: str
) -> np.ndarray:
    """Two-mode (even, odd) unitary of one described stage."""
    check_polarization(polarization)
    if stage.kind == "mode-rotator":
        spec, theta = stage.spec
        rotator = ModeRotator(spec, solver)
        if theta is not None:
            voltages = rotator_voltages(float(theta), rotator)
        else:
            voltages = RotatorVoltages(*spec.voltages)
        return rotator_unitary(*voltages, rotator)
    if stage.kind == "phase-modulator":
        return phase_modulator_unitary(stage.spec, solver, polarization)
    if stage.kind == "two-mode-coupler":
        coupler = TwoModeCoupler(stage.spec, solver)
        blocks = reduce_to_blocks(coupler.four_mode(polarization)).blocks
        exchange = [b for b in blocks if (b.mode_a, b.mode_b) in ((0, 3), (1, 2))]
        if exchange:
            return transfer_matrix(exchange[0].params)
        return np.eye(2, dtype=complex)
    if stage.kind == "sigma-z":
        spec, even_path, odd_path = stage.spec
        if isinstance(spec, dict):
            analyzer = ModeAnalyzer.designed(
                solver,
                two_mode_width_um=spec["two_mode_width_um"],
                gap_um=spec["gap_um"],
                polarization=spec.get("polarization", "TM"),
                flip_order=spec.get("flip_order", 1),
                wavelength_um=spec["wavelength_um"],
            )
        else:
            analyzer = ModeAnalyzer(spec, solver)
        return sigma_z_cascade(analyzer, analyzer, even_path, odd_path).unitary
    if stage.kind == "mode-analyzer":
        raise ConfigError(
            "a lone mode-analyzer opens a third port and has no closed "
            "two-mode unitary; pair it in a sigma-z stage or use analyzer_action"
        )
    raise ConfigError(f"unhandled stage kind {stage.kind!r}")


def circuit_unitary(
    description: CircuitDescription, solver: ModeSolver, polarization: str
) -> np.ndarray:
    """Ordered product of the stage unitaries (first stage acts first)."""
    unitary = np.eye(2, dtype=complex)
    for stage in description.stages:
        unitary = stage_unitary(stage, solver, polarization) @ unitary
    return unitary
