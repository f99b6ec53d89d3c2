"""Command-line surface: regenerate figure-style data files and run checks.

Subcommands
-----------
dispersion          effective indices / propagation constants vs guide width
coupler-evolution   mode powers along the two-mode electro-optic coupler
rotator-curve       operating voltages of the mode rotator vs rotation angle
cnot-verify         truth table, fidelity, and entanglement check of the gate
phase-plan          solve equalizing arm lengths for the four-component phases
selftest            deterministic library battery (seeded, byte-stable)

Every output carries header metadata: the generating command with its
semantic parameters (output paths excluded so reruns byte-match), the
sha256 of the material config, and the units of each column.  Normalized
propagation constants are reported as beta / beta_substrate = n_eff /
n_substrate at the same wavelength and polarization, as declared in the
header.  Floats are rendered with 12 significant digits; a fixed seed
therefore reproduces identical bytes.

Exit codes: 0 success, 1 verification failure (including physically
infeasible designs), 2 configuration/usage error, 3 numeric failure.

Sweep rows are computed on a thread pool; assembly of the output is
single-writer and ordered, so parallelism never reorders rows.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import devices, quantum
from .coupling import (
    CouplerParams,
    cascade_decomposition,
    mode_rotation,
    polar_form,
    reduce_to_blocks,
    transfer_matrix,
)
from .errors import (
    ConfigError,
    DomainError,
    InfeasiblePlanError,
    NumericError,
    TilnsimError,
)
from .material import config_sha256, default_material, load_material_config
from .modesolver import ModeSolver, WaveguideGeometry

_EVOLUTION_INPUTS = ("even1", "odd1", "even2", "odd2")


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _command_string(name: str, pairs) -> str:
    parts = [f"tilnsim {name}"]
    for key, value in pairs:
        if isinstance(value, (list, tuple)):
            rendered = " ".join(_fmt(v) for v in value)
        else:
            rendered = _fmt(value)
        parts.append(f"--{key} {rendered}")
    return " ".join(parts)


def _solver_for(args) -> ModeSolver:
    config = getattr(args, "config", None)
    if config is None:
        return ModeSolver()
    try:
        material = load_material_config(config)
    except FileNotFoundError as exc:
        raise ConfigError(f"material config not found: {config}") from exc
    return ModeSolver(material)


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _emit(args, *, command, units, columns, rows, comments=(), json_extra=None):
    """Write one table in the selected format to --out (default stdout)."""
    hashes = [("config_sha256", config_sha256(getattr(args, "config", None)))]
    if args.format == "csv":
        lines = [f"# command: {command}"]
        lines += [f"# {name}: {value}" for name, value in hashes]
        lines.append(
            "# units: " + ", ".join(f"{c}={u}" for c, u in zip(columns, units))
        )
        lines += [f"# {c}" for c in comments]
        lines.append(",".join(columns))
        lines += [",".join(_fmt(v) for v in row) for row in rows]
        text = "\n".join(lines) + "\n"
    else:
        doc = {
            "command": command,
            **dict(hashes),
            "units": dict(zip(columns, units)),
            "comments": list(comments),
            "columns": list(columns),
            "rows": [
                dict(zip(columns, (_json_safe(v) for v in row))) for row in rows
            ],
        }
        if json_extra:
            doc.update(json_extra)
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)


def _ordered_map(fn, items):
    items = list(items)
    if len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(8, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# dispersion
# ---------------------------------------------------------------------------


def cmd_dispersion(args) -> int:
    solver = _solver_for(args)
    if args.points < 0:
        raise ConfigError("--points must be >= 0")
    if args.w_min <= 0 or args.w_max < args.w_min:
        raise ConfigError("need 0 < --w-min <= --w-max")
    widths = np.linspace(args.w_min, args.w_max, args.points)
    n_sub = solver.material.index(args.wavelength, args.pol)

    def row(width: float):
        values = [float(width)]
        notes = []
        betas = []
        for m in (0, 1):
            try:
                mode = solver.mode(
                    WaveguideGeometry(float(width)), args.wavelength, args.pol, m
                )
                values.append(mode.n_eff)
                betas.append(mode.beta)
            except TilnsimError as exc:
                values.append(math.nan)
                betas.append(math.nan)
                notes.append(f"m{m}: {exc}")
        values.extend(betas)
        values.extend(b / (n_sub * 2.0 * math.pi / (args.wavelength * 1e-6)) for b in betas)
        values.append("; ".join(notes))
        return values

    rows = _ordered_map(row, widths)
    comments = [
        "normalized beta = beta / beta_substrate = n_eff / n_substrate "
        f"(n_substrate = {n_sub:.12g} at {args.wavelength:.12g} um {args.pol})"
    ]
    try:
        target = solver.mode(
            WaveguideGeometry(args.two_mode_width), args.wavelength, args.pol, 1
        )
        match = solver.find_phasematch_width(target)
        if match is None:
            comments.append(
                f"phase_match: no even-mode width matches the odd mode of "
                f"w={args.two_mode_width:.12g} um"
            )
        else:
            comments.append(
                f"phase_match: even mode of w={match:.6f} um matches the odd "
                f"mode of w={args.two_mode_width:.12g} um"
            )
    except TilnsimError as exc:
        comments.append(f"phase_match: unavailable ({exc})")
    _emit(
        args,
        command=_command_string(
            "dispersion",
            [
                ("w-min", args.w_min),
                ("w-max", args.w_max),
                ("points", args.points),
                ("wavelength", args.wavelength),
                ("pol", args.pol),
                ("two-mode-width", args.two_mode_width),
                ("format", args.format),
            ],
        ),
        units=["um", "1", "1", "rad/m", "rad/m", "1", "1", "text"],
        columns=[
            "w_um",
            "neff_m0",
            "neff_m1",
            "beta_m0",
            "beta_m1",
            "beta_norm_m0",
            "beta_norm_m1",
            "note",
        ],
        rows=rows,
        comments=comments,
    )
    return 0


# ---------------------------------------------------------------------------
# coupler-evolution
# ---------------------------------------------------------------------------


def _coupler_spec_from_args(args) -> devices.TwoModeCouplerSpec:
    if args.device is not None:
        description = devices.load_circuit_description(args.device)
        specs = [
            stage.spec
            for stage in description.stages
            if stage.kind == "two-mode-coupler"
        ]
        if not specs:
            raise ConfigError("device file contains no two-mode-coupler stage")
        spec = specs[0]
    else:
        spec = devices.TwoModeCouplerSpec()
    if args.voltage is not None:
        spec = spec.with_voltage(args.voltage)
    if args.length is not None:
        if args.length < 0:
            raise ConfigError("--length must be >= 0")
        spec = spec if args.length == 0 else spec.with_length(args.length)
    return spec


def cmd_coupler_evolution(args) -> int:
    if args.points < 1:
        raise ConfigError("--points must be >= 1")
    spec = _coupler_spec_from_args(args)
    index = _EVOLUTION_INPUTS.index(args.input)
    launch = np.zeros(4, dtype=complex)
    launch[index] = 1.0
    command = _command_string(
        "coupler-evolution",
        [
            ("pol", args.pol),
            ("input", args.input),
            ("points", args.points),
            ("voltage", spec.voltage),
            ("length", 0.0 if args.length == 0 else spec.electrode_length_m),
            ("tuned", args.tuned),
            ("format", args.format),
        ],
    )
    columns = ["z_m", "p_even1", "p_odd1", "p_even2", "p_odd2"]
    units = ["m", "1", "1", "1", "1"]
    if args.length == 0:
        rows = [[0.0] + [float(abs(a) ** 2) for a in launch]]
        _emit(
            args,
            command=command,
            units=units,
            columns=columns,
            rows=rows,
            comments=["zero-length device: input echoed"],
        )
        return 0
    solver = _solver_for(args)
    coupler = devices.TwoModeCoupler(spec, solver)
    if args.tuned:
        coupler = devices.tune_tmw_coupler(coupler, "TM")
    reduction = reduce_to_blocks(coupler.four_mode(args.pol))
    length = coupler.spec.electrode_length_m
    z_grid = np.linspace(0.0, length, args.points)
    rows = [
        [float(z)] + [float(p) for p in np.abs(reduction.unitary(float(z)) @ launch) ** 2]
        for z in z_grid
    ]
    pairing = ", ".join(
        f"({_EVOLUTION_INPUTS[b.mode_a]},{_EVOLUTION_INPUTS[b.mode_b]}) {b.kind} "
        f"delta_beta={b.params.delta_beta:.6g} rad/m"
        for b in reduction.blocks
    )
    comments = [
        f"voltage: {coupler.spec.voltage:.12g} V, electrode length "
        f"{coupler.spec.electrode_length_m:.12g} m, polarization {args.pol}",
        f"retained blocks: {pairing or 'none (all modes pass through)'}",
    ]
    _emit(args, command=command, units=units, columns=columns, rows=rows, comments=comments)
    return 0


# ---------------------------------------------------------------------------
# rotator-curve
# ---------------------------------------------------------------------------


def cmd_rotator_curve(args) -> int:
    if args.points < 1:
        raise ConfigError("--points must be >= 1")
    solver = _solver_for(args)
    rotator = devices.ModeRotator(devices.ModeRotatorSpec(), solver)
    thetas = np.linspace(0.0, math.pi, args.points)

    def row(theta: float):
        v = devices.rotator_voltages(float(theta), rotator)
        return [float(theta), v.v1, v.v2, v.v3]

    rows = _ordered_map(row, thetas)
    comments = [
        f"coupler: kappa={rotator.kappa:.12g} rad/m, "
        f"L={rotator.spec.coupler_length_m:.12g} m, n_eff={rotator.n_eff:.12g}",
        f"drive slopes: mismatch {rotator.mismatch_per_volt:.12g} rad/m/V, "
        f"arm phase {rotator.phase_per_volt:.12g} rad/V",
    ]
    _emit(
        args,
        command=_command_string(
            "rotator-curve", [("points", args.points), ("format", args.format)]
        ),
        units=["rad", "V", "V", "V"],
        columns=["theta_rad", "v1", "v2", "v3"],
        rows=rows,
        comments=comments,
    )
    return 0


# ---------------------------------------------------------------------------
# cnot-verify
# ---------------------------------------------------------------------------


def cmd_cnot_verify(args) -> int:
    solver = _solver_for(args)
    circuit = devices.CnotCircuit.designed(solver)
    arms = None
    if args.ideal_phases:
        result = devices.cnot_unitary(circuit, ideal_phases=True)
    else:
        plan = circuit.phase_plan()
        if args.arms is not None:
            plan = plan.with_arms(*args.arms)
        else:
            plan = devices.phase_equalize(plan, tuple(args.min_arms))
        arms = (plan.even_arm_m, plan.odd_tm_arm_m, plan.odd_te_arm_m)
        result = devices.cnot_unitary(circuit, plan)
    table = quantum.truth_table(result.unitary)

    rng = np.random.default_rng(args.seed)
    target = quantum.cnot_matrix()
    gate_phase = float(np.angle(result.unitary[1, 0]))
    aligned = np.exp(-1j * gate_phase) * result.unitary
    state_residual = 0.0
    for _ in range(args.states):
        state = quantum.haar_random_state(rng)
        out = aligned @ state.amplitudes
        state_residual = max(
            state_residual, float(np.linalg.norm(out - target @ state.amplitudes))
        )
    entangled = quantum.apply(
        result.unitary,
        quantum.JointState.product(
            [math.sqrt(0.5), math.sqrt(0.5)], quantum.ModalQubit([1.0, 0.0])
        ),
    )
    conc = quantum.concurrence(entangled)
    ok = (
        table.is_cnot
        and abs(conc - 1.0) <= 1e-9
        and state_residual <= 1e-9
        and result.fidelity >= 1.0 - 1e-6
    )
    phases = result.phases
    rows = [
        ["status", "pass" if ok else "fail"],
        ["fidelity", result.fidelity],
        ["is_cnot", table.is_cnot],
        ["population_min", min(table.populations)],
        ["phase_deviation_max_rad", max(table.phase_deviations_rad)],
        ["concurrence", conc],
        ["random_state_max_residual", state_residual],
        ["phase_even_tm_rad", phases.even_tm],
        ["phase_odd_tm_rad", phases.odd_tm],
        ["phase_even_te_rad", phases.even_te],
        ["phase_odd_te_rad", phases.odd_te],
        ["phase_spread_mod_2pi_rad", phases.spread_rad()],
    ]
    if arms is not None:
        rows += [
            ["arm_even_m", arms[0]],
            ["arm_odd_tm_m", arms[1]],
            ["arm_odd_te_m", arms[2]],
        ]
    command_pairs = [("states", args.states), ("seed", args.seed)]
    if args.ideal_phases:
        command_pairs.append(("ideal-phases", True))
    if args.arms is not None:
        command_pairs.append(("arms", list(args.arms)))
    if args.min_arms != [0.0, 0.0, 0.0]:
        command_pairs.append(("min-arms", list(args.min_arms)))
    command_pairs.append(("format", args.format))
    _emit(
        args,
        command=_command_string("cnot-verify", command_pairs),
        units=["", ""],
        columns=["quantity", "value"],
        rows=rows,
        comments=[
            "values: phases rad, lengths m, fidelity/populations/concurrence "
            "dimensionless"
        ],
        json_extra={"truth_table": table.to_document()},
    )
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# phase-plan
# ---------------------------------------------------------------------------

_PLAN_REQUIRED = {
    "coupler_length_m",
    "beta_even_tm",
    "beta_odd_tm",
    "beta_even_te",
    "beta_odd_te",
    "beta_exchange_tm",
    "beta_through_te",
}
_PLAN_OPTIONAL = {
    "analyzer_anomaly_rad",
    "analyzer_order_tm",
    "coupler_order",
    "analyzer_order_te",
    "even_arm_m",
    "odd_tm_arm_m",
    "odd_te_arm_m",
}


def _load_phase_plan(path) -> devices.PhasePlan:
    try:
        import tomllib
    except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
        import tomli as tomllib

    try:
        with open(path, "rb") as handle:
            doc = tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"plan file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"plan file is not valid TOML: {exc}") from exc
    unknown = set(doc) - _PLAN_REQUIRED - _PLAN_OPTIONAL
    if unknown:
        raise ConfigError(f"unknown phase-plan keys: {sorted(unknown)}")
    missing = _PLAN_REQUIRED - set(doc)
    if missing:
        raise ConfigError(f"phase-plan file is missing keys: {sorted(missing)}")
    return devices.PhasePlan(**doc)


def cmd_phase_plan(args) -> int:
    if args.plan is not None:
        plan = _load_phase_plan(args.plan)
    else:
        plan = devices.CnotCircuit.designed(_solver_for(args)).phase_plan()
    command_pairs = []
    if args.plan is not None:
        command_pairs.append(("plan", "file"))
    command_pairs += [("min-arms", list(args.min_arms)), ("format", args.format)]
    command = _command_string("phase-plan", command_pairs)
    try:
        solved = devices.phase_equalize(plan, tuple(args.min_arms))
    except InfeasiblePlanError as exc:
        rows = [["status", "infeasible"], ["reason", str(exc)]]
        rows += [[f"residual_{k}", v] for k, v in sorted((exc.residuals or {}).items())]
        _emit(
            args,
            command=command,
            units=["", ""],
            columns=["quantity", "value"],
            rows=rows,
        )
        return 1
    phases = devices.component_phases(solved)
    rows = [
        ["status", "solved"],
        ["arm_even_m", solved.even_arm_m],
        ["arm_odd_tm_m", solved.odd_tm_arm_m],
        ["arm_odd_te_m", solved.odd_te_arm_m],
        ["phase_even_tm_rad", phases.even_tm],
        ["phase_odd_tm_rad", phases.odd_tm],
        ["phase_even_te_rad", phases.even_te],
        ["phase_odd_te_rad", phases.odd_te],
        ["phase_spread_mod_2pi_rad", phases.spread_rad()],
    ]
    _emit(
        args,
        command=command,
        units=["", ""],
        columns=["quantity", "value"],
        rows=rows,
        comments=["lengths m, phases rad; spread is the max pairwise gap mod 2 pi"],
    )
    return 0


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


def cmd_selftest(args) -> int:
    rng = np.random.default_rng(args.seed)
    checks: list[tuple[str, float, float]] = []

    kappas = rng.uniform(10.0, 2.0e4, 200)
    mismatches = rng.uniform(-4.0e4, 4.0e4, 200)
    lengths = rng.uniform(1.0e-5, 5.0e-3, 200)
    polar_res = cascade_res = unitary_res = 0.0
    eye = np.eye(2)
    for kappa, mismatch, length in zip(kappas, mismatches, lengths):
        params = CouplerParams(float(kappa), float(mismatch), float(length))
        direct = transfer_matrix(params)
        polar_res = max(
            polar_res, float(np.max(np.abs(polar_form(params).matrix() - direct)))
        )
        cascade_res = max(
            cascade_res,
            float(np.max(np.abs(cascade_decomposition(params).matrix() - direct))),
        )
        unitary_res = max(
            unitary_res, float(np.max(np.abs(direct.conj().T @ direct - eye)))
        )
    checks.append(("coupling_polar_max_residual", polar_res, 1e-12))
    checks.append(("coupling_cascade_max_residual", cascade_res, 1e-12))
    checks.append(("coupling_unitarity_max_residual", unitary_res, 1e-12))

    flip = transfer_matrix(CouplerParams(1000.0, 0.0, math.pi / 2000.0))
    checks.append(
        (
            "flip_residual",
            float(np.max(np.abs(flip - np.array([[0, -1j], [-1j, 0]])))),
            1e-12,
        )
    )
    identity = transfer_matrix(CouplerParams(0.0, 5.0e4, 2.0e-3))
    checks.append(
        (
            "identity_offdiagonal_max",
            float(max(abs(identity[0, 1]), abs(identity[1, 0]))),
            1e-12,
        )
    )
    # gamma*L = 2*pi with kappa=600, delta_beta=1600: diagonal envelope
    diagonal = transfer_matrix(CouplerParams(600.0, 1600.0, 2.0 * math.pi / 1000.0))
    checks.append(
        (
            "diagonal_offdiagonal_max",
            float(max(abs(diagonal[0, 1]), abs(diagonal[1, 0]))),
            1e-12,
        )
    )
    null = CouplerParams(1000.0, math.sqrt(3) * math.pi / (math.pi / 2000.0), math.pi / 2000.0)
    checks.append(
        ("null_transfer_residual", abs(1.0 - abs(transfer_matrix(null)[0, 0]) ** 2), 1e-12)
    )

    solver = _solver_for(args)
    rotator = devices.ModeRotator(devices.ModeRotatorSpec(), solver)
    rotation_residual = 0.0
    for theta in rng.uniform(0.0, math.pi, 20):
        voltages = devices.rotator_voltages(float(theta), rotator)
        rotation_residual = max(
            rotation_residual,
            quantum.phase_aligned_distance(
                devices.rotator_unitary(*voltages, rotator), mode_rotation(float(theta))
            ),
        )
    checks.append(("rotator_max_distance", rotation_residual, 1e-9))
    grid = np.linspace(0.0, math.pi, 25)
    v1 = [devices.rotator_voltages(float(t), rotator).v1 for t in grid]
    checks.append(
        ("rotator_v1_monotone_violation", float(max(np.diff(v1).max(), 0.0)), 0.0)
    )
    checks.append(("rotator_v1_at_pi", abs(v1[-1]), 1e-12))

    plan_spread = 0.0
    for _ in range(20):
        betas = 1.6e7 + rng.uniform(-2.0e6, 2.0e6, 6)
        plan = devices.PhasePlan(
            coupler_length_m=float(rng.uniform(1e-3, 1.5e-2)),
            beta_even_tm=float(betas[0]),
            beta_odd_tm=float(betas[1]),
            beta_even_te=float(betas[2]),
            beta_odd_te=float(betas[3]),
            beta_exchange_tm=float(betas[4]),
            beta_through_te=float(betas[5]),
            analyzer_anomaly_rad=float(rng.uniform(-math.pi, math.pi)),
        )
        solved = devices.phase_equalize(plan, tuple(rng.uniform(0.0, 0.02, 3)))
        plan_spread = max(plan_spread, devices.component_phases(solved).spread_rad())
    checks.append(("phase_plan_max_spread_rad", plan_spread, 1e-9))

    ideal = devices.cnot_unitary(None, ideal_phases=True)
    table = quantum.truth_table(ideal.unitary)
    checks.append(("cnot_truth_table_fidelity_deficit", 1.0 - table.fidelity, 1e-12))
    entangled = quantum.apply(
        ideal.unitary,
        quantum.JointState.product(
            [math.sqrt(0.5), math.sqrt(0.5)], quantum.ModalQubit([1.0, 0.0])
        ),
    )
    checks.append(
        ("cnot_concurrence_deviation", abs(quantum.concurrence(entangled) - 1.0), 1e-12)
    )

    n_o = solver.material.index(devices.DESIGN_WAVELENGTH_UM, "TE")
    n_e = solver.material.index(devices.DESIGN_WAVELENGTH_UM, "TM")

    rows = []
    failures = 0
    for name, value, threshold in checks:
        status = "pass" if value <= threshold else "fail"
        failures += status == "fail"
        rows.append([name, float(value), float(threshold), status])
    rows.append(["material_n_ordinary_at_design", float(n_o), math.nan, "info"])
    rows.append(["material_n_extraordinary_at_design", float(n_e), math.nan, "info"])
    _emit(
        args,
        command=_command_string(
            "selftest", [("seed", args.seed), ("format", args.format)]
        ),
        units=["", "", "", ""],
        columns=["check", "value", "threshold", "status"],
        rows=rows,
        comments=[f"seed: {args.seed}"],
        json_extra={"ok": failures == 0, "seed": args.seed},
    )
    return 0 if failures == 0 else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tilnsim",
        description="Coupled-mode simulator for diffused-channel modal-qubit devices",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="material TOML (default: packaged values)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=812, help="random seed")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser(
        "dispersion", parents=[common], help="mode indices vs guide width"
    )
    p.add_argument("--w-min", type=float, default=2.0)
    p.add_argument("--w-max", type=float, default=8.0)
    p.add_argument("--points", type=int, default=61)
    p.add_argument("--wavelength", type=float, default=devices.DESIGN_WAVELENGTH_UM)
    p.add_argument("--pol", choices=("TM", "TE"), default="TM")
    p.add_argument(
        "--two-mode-width",
        type=float,
        default=5.6,
        help="guide whose odd mode anchors the phase-match annotation",
    )
    p.set_defaults(func=cmd_dispersion)

    p = sub.add_parser(
        "coupler-evolution", parents=[common], help="powers along the coupler"
    )
    p.add_argument("--pol", choices=("TM", "TE"), default="TM")
    p.add_argument("--input", choices=_EVOLUTION_INPUTS, default="even1")
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--voltage", type=float, default=None, help="override drive voltage")
    p.add_argument("--length", type=float, default=None, help="override electrode length (m)")
    p.add_argument(
        "--tuned",
        action="store_true",
        help="retune voltage and length for the TM exchange first",
    )
    p.add_argument("--device", default=None, help="circuit TOML with a two-mode-coupler stage")
    p.set_defaults(func=cmd_coupler_evolution)

    p = sub.add_parser(
        "rotator-curve", parents=[common], help="rotator voltages vs angle"
    )
    p.add_argument("--points", type=int, default=50)
    p.set_defaults(func=cmd_rotator_curve)

    p = sub.add_parser(
        "cnot-verify", parents=[common], help="verify the controlled mode flip"
    )
    p.add_argument("--states", type=int, default=100)
    p.add_argument(
        "--arms",
        type=float,
        nargs=3,
        metavar=("L1", "L2", "L3"),
        default=None,
        help="use these arm lengths (m) instead of solving",
    )
    p.add_argument(
        "--min-arms",
        type=float,
        nargs=3,
        metavar=("L1", "L2", "L3"),
        default=[0.0, 0.0, 0.0],
        help="minimum arm lengths (m) for the equalizer",
    )
    p.add_argument(
        "--ideal-phases",
        action="store_true",
        help="skip the plan and verify the unit-magnitude permutation",
    )
    p.set_defaults(func=cmd_cnot_verify)

    p = sub.add_parser(
        "phase-plan", parents=[common], help="solve equalizing arm lengths"
    )
    p.add_argument("--plan", default=None, help="phase-plan TOML (default: designed circuit)")
    p.add_argument(
        "--min-arms",
        type=float,
        nargs=3,
        metavar=("L1", "L2", "L3"),
        default=[0.0, 0.0, 0.0],
    )
    p.set_defaults(func=cmd_phase_plan)

    p = sub.add_parser("selftest", parents=[common], help="seeded deterministic battery")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"tilnsim: configuration error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"tilnsim: invalid input: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"tilnsim: numeric failure: {exc}", file=sys.stderr)
        return 3
    except TilnsimError as exc:
        print(f"tilnsim: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
