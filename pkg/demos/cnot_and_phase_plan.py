# # A dispersion-managed single-photon CNOT
#
# Polarization controls, modal qubit targets.  The TM analyzer detours the
# odd-TM component onto the exchange coupler, the TE analyzer detours odd-TE
# around it, and the coupler flips modal parity for TM only.  What is left
# is bookkeeping: four optical paths whose accumulated phases must agree
# modulo 2 pi, solved here by the arm-length equalizer.

import math

import numpy as np

from tilnsim.devices import CnotCircuit, cnot_unitary, component_phases, phase_equalize
from tilnsim.modesolver import ModeSolver
from tilnsim.quantum import (
    JOINT_BASIS_LABELS,
    JointState,
    ModalQubit,
    apply,
    concurrence,
    truth_table,
)

solver = ModeSolver()
circuit = CnotCircuit.designed(solver)

# ## The measured constants
#
# Everything the phase plan needs comes out of the solved devices: the four
# modal propagation constants, the coupler's exchange constant, and the
# anomalous phase the TM analyzer writes onto the odd-TE component.

plan = circuit.phase_plan()
print("plan constants (rad/m):")
print(f"  beta even TM {plan.beta_even_tm:.1f}   odd TM {plan.beta_odd_tm:.1f}")
print(f"  beta even TE {plan.beta_even_te:.1f}   odd TE {plan.beta_odd_te:.1f}")
print(f"  coupler exchange {plan.beta_exchange_tm:.1f} over {plan.coupler_length_m * 1e3:.3f} mm")
print(f"  analyzer anomaly on odd TE: {plan.analyzer_anomaly_rad:+.4f} rad")

# ## Equalizing the component phases

solved = phase_equalize(plan, (0.01, 0.0, 0.0))
print(
    f"\narm lengths: even {solved.even_arm_m * 1e3:.6f} mm, "
    f"odd TM {solved.odd_tm_arm_m * 1e3:.6f} mm, "
    f"odd TE {solved.odd_te_arm_m * 1e3:.6f} mm"
)
phases = component_phases(solved)
print(f"component phase spread mod 2 pi: {phases.spread_rad():.2e} rad")

# ## The gate

result = cnot_unitary(circuit, solved)
print(f"\n{result.report}")
table = truth_table(result.unitary)
print(f"truth table verdict: is_cnot = {table.is_cnot}")
for label, population in zip(JOINT_BASIS_LABELS, table.populations):
    print(f"  |{label}> -> target population {population:.9f}")

# ## Entangling power
#
# Feed (|TM> + |TE>)/sqrt(2) on polarization with the modal qubit in |even>:
# the output cannot be written as a product state any more.

state = JointState.product(
    [math.sqrt(0.5), math.sqrt(0.5)], ModalQubit([1.0, 0.0])
)
out = apply(result.unitary, state)
print("\noutput amplitudes:")
for label, amp in zip(JOINT_BASIS_LABELS, out.amplitudes):
    print(f"  |{label}>: {amp.real:+.4f} {amp.imag:+.4f}j")
print(f"concurrence: {concurrence(out):.12f}")

# ## What the hardware itself limits
#
# Folding in the honest exchange magnitudes of the bound devices (instead
# of unit placeholders) budgets the gate fidelity against the off-design
# leak of the TM analyzer and the finite analyzer exchanges.

honest = cnot_unitary(circuit, solved, include_coupling_magnitudes=True)
print(f"\nwith device magnitudes: fidelity {honest.fidelity:.6f}")
print("component magnitudes:", np.round(honest.magnitudes, 6))
