# # Programming the mode rotator
#
# The rotator is a directional coupler whose two arms are pushed apart in
# index by a drive voltage V1, wrapped by two phase modulators (V2, V3) that
# cancel the residual arm retardations.  Solving the three voltages for a
# requested angle theta and checking the resulting unitary against the pure
# rotation is a one-liner each.

import math

import numpy as np

from tilnsim.coupling import mode_rotation
from tilnsim.devices import (
    ModeRotator,
    ModeRotatorSpec,
    rotation_angle,
    rotator_unitary,
    rotator_voltages,
)
from tilnsim.modesolver import ModeSolver
from tilnsim.quantum import phase_aligned_distance

solver = ModeSolver()
rotator = ModeRotator(ModeRotatorSpec(), solver)

print(
    f"coupler: kappa = {rotator.kappa:.2f} rad/m over "
    f"{rotator.spec.coupler_length_m * 1e3:.2f} mm "
    f"(one full flip at zero mismatch)"
)
print(
    f"drive slopes: {rotator.mismatch_per_volt:.2f} rad/m of pair mismatch per "
    f"volt, {rotator.phase_per_volt:.4f} rad of arm phase per volt"
)

# ## The operating curve
#
# V1 starts at the sqrt(3) pi null (no net transfer, theta = 0) and falls
# monotonically to zero at theta = pi, where the bare coupler is already a
# full flip and the arm trims retire.

print("\n  theta (rad)     V1 (V)      V2 (V)      V3 (V)")
for theta in np.linspace(0.0, math.pi, 9):
    v = rotator_voltages(float(theta), rotator)
    print(f"  {theta:9.4f}  {v.v1:9.4f}  {v.v2:10.5f}  {v.v3:10.5f}")

# ## Round trip and fidelity to the ideal rotation

worst = 0.0
for theta in np.linspace(0.0, math.pi, 25):
    v = rotator_voltages(float(theta), rotator)
    assert abs(rotation_angle(v.v1, rotator) - theta) < 1e-12
    u = rotator_unitary(*v, rotator)
    worst = max(worst, phase_aligned_distance(u, mode_rotation(float(theta))))
print(f"\nworst distance to the pure rotation over 25 angles: {worst:.2e}")

# ## The flip endpoint
#
# At theta = pi the compensating trims vanish; any V2 = -V3 pair leaves the
# flip intact because the two modulators sit on different arms.

flip = rotator_unitary(0.0, 0.0, 0.0, rotator)
print("\nU(V1=0) =")
print(np.array_str(flip, precision=4, suppress_small=True))
trimmed = rotator_unitary(0.0, 2.0, -2.0, rotator)
print(
    "distance of U(0, +2 V, -2 V) from the same flip (up to phase): "
    f"{phase_aligned_distance(trimmed, flip):.2e}"
)
