"""
From hover to cruise with one force balance
===========================================

The setpoint solver turns a desired acceleration into a reference frame and
a thrust vector. Here we fly it through the airspeed range with the pitch
held at 3 degrees and watch the thrust move from the lift rotors to the
pusher as the wing takes over.
"""

import math

import numpy as np

from vtolflight.solver import BALANCED, PITCH, THRUST_DIR, SolverInput, SolverModel, solve

model = SolverModel()
weight = model.m * model.g0

# Hovering: impose a thrust pointing straight up the body.
out = solve(SolverInput(np.zeros(3), gamma_T=-math.pi / 2), SolverModel(alpha0=0.0))
print(f"hover: |T| = {out.T_norm:.3f} N for a weight of {weight:.3f} N")

# Level flight at increasing airspeed, pitch imposed, zero sideslip.
print(f"\n{'airspeed':>8} {'T_mc':>8} {'T_fw':>8} {'gamma_T':>8}   (N, N, deg)")
for V in (0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0):
    inp = SolverInput(np.zeros(3), np.array([V, 0.0, 0.0]), PITCH,
                      theta=math.radians(3.0), lateral=BALANCED)
    out = solve(inp, model)
    print(f"{V:8.1f} {out.T_mc:8.2f} {out.T_fw:8.2f} {math.degrees(out.gamma_T):8.2f}")

# Above about 22 m/s the wing at this pitch lifts more than the weight and
# the lift rotors would have to push down. The split is signed; clamping to
# what the rotors can do happens further down the chain.
#
# At cruise the lift rotors still help a little: with 3 degrees of pitch the
# wing carries most, not all, of the weight. Imposing a pure pusher thrust
# instead lets the solver pick the pitch that makes the wing carry it all.
inp = SolverInput(np.zeros(3), np.array([20.0, 0.0, 0.0]), THRUST_DIR, gamma_T=0.0,
                  lateral=BALANCED)
out = solve(inp, model)
pitch = math.degrees(math.asin(-out.R[2, 0]))
print(f"\npusher only at 20 m/s: pitch {pitch:.2f} deg, |T| = {out.T_norm:.2f} N")
