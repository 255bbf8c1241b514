"""
Local stability along the transition
====================================

One set of gains serves the whole flight envelope. To check it, the closed
loop is trimmed at airspeeds from hover to cruise and linearized; the
slowest eigenvalue at each trim is printed. All sit in the left half plane.
Flipping the sign of one rate gain shows what an unstable loop looks like.
"""

import os

import numpy as np

from vtolflight.linearize import linearize_closed_loop, parse_sweep
from vtolflight.scenario import load_scenario

here = os.path.dirname(os.path.abspath(__file__))
path = os.path.join(here, "..", "scenarios", "default.ini")
s = load_scenario(path)

print(f"{'V':>5} {'phase':>5} {'states':>6} {'slowest eigenvalue':>26}")
for V in parse_sweep("0:4:20"):
    lm = linearize_closed_loop(s, V)
    ev = lm.eigenvalues
    slow = ev[np.argmax(ev.real)]
    print(f"{V:5.1f} {lm.setpoints.phase.name:>5} {len(lm.labels):6d} "
          f"{slow.real:12.4e} {slow.imag:+10.4f}j")

bad = load_scenario(path, ["gains.kp_rate=-1,12,4.75"])
print(f"\nroll rate gain -1 at hover: max Re = {linearize_closed_loop(bad, 0.0).max_real:.3f}")
