"""
Aborting a transition
=====================

An abort command during a transition phase jumps to the matching
back-transition phase. Here the pilot aborts 12 s into the mission, while
the surfaces are being blended in, and the vehicle returns to hover.
Lambda never jumps: the back-transition ramp starts from wherever the
transition ramp stopped.
"""

import os

import numpy as np

from vtolflight.scenario import load_scenario
from vtolflight.sim import run_scenario
from vtolflight.transition import Phase

here = os.path.dirname(os.path.abspath(__file__))
res = run_scenario(load_scenario(os.path.join(here, "..", "scenarios", "abort.ini")))
log, m = res.log, res.metrics

print("phases:", m["phase_sequence"])
print("aborted:", m["aborted"])

lam = log.col("lambda")
print(f"largest lambda step between records: {np.abs(np.diff(lam)).max():.3f}")

ph = log.phase()
k = int(np.argmax(np.isin(ph, [int(Phase.BT2), int(Phase.BT3), int(Phase.BT4)])))
print(f"aborted at t = {log.col('t')[k]:.2f} s, entering {Phase(ph[k]).name} "
      f"with lambda = {lam[k]:.2f} and airspeed {log.col('airspeed')[k]:.2f} m/s")
print(f"final speed {m['final_speed']:.3g} m/s, altitude {-log.col('z')[-1]:.2f} m")
