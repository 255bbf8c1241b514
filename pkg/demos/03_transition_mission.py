"""
A full transition and back-transition
=====================================

The default scenario flies the whole mission: hover, transition through
T0-T4, cruise with a 180 degree turn, back-transition through BT0-BT4 and
hover again. The plant is 1.5 kg heavier than the controller believes and
a 3 m/s headwind with a 1 m/s crosswind blows throughout.

Usage: python demos/03_transition_mission.py [output directory]
"""

import os
import sys

import numpy as np

from vtolflight.output import emit_outputs
from vtolflight.scenario import load_scenario
from vtolflight.sim import run_scenario
from vtolflight.transition import Phase

here = os.path.dirname(os.path.abspath(__file__))
s = load_scenario(os.path.join(here, "..", "scenarios", "default.ini"))
res = run_scenario(s)
log, m = res.log, res.metrics

# When was each phase entered, and how did the vehicle look then?
t, ph = log.col("t"), log.phase()
starts = np.flatnonzero(np.diff(ph, prepend=-1))
print(f"{'phase':>5} {'t (s)':>7} {'airspeed':>9} {'altitude':>9} {'pitch':>7} {'lambda':>7}")
for k in starts:
    print(f"{Phase(ph[k]).name:>5} {t[k]:7.2f} {log.col('airspeed')[k]:9.2f} "
          f"{-log.col('z')[k]:9.2f} {log.col('pitch_deg')[k]:7.2f} {log.col('lambda')[k]:7.2f}")

print()
for key in ("altitude_dev_transition", "heading_err_transition_deg", "fw_airspeed_mean",
            "bt2_negative_thrust_samples", "final_speed", "runtime_s"):
    print(f"{key:30s} {m[key]:.4g}")

# During BT2 the airspeed controller asks for braking the pusher cannot give.
bt2 = ph == int(Phase.BT2)
print(f"\nBT2: most negative pusher demand {log.col('T_fw_raw')[bt2].min():.2f} N, "
      f"pusher command stays at {log.col('t_push')[bt2 & (log.col('T_fw_raw') < 0)].max():.1f} N")

out_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "mission_out")
paths = emit_outputs(log, out_dir, m)
print(f"\nwrote {len(paths)} files to {out_dir}")
