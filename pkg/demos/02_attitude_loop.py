"""
Attitude loop convergence
=========================

The attitude law maps the frame error to a desired angular velocity. On the
kinematics alone the function V = tan^2(angle/2)/2 decays at least as fast
as exp(-4 k_min t). This script integrates one large initial error and
prints V next to that bound.
"""

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.spatial.transform import Rotation

from vtolflight.geometry import axis_angle
from vtolflight.inner import InnerGains, attitude_ctl

gains = InnerGains(feedforward=False)
k_min = min(gains.k_att)

Rr = np.eye(3)
R0 = Rotation.from_rotvec(2.8 * np.array([0.6, 0.0, 0.8])).as_matrix()


def rhs(t, x):
    R = x.reshape(3, 3)
    w = attitude_ctl(R, Rr, None, 1.0, gains)
    S = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
    return (S @ R).ravel()


ts = np.linspace(0.0, 3.0, 13)
sol = solve_ivp(rhs, (0, 3.0), R0.ravel(), t_eval=ts, rtol=1e-10, atol=1e-12)

print(f"{'t':>5} {'angle deg':>10} {'V':>12} {'bound':>12}")
V0 = None
for t, x in zip(ts, sol.y.T):
    _, angle = axis_angle(x.reshape(3, 3), Rr)
    V = 0.5 * math.tan(angle / 2) ** 2
    V0 = V if V0 is None else V0
    print(f"{t:5.2f} {math.degrees(angle):10.4f} {V:12.4e} "
          f"{V0 * math.exp(-4 * k_min * t):12.4e}")
