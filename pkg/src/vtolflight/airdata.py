"""Air-velocity vector from a pitot reading, attitude and inertial velocity.

Assuming horizontal wind and no sideslip, the vertical component of the air
velocity equals the vertical inertial velocity. Together with the pitot
measurement of the longitudinal component this fixes the component along k.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

EPS_AIRDATA = 1e-3


@dataclass
class AirDataEstimate:
    v_a: np.ndarray        # inertial coordinates
    v_a_body: np.ndarray   # (v_a1, 0, v_a3)

    @property
    def alpha(self):
        return math.atan2(self.v_a_body[2], self.v_a_body[0])

    @property
    def beta(self):
        return 0.0

    @property
    def airspeed(self):
        return float(np.linalg.norm(self.v_a_body))


@njit(cache=True)
def estimate_k(v, R, va1, eps):
    ik = R[2, 0]   # i . k0
    kk = R[2, 2]   # k . k0
    va3 = (v[2] - va1 * ik) * kk / (kk * kk + eps)
    return va1 * R[:, 0] + va3 * R[:, 2], va3


def estimate_airvelocity(v, R, va1_pitot, eps=EPS_AIRDATA):
    v = np.asarray(v, float)
    R = np.asarray(R, float)
    va, va3 = estimate_k(v, R, float(va1_pitot), float(eps))
    return AirDataEstimate(va, np.array([float(va1_pitot), 0.0, va3]))
