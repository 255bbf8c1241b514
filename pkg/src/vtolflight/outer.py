"""Position and speed-vector loops producing the desired acceleration a_r.

Every function is state-in/state-out: integrator values are passed in and
the updated values returned, the caller owns them. Integrators are advanced
with explicit Euler after the output is computed, and they are frozen when

* they sit at their bound and the error would push them further, or
* the saturated output would be driven deeper into saturation.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import E3, cross, sat_norm, sat_scalar

V_MIN_HEADING = 1.0


@dataclass
class OuterGains:
    # altitude
    k_z: float = 0.25
    vz_min: float = -1.5
    vz_max: float = 1.0
    # trajectory tracking
    k_p: float = 0.29
    vh_max: float = 5.0
    # vertical speed
    k_vz: float = 3.65
    kI_vz: float = 1.25
    dI_vz: float = 3.15
    az_min: float = -5.5
    az_max: float = 4.5
    # horizontal velocity tracking
    k_vh: float = 1.5
    kI_vh: float = 0.7
    dI_vh: float = 2.75
    ah_max: float = 3.35
    # heading and speed regulation
    k_t: float = 2.4
    kI_t: float = 1.1
    dI_vt: float = 1.3
    at_min: float = -1.0
    at_max: float = 5.0
    k_h: float = 0.8
    kI_h: float = 0.16
    dI_h: float = 1.5
    al_max: float = 5.21

    def __post_init__(self):
        problems = []
        for name in ("k_z", "k_p", "vh_max", "k_vz", "kI_vz", "k_vh", "kI_vh",
                     "ah_max", "k_t", "kI_t", "k_h", "kI_h", "al_max"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        for name in ("dI_vz", "dI_vh", "dI_vt", "dI_h"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be non-negative")
        for lo, hi in (("vz_min", "vz_max"), ("az_min", "az_max"),
                       ("at_min", "at_max")):
            if not getattr(self, lo) < getattr(self, hi):
                problems.append(f"need {lo} < {hi}")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class OuterIntegrators:
    I_vz: float = 0.0
    I_vh: np.ndarray = field(default_factory=lambda: np.zeros(3))
    I_vt: float = 0.0
    I_h: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self):
        return OuterIntegrators(self.I_vz, self.I_vh.copy(), self.I_vt, self.I_h.copy())


@dataclass
class SpeedSetpoint:
    """Horizontal speed objective: either a velocity vector or heading+speed.

    With ``mode='velocity'`` only ``v_hor`` (and optionally ``dv_hor``) is
    used; with ``mode='heading'`` the loop regulates the speed to ``speed``
    (airspeed when ``airspeed_ref``) and turns the ground track to ``h_r``.
    """

    mode: str = "velocity"
    vz: float = 0.0
    dvz: float = 0.0
    v_hor: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dv_hor: np.ndarray = field(default_factory=lambda: np.zeros(3))
    h_r: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    dh_r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    speed: float = 0.0
    dspeed: float = 0.0
    airspeed_ref: bool = True


def horizontal(v):
    return np.array([v[0], v[1], 0.0])


def _scalar_integrate(I, err, k_I, limit, raw, lo, hi, dt):
    if abs(I) >= limit and I * err > 0:
        return I
    dI = k_I * err * dt
    # integrator enters the output with a minus sign
    if (raw > hi and -dI > 0) or (raw < lo and -dI < 0):
        return I
    return max(-limit, min(limit, I + dI))


def _vector_integrate(I, err, k_I, limit, raw, raw_sens, cap, dt):
    """``raw_sens`` maps an integrator increment to the change of ``raw``."""
    if np.linalg.norm(I) >= limit and float(I @ err) > 0:
        return I
    dI = k_I * err * dt
    if np.linalg.norm(raw) > cap and float(raw @ raw_sens(dI)) > 0:
        return I
    return sat_norm(I + dI, limit)


def altitude_ctl(z, z_r, dz_r, g):
    """Desired vertical speed (NED, positive down) from the altitude error."""
    return sat_scalar(-g.k_z * (z - z_r) + dz_r, g.vz_min, g.vz_max)


def guidance_tt(r_hor, r_hor_r, dr_hor_r, g):
    """Desired horizontal velocity tracking a horizontal reference point."""
    err = horizontal(r_hor) - horizontal(r_hor_r)
    return sat_norm(-g.k_p * err + horizontal(dr_hor_r), g.vh_max)


def vertical_speed_ctl(v_z, v_z_r, dv_z_r, I, g, dt):
    """Return (a_z_r, I_vz') for the vertical PI speed loop."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    err = v_z - v_z_r
    raw = -g.k_vz * err - I + dv_z_r
    a = sat_scalar(raw, g.az_min, g.az_max)
    return a, _scalar_integrate(I, err, g.kI_vz, g.dI_vz, raw, g.az_min, g.az_max, dt)


def horizontal_velocity_ctl(v_hor, v_hor_r, dv_hor_r, I, g, dt):
    """Return (a_hor_r, I_vh') for the horizontal velocity-tracking PI loop."""
    err = horizontal(v_hor) - horizontal(v_hor_r)
    raw = -g.k_vh * err - I + horizontal(dv_hor_r)
    a = sat_norm(raw, g.ah_max)
    I_new = _vector_integrate(I, err, g.kI_vh, g.dI_vh, raw, lambda d: -d, g.ah_max, dt)
    return a, I_new


def speed_heading_ctl(v, v_a, sp, I_vt, I_h, g, dt):
    """Tangential speed regulation plus lateral heading tracking.

    Returns ``(a_hor_r, I_vt', I_h')``. Requires a horizontal ground speed of
    at least ``V_MIN_HEADING`` so that the heading is defined.
    """
    vh = horizontal(v)
    speed_h = float(np.linalg.norm(vh))
    if speed_h < V_MIN_HEADING:
        raise ValueError("horizontal speed too small for heading mode")
    h = vh / speed_h
    h_r = horizontal(sp.h_r)
    h_r = h_r / np.linalg.norm(h_r)

    if sp.airspeed_ref:
        e_v = float(np.linalg.norm(v_a)) - sp.speed
    else:
        e_v = speed_h - sp.speed
    raw_t = -g.k_t * e_v - I_vt + sp.dspeed
    a_t = sat_scalar(raw_t, g.at_min, g.at_max)
    I_vt = _scalar_integrate(I_vt, e_v, g.kI_t, g.dI_vt, raw_t, g.at_min, g.at_max, dt)

    herr = cross(h, h_r)
    w_hr = g.k_h * herr + I_h + cross(h_r, horizontal(sp.dh_r))
    raw_l = speed_h * cross(w_hr, h)
    a_l = sat_norm(raw_l, g.al_max)
    I_h = _vector_integrate(I_h, herr, g.kI_h, g.dI_h, raw_l,
                            lambda d: speed_h * cross(d, h), g.al_max, dt)
    return a_t * h + a_l, I_vt, I_h


def assemble_acceleration(a_z_r, a_hor_r):
    return a_z_r * E3 + horizontal(a_hor_r)


def accel_bound(g):
    """Largest |a_r| the loops can produce."""
    return math.hypot(g.ah_max, max(abs(g.az_min), abs(g.az_max)))
