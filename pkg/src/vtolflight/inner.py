"""Attitude loop, angular-rate loop and torque allocation.

The attitude loop turns the frame error into a desired angular velocity,
the rate loop turns the rate error into a desired torque M_r, and M_r is
split between the lift rotors (differential thrust) and the control
surfaces with a blending coefficient lambda in [0, 1].
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .geometry import cross, dot, frame_error_vector
from .plant import rotor_matrix, surface_matrix


@dataclass
class InnerGains:
    k_att: tuple = (6.0, 6.0, 1.8)          # roll, pitch, yaw axes, 1/s
    kp_rate: tuple = (11.0, 12.0, 4.75)     # 1/s
    ki_rate: tuple = (10.0, 25.0, 0.15)
    dI_rate: tuple = (3.5, 8.0, 0.5)        # N m
    feedforward: bool = True

    def __post_init__(self):
        for name in ("k_att", "kp_rate", "ki_rate", "dI_rate"):
            setattr(self, name, tuple(float(x) for x in getattr(self, name)))
        if min(self.k_att + self.ki_rate) <= 0 or min(self.dI_rate) < 0:
            raise ValueError("attitude/rate gains must be positive, bounds non-negative")

    def pack(self):
        return np.array(self.k_att + self.kp_rate + self.ki_rate + self.dI_rate)


@dataclass
class AllocationConfig:
    A: np.ndarray
    B: np.ndarray
    rotor_min: float = 0.0
    rotor_max: float = 80.0
    surface_max: float = math.radians(30.0)
    rho: float = 1.2
    v_clamp: float = 4.0       # below this airspeed the surfaces see this speed
    A_inv: np.ndarray = field(init=False, repr=False)
    B_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.A = np.asarray(self.A, float)
        self.B = np.asarray(self.B, float)
        if self.A.shape[0] == self.A.shape[1]:
            if abs(np.linalg.det(self.A)) < 1e-12:
                raise ValueError("rotor matrix A is singular")
            self.A_inv = np.linalg.inv(self.A)
        else:
            # more rotors than rows: right pseudo-inverse
            self.A_inv = self.A.T @ np.linalg.inv(self.A @ self.A.T)
        if abs(np.linalg.det(self.B)) < 1e-15:
            raise ValueError("surface matrix B is singular")
        self.B_inv = np.linalg.inv(self.B)
        if not (self.rotor_max > self.rotor_min >= 0 and self.surface_max > 0):
            raise ValueError("allocation bounds must be positive")

    @classmethod
    def from_params(cls, p, limits=None):
        from .actuators import ActuatorLimits

        limits = limits or ActuatorLimits()
        return cls(rotor_matrix(p), surface_matrix(p), 0.0, limits.rotor_max,
                   limits.surface_max, p.rho)

    @property
    def q_clamp(self):
        return self.rho * self.v_clamp ** 2


@dataclass
class RateIntegrator:
    I: np.ndarray = field(default_factory=lambda: np.zeros(3))


# ----------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def attitude_rate_k(R, Rr, k_att):
    w0 = frame_error_vector(R, Rr)
    out = np.zeros(3)
    for c in range(3):
        ax = R[:, c]
        out += k_att[c] * dot(w0, ax) * ax
    return out


@njit(cache=True)
def reference_rate_k(Rr, Rr_prev, dt):
    """Angular velocity of the reference frame from two samples."""
    dk = (Rr[:, 2] - Rr_prev[:, 2]) / dt
    dj = (Rr[:, 1] - Rr_prev[:, 1]) / dt
    kr = Rr[:, 2]
    return cross(kr, dk) + dot(cross(Rr[:, 1], dj), kr) * kr


@njit(cache=True)
def rate_k(w, w_r, I, J, kp, ki, dI, dt):
    err = w - w_r
    M = np.empty(3)
    I_new = I.copy()
    for n in range(3):
        M[n] = -kp[n] * J[n] * err[n] - I[n]
        if not (abs(I[n]) >= dI[n] and I[n] * err[n] > 0):
            I_new[n] = min(dI[n], max(-dI[n], I[n] + ki[n] * err[n] * dt))
    return M, I_new


@njit(cache=True)
def _shift_interval(base, coll, lo, hi):
    """Interval of c keeping base + c * coll inside [lo, hi]."""
    cmin, cmax = -1e300, 1e300
    for n in range(base.shape[0]):
        if abs(coll[n]) < 1e-15:
            if base[n] < lo[n] - 1e-12 or base[n] > hi[n] + 1e-12:
                return False, 0.0, 0.0
            continue
        a = (lo[n] - base[n]) / coll[n]
        b = (hi[n] - base[n]) / coll[n]
        if a > b:
            a, b = b, a
        cmin = max(cmin, a)
        cmax = min(cmax, b)
    return cmin <= cmax, cmin, cmax


@njit(cache=True)
def desaturate_k(coll_part, diff_part, yaw_part, coll_dir, lo, hi):
    """Bring coll + diff + yaw inside bounds, in priority order.

    Roll/pitch (``diff_part``) are kept by shifting the collective along
    ``coll_dir`` as little as possible; if no shift suffices they are scaled
    down. Yaw is then added with the largest feasible fraction, without
    further collective shift. Returns (vector, modified flag).
    """
    base = coll_part + diff_part
    full = base + yaw_part
    ok, a, b = _shift_interval(full, coll_dir, lo, hi)
    if ok and a <= 0.0 <= b:
        return full, False

    ok, a, b = _shift_interval(base, coll_dir, lo, hi)
    if ok:
        c = min(max(0.0, a), b)
    else:
        klo, khi = 0.0, 1.0
        for _ in range(40):
            k = 0.5 * (klo + khi)
            ok2, _a, _b = _shift_interval(coll_part + k * diff_part, coll_dir, lo, hi)
            if ok2:
                klo = k
            else:
                khi = k
        base = coll_part + klo * diff_part
        ok, a, b = _shift_interval(base, coll_dir, lo, hi)
        c = min(max(0.0, a), b) if ok else 0.0
    base = base + c * coll_dir

    slo, shi = 0.0, 1.0
    ok, a, b = _shift_interval(base + yaw_part, coll_dir * 0.0, lo, hi)
    if ok:
        slo = 1.0
    else:
        for _ in range(40):
            s = 0.5 * (slo + shi)
            ok2, _a, _b = _shift_interval(base + s * yaw_part, coll_dir * 0.0, lo, hi)
            if ok2:
                slo = s
            else:
                shi = s
    out = base + slo * yaw_part
    for n in range(out.shape[0]):
        out[n] = min(hi[n], max(lo[n], out[n]))
    return out, True


@njit(cache=True)
def blend_k(M, lam):
    """Split M into (rotor part, surface part) whose float sum is exactly M.

    The larger share is always the difference M - small share, which lies
    in [M/2, M] and is therefore computed without rounding.
    """
    if lam <= 0.5:
        M_mc = M - lam * M
        M_fw = M - M_mc
    else:
        M_fw = lam * M
        M_mc = M - M_fw
    return M_mc, M_fw


@njit(cache=True)
def allocate_rotors_k(T_mc, M, A_inv, rmin, rmax):
    n = A_inv.shape[0]
    lo = np.full(n, rmin)
    hi = np.full(n, rmax)
    T = max(T_mc, 0.0)
    coll_dir = A_inv[:, 0].copy()
    coll_part = T * coll_dir
    diff = A_inv[:, 1] * M[0] + A_inv[:, 2] * M[1]
    yaw = A_inv[:, 3] * M[2]
    return desaturate_k(coll_part, diff, yaw, coll_dir, lo, hi)


@njit(cache=True)
def allocate_surfaces_k(M, va_norm, B_inv, rho, q_clamp, dmax):
    q = max(rho * va_norm * va_norm, q_clamp)
    n = 3
    lo = np.full(n, -dmax)
    hi = np.full(n, dmax)
    diff = (B_inv[:, 0] * M[0] + B_inv[:, 1] * M[1]) / q
    yaw = B_inv[:, 2] * M[2] / q
    zero = np.zeros(n)
    return desaturate_k(zero, diff, yaw, zero, lo, hi)


@njit(cache=True)
def inner_step_k(R, w_body, Rr, w_ff, I, J, gains, dt, lam, T_mc, T_fw,
                 va_norm, A_inv, B_inv, rmax, pmax, dmax, rho, q_clamp):
    """Attitude + rate loops + allocation for one inner tick.

    Returns (actuator command[8], M_r, I', omega_r body, saturation flag).
    """
    w_r = attitude_rate_k(R, Rr, gains[0:3]) + w_ff
    w_r_b = R.T @ w_r
    M, I_new = rate_k(w_body, w_r_b, I, J, gains[3:6], gains[6:9], gains[9:12], dt)
    M_mc, M_fw = blend_k(M, lam)
    t, f1 = allocate_rotors_k(T_mc, M_mc, A_inv, 0.0, rmax)
    dl, f2 = allocate_surfaces_k(M_fw, va_norm, B_inv, rho, q_clamp, dmax)
    cmd = np.empty(8)
    cmd[0:4] = t
    cmd[4] = min(max(T_fw, 0.0), pmax)
    cmd[5:8] = dl
    return cmd, M, I_new, w_r_b, f1 or f2


# ----------------------------------------------------------------------------
# Python-facing API


def reference_rate(R_r, R_r_prev, dt):
    return reference_rate_k(np.asarray(R_r, float), np.asarray(R_r_prev, float), dt)


def attitude_ctl(R, R_r, R_r_prev, dt, g):
    """Desired angular velocity (inertial) driving frame ``R`` onto ``R_r``.

    The feedforward is the angular velocity of the reference frame, from a
    backward difference between ``R_r_prev`` and ``R_r``; pass ``R_r_prev``
    as None (first sample) or disable ``g.feedforward`` to drop it.
    """
    w = attitude_rate_k(np.asarray(R, float), np.asarray(R_r, float), np.array(g.k_att))
    if g.feedforward and R_r_prev is not None:
        w = w + reference_rate(R_r, R_r_prev, dt)
    return w


def rate_ctl(w, w_r, I, J, g, dt, full=False, M_a=None, dw_r=None):
    """Desired torque (body axes) and the updated rate integrator.

    The default is the reduced law -K J (w - w_r) - I. With ``full=True``
    the gyroscopic term is cancelled and the optional aerodynamic moment
    estimate ``M_a`` and reference acceleration ``dw_r`` are compensated.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    I_vec = I.I if isinstance(I, RateIntegrator) else np.asarray(I, float)
    Jm = np.asarray(J, float)
    Jd = np.diag(Jm) if Jm.ndim == 2 else Jm
    w = np.asarray(w, float)
    M, I_new = rate_k(w, np.asarray(w_r, float), I_vec, Jd, np.array(g.kp_rate),
                      np.array(g.ki_rate), np.array(g.dI_rate), dt)
    if full:
        Jfull = np.diag(Jd)
        M = M + np.cross(w, Jfull @ w)
        if M_a is not None:
            M = M - np.asarray(M_a, float)
        if dw_r is not None:
            M = M + Jfull @ np.asarray(dw_r, float)
    return M, RateIntegrator(I_new) if isinstance(I, RateIntegrator) else I_new


def blend_torque(M_r, lam):
    if not 0.0 <= lam <= 1.0:
        raise ValueError("blending coefficient must lie in [0, 1]")
    return blend_k(np.asarray(M_r, float), float(lam))


def allocate_rotors(T_mc, M_mc, cfg):
    """Rotor thrusts for a collective and a torque; returns (t, saturated)."""
    return allocate_rotors_k(float(T_mc), np.asarray(M_mc, float), cfg.A_inv,
                             cfg.rotor_min, cfg.rotor_max)


def allocate_surfaces(M_fw, v_a, cfg):
    """Surface deflections (rad) for a torque; returns (delta, saturated)."""
    return allocate_surfaces_k(np.asarray(M_fw, float), float(np.linalg.norm(v_a)),
                               cfg.B_inv, cfg.rho, cfg.q_clamp, cfg.surface_max)


def desaturate(coll_part, diff_part, yaw_part, coll_dir, lo, hi):
    """Priority desaturation of an actuator vector split into its parts."""
    arr = [np.asarray(x, float) for x in (coll_part, diff_part, yaw_part, coll_dir)]
    return desaturate_k(*arr, np.asarray(lo, float), np.asarray(hi, float))
