"""Rigid-body 6-DOF model of the compound VTOL.

The state is integrated with fixed-step RK4. Forces are gravity, the bounded
aerodynamic force model (drag/lift through the zero-lift axes), the lift-rotor
collective along -k and the pusher along +i. Torques come from the rotor
mixing matrix, the control surfaces and a passive aerodynamic moment.

The numerical kernels take a packed parameter vector (see
:meth:`VehicleParams.pack`) so they can run compiled.
"""

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
from numba import njit

from .geometry import cross, dot, frame_from_euler, norm, orthonormalize

DEG = math.pi / 180.0

# indices into the packed parameter vector
(P_M, P_G0, P_RHO, P_S, P_B, P_C, P_C0, P_C0BAR, P_C0BB, P_ALPHA0,
 P_JXX, P_JYY, P_JZZ, P_D, P_E, P_F, P_ETA,
 P_CL_DA, P_CL_DREL, P_CL_DRER, P_CM_DA, P_CM_DREL, P_CM_DRER,
 P_CN_DA, P_CN_DREL, P_CN_DRER,
 P_CM_ALPHA, P_ALPHA_REF, P_CN_BETA, P_CL_BETA, P_CL_P, P_CM_Q, P_CN_R) = range(33)
N_PARAMS = 33


class DivergenceError(RuntimeError):
    """Raised when the simulated state stops being finite."""


@dataclass
class VehicleParams:
    # model parameters
    m: float = 17.5
    g0: float = 9.81
    rho: float = 1.2
    S: float = 0.868
    b: float = 3.2
    c: float = 0.3
    c0: float = 0.074
    c0bar: float = 5.074
    c0bb: float = 0.5        # side-force coefficient, not tabulated; plant only
    alpha0: float = 0.0791
    J: tuple = (0.87, 1.11, 1.84)
    # rotor geometry and power/thrust ratio
    d: float = 0.55
    e: float = 0.55
    f: float = 0.025
    eta: float = 0.021
    # control derivatives, per degree of deflection
    Cl_da: float = 0.002
    Cl_drel: float = 0.0
    Cl_drer: float = 0.0
    Cm_da: float = 0.0
    Cm_drel: float = 0.006
    Cm_drer: float = 0.006
    Cn_da: float = 0.0
    Cn_drel: float = -0.0018
    Cn_drer: float = 0.0018
    # passive moment model (per radian)
    Cm_alpha: float = 0.3
    alpha_ref: float = 0.0
    Cn_beta: float = 0.05
    Cl_beta: float = 0.03
    Cl_p: float = 0.25
    Cm_q: float = 6.0
    Cn_r: float = 0.12

    def __post_init__(self):
        self.J = tuple(float(x) for x in self.J)
        problems = []
        if self.m <= 0:
            problems.append("m must be positive")
        if min(self.J) <= 0:
            problems.append("J must be positive definite")
        for name in ("rho", "S", "b", "c", "d", "e", "eta"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if not self.c0bar > self.c0 >= 0:
            problems.append("need c0bar > c0 >= 0")
        if self.c0bb < 0 or self.f < 0:
            problems.append("c0bb and f must be non-negative")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def inertia(self):
        return np.diag(self.J)

    def pack(self):
        vals = [self.m, self.g0, self.rho, self.S, self.b, self.c, self.c0,
                self.c0bar, self.c0bb, self.alpha0, *self.J, self.d, self.e,
                self.f, self.eta, self.Cl_da, self.Cl_drel, self.Cl_drer,
                self.Cm_da, self.Cm_drel, self.Cm_drer, self.Cn_da,
                self.Cn_drel, self.Cn_drer, self.Cm_alpha, self.alpha_ref,
                self.Cn_beta, self.Cl_beta, self.Cl_p, self.Cm_q, self.Cn_r]
        return np.array(vals, dtype=float)

    def with_(self, **kw):
        return replace(self, **kw)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class VehicleState:
    r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def to_array(self):
        return np.concatenate((self.r, self.v, self.R.reshape(9), self.omega))

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[0:3].copy(), x[3:6].copy(), x[6:15].reshape(3, 3).copy(),
                   x[15:18].copy())

    @classmethod
    def level(cls, r=(0.0, 0.0, 0.0), v=(0.0, 0.0, 0.0), yaw=0.0, pitch=0.0):
        return cls(np.array(r, float), np.array(v, float),
                   frame_from_euler(0.0, pitch, yaw), np.zeros(3))


@dataclass
class Environment:
    """Steady wind (inertial, m/s) plus an optional seeded gust field."""

    wind: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gust_amplitude: float = 0.0
    gust_seed: int = 0

    def __post_init__(self):
        self.wind = np.asarray(self.wind, dtype=float)
        if not np.all(np.isfinite(self.wind)):
            raise ValueError("wind must be finite")
        rng = np.random.default_rng(self.gust_seed)
        # a few horizontal sinusoids, periods between 2 and 20 s
        self._freq = 2 * np.pi / rng.uniform(2.0, 20.0, size=(4, 2))
        self._phase = rng.uniform(0, 2 * np.pi, size=(4, 2))

    def wind_at(self, t):
        if self.gust_amplitude == 0.0:
            return self.wind
        g = np.sin(self._freq * t + self._phase).sum(axis=0) / 2.0
        return self.wind + self.gust_amplitude * np.array([g[0], g[1], 0.0])


# ----------------------------------------------------------------------------
# force and torque models


@njit(cache=True)
def zero_lift_axes(R, alpha0):
    ca, sa = math.cos(alpha0), math.sin(alpha0)
    i2 = ca * R[:, 0] - sa * R[:, 2]
    k2 = sa * R[:, 0] + ca * R[:, 2]
    return i2, k2


@njit(cache=True)
def aero_force_k(va, R, rho, S, c0, c0bar, c0bb, alpha0):
    i2, k2 = zero_lift_axes(R, alpha0)
    j = R[:, 1]
    q = 0.5 * rho * S * norm(va)
    return -q * (c0 * dot(va, i2) * i2 + c0bb * dot(va, j) * j
                 + c0bar * dot(va, k2) * k2)


def aero_force(va, R, p):
    """Aerodynamic force (N, inertial) for air velocity ``va`` (inertial)."""
    return aero_force_k(np.asarray(va, float), np.asarray(R, float), p.rho,
                        p.S, p.c0, p.c0bar, p.c0bb, p.alpha0)


@njit(cache=True)
def thrust_force_k(t_mc, t_push, R):
    return -t_mc * R[:, 2] + t_push * R[:, 0]


def thrust_force(t_mc, t_push, R):
    """Lift-rotor collective pulls along -k, the pusher along +i."""
    if t_mc < 0 or t_push < 0:
        raise ValueError("thrust magnitudes must be non-negative")
    return thrust_force_k(float(t_mc), float(t_push), np.asarray(R, float))


@njit(cache=True)
def aero_torque_k(omega, va_b, P):
    """Passive aerodynamic moment, body axes.

    Pitch stiffness about the reference incidence, weathervane yaw and
    dihedral roll from sideslip, and rate damping. The static part scales
    with |va|^2, the damping with |va|.
    """
    V = norm(va_b)
    rho, S, b, c = P[P_RHO], P[P_S], P[P_B], P[P_C]
    a = P[P_ALPHA0] - P[P_ALPHA_REF]
    # body-axis component normal to the zero-moment line
    vn = math.sin(a) * va_b[0] + math.cos(a) * va_b[2]
    qs = 0.5 * rho * S * V
    out = np.empty(3)
    out[0] = -qs * b * P[P_CL_BETA] * va_b[1]
    out[1] = -qs * c * P[P_CM_ALPHA] * vn
    out[2] = qs * b * P[P_CN_BETA] * va_b[1]
    damp = 0.25 * rho * S * V
    out[0] -= damp * b * b * P[P_CL_P] * omega[0]
    out[1] -= damp * c * c * P[P_CM_Q] * omega[1]
    out[2] -= damp * b * b * P[P_CN_R] * omega[2]
    return out


def aero_torque(omega, va_body, p):
    return aero_torque_k(np.asarray(omega, float), np.asarray(va_body, float),
                         p.pack())


def rotor_matrix(p):
    """4x4 map from rotor thrusts to (collective, roll, pitch, yaw torque)."""
    d, e, f, eta = p.d, p.e, p.f, p.eta
    return np.array([
        [1.0, 1.0, 1.0, 1.0],
        [d, -d, d, -d],
        [e - f, -e - f, -e - f, e - f],
        [eta, eta, -eta, -eta],
    ])


def surface_matrix(p):
    """Matrix B with M_surf = rho |va|^2 B delta, delta in radians."""
    Bdeg = 0.5 * p.S * np.array([
        [p.b * p.Cl_da, p.b * p.Cl_drel, p.b * p.Cl_drer],
        [p.c * p.Cm_da, p.c * p.Cm_drel, p.c * p.Cm_drer],
        [p.b * p.Cn_da, p.b * p.Cn_drel, p.b * p.Cn_drer],
    ])
    return Bdeg / DEG


@njit(cache=True)
def _rotor_torque(t, P):
    d, e, f, eta = P[P_D], P[P_E], P[P_F], P[P_ETA]
    out = np.empty(3)
    out[0] = d * (t[0] - t[1] + t[2] - t[3])
    out[1] = (e - f) * t[0] + (-e - f) * t[1] + (-e - f) * t[2] + (e - f) * t[3]
    out[2] = eta * (t[0] + t[1] - t[2] - t[3])
    return out


@njit(cache=True)
def _derivative(x, act, P, Bsurf, wind):
    R = x[6:15].reshape(3, 3)
    v = x[3:6]
    w = x[15:18]
    va = v - wind
    m = P[P_M]
    Fa = aero_force_k(va, R, P[P_RHO], P[P_S], P[P_C0], P[P_C0BAR],
                      P[P_C0BB], P[P_ALPHA0])
    T = thrust_force_k(act[0] + act[1] + act[2] + act[3], act[4], R)
    dx = np.empty(18)
    dx[0:3] = v
    dx[3:6] = (Fa + T) / m
    dx[5] += P[P_G0]
    # dR/dt = R S(w_body)
    Rd = np.empty((3, 3))
    for c in range(3):
        Rd[c, 0] = R[c, 1] * w[2] - R[c, 2] * w[1]
        Rd[c, 1] = R[c, 2] * w[0] - R[c, 0] * w[2]
        Rd[c, 2] = R[c, 0] * w[1] - R[c, 1] * w[0]
    dx[6:15] = Rd.reshape(9)
    va_b = R.T @ va
    M = _rotor_torque(act[0:4], P) + aero_torque_k(w, va_b, P)
    M += dot(va, va) * P[P_RHO] * (Bsurf @ act[5:8])
    Jd = np.array([P[P_JXX], P[P_JYY], P[P_JZZ]])
    Jw = Jd * w
    dx[15:18] = (M - cross(w, Jw)) / Jd
    return dx


@njit(cache=True)
def rk4_step(x, act, P, Bsurf, wind, dt):
    k1 = _derivative(x, act, P, Bsurf, wind)
    k2 = _derivative(x + 0.5 * dt * k1, act, P, Bsurf, wind)
    k3 = _derivative(x + 0.5 * dt * k2, act, P, Bsurf, wind)
    k4 = _derivative(x + dt * k3, act, P, Bsurf, wind)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    R = orthonormalize(out[6:15].reshape(3, 3))
    out[6:15] = R.reshape(9)
    return out


@njit(cache=True)
def _lag_and_clamp(act, cmd, alpha, lo, hi):
    out = act + alpha * (cmd - act)
    for n in range(out.shape[0]):
        if out[n] < lo[n]:
            out[n] = lo[n]
        elif out[n] > hi[n]:
            out[n] = hi[n]
    return out


@njit(cache=True)
def advance(x, act, cmd, P, Bsurf, wind, dt, n_steps, alpha, lo, hi):
    """Run ``n_steps`` plant steps: actuator lag update then one RK4 step."""
    for _ in range(n_steps):
        act = _lag_and_clamp(act, cmd, alpha, lo, hi)
        x = rk4_step(x, act, P, Bsurf, wind, dt)
    return x, act


def derivative(state, act, p, env_wind=np.zeros(3)):
    """State derivative as a flat array (r, v, R row-major, omega)."""
    return _derivative(state.to_array(), np.asarray(act, float), p.pack(),
                       surface_matrix(p), np.asarray(env_wind, float))


def plant_step(state, actuators, env, p, dt, t=0.0):
    """Advance the rigid body by one RK4 step with actuators held."""
    if not 0.0 < dt <= 0.02:
        raise ValueError("dt must lie in (0, 0.02]")
    act = actuators.realized if hasattr(actuators, "realized") else np.asarray(actuators, float)
    x = rk4_step(state.to_array(), act, p.pack(), surface_matrix(p),
                 np.asarray(env.wind_at(t), float), dt)
    if not np.all(np.isfinite(x)):
        raise DivergenceError("non-finite plant state")
    return VehicleState.from_array(x)
