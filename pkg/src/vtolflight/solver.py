"""Attitude and thrust setpoints from a desired acceleration.

Given a_r, the air velocity and either an imposed thrust direction or an
imposed pitch angle, find the reference frame (i_r, j_r, k_r) and thrust
(|T_r|, gamma_T) such that gravity + aerodynamic force + thrust produce a_r
under the bounded aerodynamic model. The lateral axis j_r comes either from
a yaw reference or from the balanced-flight (zero sideslip) condition.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .geometry import E2, E3, cross, dot, norm, unit_or_hold

THRUST_DIR = 0
PITCH = 1
YAW = 0
BALANCED = 1

EPS_SING = 1e-6
FLAG_HELD = 1
FLAG_CLAMPED = 2


@dataclass
class SolverModel:
    """The controller's view of the vehicle (may differ from the plant)."""

    m: float = 17.5
    g0: float = 9.81
    rho: float = 1.2
    S: float = 0.868
    c0: float = 0.074
    c0bar: float = 5.074
    alpha0: float = 0.0791

    @classmethod
    def from_params(cls, p):
        return cls(p.m, p.g0, p.rho, p.S, p.c0, p.c0bar, p.alpha0)


@dataclass
class SolverInput:
    a_r: np.ndarray
    v_a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mode: int = THRUST_DIR
    gamma_T: float = -math.pi / 2   # used with THRUST_DIR
    theta: float = 0.0              # used with PITCH
    lateral: int = YAW
    psi: float = 0.0                # used with YAW
    aero: bool = True


@dataclass
class SolverOutput:
    R: np.ndarray
    T_norm: float
    gamma_T: float
    T_mc: float
    T_fw: float
    gamma: float
    flags: int = 0

    @property
    def clamped(self):
        return bool(self.flags & FLAG_CLAMPED)

    @property
    def held(self):
        return bool(self.flags & FLAG_HELD)


@njit(cache=True)
def wrap_pi(x):
    """Wrap an angle to [-pi, pi)."""
    return (x + math.pi) % (2.0 * math.pi) - math.pi


@njit(cache=True)
def intermediate_vectors_k(a_r, va, m, g0, rho, S, c0, c0bar):
    ap = a_r.copy()
    ap[2] -= g0
    q = 0.5 * rho * S * norm(va)
    d = m * ap + q * c0 * va
    e = m * ap + q * c0bar * va
    return ap, d, e


@njit(cache=True)
def lateral_axis_k(lateral, psi, ap, va, j_prev):
    if lateral == YAW:
        h = np.array([math.cos(psi), math.sin(psi), 0.0])
        w = cross(h, ap)
    else:
        w = cross(va, ap)
    j, held = unit_or_hold(w, j_prev, EPS_SING)
    if held:
        # keep the held axis orthogonal to a'
        na = norm(ap)
        if na > 0.0:
            u = ap / na
            j = j - dot(j, u) * u
            nj = norm(j)
            if nj > 1e-9:
                j = j / nj
            else:
                j = cross(u, E3)
                if norm(j) < 1e-9:
                    j = E2.copy()
                j = j / norm(j)
    return j, held


@njit(cache=True)
def thrust_norm_k(d, e, i_r, k_r, gamma_T, alpha0):
    ct, st = math.cos(gamma_T + alpha0), math.sin(gamma_T + alpha0)
    ca, sa = math.cos(alpha0), math.sin(alpha0)
    return (ct * ca * dot(d, i_r) - ct * sa * dot(d, k_r)
            + st * sa * dot(e, i_r) + st * ca * dot(e, k_r))


@njit(cache=True)
def solve_thrust_dir_k(ap, d, e, j_r, gamma_T, alpha0):
    na = norm(ap)
    if na < 1e-9:
        raise ValueError("apparent acceleration vanishes")
    app = cross(ap, j_r)
    nap = norm(app)
    st, ct = math.sin(gamma_T + alpha0), math.cos(gamma_T + alpha0)
    y = st * dot(d, ap) - ct * dot(e, app)
    x = ct * dot(e, ap) + st * dot(d, app)
    gamma = wrap_pi(math.atan2(y, x) - alpha0)
    k_r = math.sin(gamma) * ap / na + math.cos(gamma) * app / nap
    i_r = cross(j_r, k_r)
    R = np.empty((3, 3))
    R[:, 0] = i_r
    R[:, 1] = j_r
    R[:, 2] = k_r
    return R, gamma


@njit(cache=True)
def solve_pitch_k(d, e, j_r, theta, alpha0):
    w = cross(j_r, E3)
    nw = norm(w)
    if nw < 1e-9:
        raise ValueError("lateral axis is vertical")
    eta = w / nw
    w2 = cross(j_r, eta)
    eta_p = w2 / norm(w2)
    i_r = math.cos(theta) * eta + math.sin(theta) * eta_p
    k_r = cross(i_r, j_r)
    ca, sa = math.cos(alpha0), math.sin(alpha0)
    yp = sa * dot(e, i_r) + ca * dot(e, k_r)
    xp = ca * dot(d, i_r) - sa * dot(d, k_r)
    gamma_T = wrap_pi(math.atan2(yp, xp) - alpha0)
    R = np.empty((3, 3))
    R[:, 0] = i_r
    R[:, 1] = j_r
    R[:, 2] = k_r
    return R, gamma_T


@njit(cache=True)
def solve_k(a_r, va, mode, angle, lateral, psi, j_prev, m, g0, rho, S, c0,
            c0bar, alpha0):
    """Compiled solver. Returns (R_r, |T_r|, gamma_T, gamma, flags)."""
    ap, d, e = intermediate_vectors_k(a_r, va, m, g0, rho, S, c0, c0bar)
    j_r, held = lateral_axis_k(lateral, psi, ap, va, j_prev)
    flags = FLAG_HELD if held else 0
    if mode == THRUST_DIR:
        gamma_T = angle
        R, gamma = solve_thrust_dir_k(ap, d, e, j_r, gamma_T, alpha0)
    else:
        R, gamma_T = solve_pitch_k(d, e, j_r, angle, alpha0)
        # tilt of i_r away from a'/|a'| about j_r, for diagnostics
        u = ap / norm(ap)
        gamma = math.atan2(-dot(R[:, 0], cross(ap, j_r)) / norm(ap), dot(R[:, 0], u))
    T = thrust_norm_k(d, e, R[:, 0], R[:, 2], gamma_T, alpha0)
    if T < 0.0:
        T = 0.0
        flags |= FLAG_CLAMPED
    return R, T, gamma_T, gamma, flags


# ----------------------------------------------------------------------------
# Python-facing API


def intermediate_vectors(a_r, v_a, model):
    """Return (a', d, e)."""
    return intermediate_vectors_k(np.asarray(a_r, float), np.asarray(v_a, float),
                                  model.m, model.g0, model.rho, model.S,
                                  model.c0, model.c0bar)


def lateral_axis(inp, a_p, j_prev=E2):
    j, _ = lateral_axis_k(inp.lateral, inp.psi, np.asarray(a_p, float),
                          np.asarray(inp.v_a, float), np.asarray(j_prev, float))
    return j


def thrust_norm(d, e, i_r, k_r, gamma_T, alpha0):
    return thrust_norm_k(np.asarray(d, float), np.asarray(e, float),
                         np.asarray(i_r, float), np.asarray(k_r, float),
                         float(gamma_T), float(alpha0))


def split_thrust(T_norm, gamma_T):
    """(lift-rotor collective, pusher) components; negative means infeasible."""
    return -T_norm * math.sin(gamma_T), T_norm * math.cos(gamma_T)


def _output(R, T, gamma_T, gamma, flags):
    T_mc, T_fw = split_thrust(T, gamma_T)
    return SolverOutput(R, float(T), float(gamma_T), T_mc, T_fw, float(gamma), int(flags))


def solve_imposed_thrust_dir(a_p, d, e, j_r, gamma_T, alpha0):
    a_p, d, e, j_r = (np.asarray(x, float) for x in (a_p, d, e, j_r))
    R, gamma = solve_thrust_dir_k(a_p, d, e, j_r, float(gamma_T), float(alpha0))
    T = thrust_norm_k(d, e, R[:, 0], R[:, 2], gamma_T, alpha0)
    flags = 0
    if T < 0:
        T, flags = 0.0, FLAG_CLAMPED
    return _output(R, T, gamma_T, gamma, flags)


def solve_imposed_pitch(a_p, d, e, j_r, theta, alpha0):
    d, e, j_r = (np.asarray(x, float) for x in (d, e, j_r))
    R, gamma_T = solve_pitch_k(d, e, j_r, float(theta), float(alpha0))
    T = thrust_norm_k(d, e, R[:, 0], R[:, 2], gamma_T, alpha0)
    a_p = np.asarray(a_p, float)
    u = a_p / np.linalg.norm(a_p)
    gamma = math.atan2(-float(R[:, 0] @ cross(a_p, j_r)) / np.linalg.norm(a_p),
                       float(R[:, 0] @ u))
    return _output(R, max(T, 0.0), gamma_T, gamma, FLAG_CLAMPED if T < 0 else 0)


def solve(inp, model, j_prev=E2):
    """One-shot solve of a :class:`SolverInput`."""
    model = model if inp.aero else _no_aero(model)
    angle = inp.gamma_T if inp.mode == THRUST_DIR else inp.theta
    R, T, gT, g, flags = solve_k(np.asarray(inp.a_r, float), np.asarray(inp.v_a, float),
                                 inp.mode, float(angle), inp.lateral, float(inp.psi),
                                 np.asarray(j_prev, float), model.m, model.g0,
                                 model.rho, model.S, model.c0, model.c0bar,
                                 model.alpha0)
    return _output(R, T, gT, g, flags)


def _no_aero(model):
    return SolverModel(model.m, model.g0, model.rho, model.S, 0.0, 0.0, model.alpha0)


class SetpointSolver:
    """Solver with the last-good j_r held across calls for singular inputs.

    Call :meth:`reset_hold` with the current body j axis whenever the lateral
    mode changes.
    """

    def __init__(self, model):
        self.model = model
        self.j_prev = E2.copy()

    def reset_hold(self, j):
        self.j_prev = np.asarray(j, float).copy()

    def __call__(self, inp):
        out = solve(inp, self.model, self.j_prev)
        self.j_prev = out.R[:, 1].copy()
        return out


def force_residual(out, a_r, v_a, model, c0bb=0.0):
    """|a' - (F_a + T_r)/m| for a solver output, using the controller model."""
    from .plant import aero_force_k

    a_p = np.asarray(a_r, float) - model.g0 * E3
    Fa = aero_force_k(np.asarray(v_a, float), out.R, model.rho, model.S,
                      model.c0, model.c0bar, c0bb, model.alpha0)
    ca, sa = math.cos(model.alpha0), math.sin(model.alpha0)
    i2 = ca * out.R[:, 0] - sa * out.R[:, 2]
    k2 = sa * out.R[:, 0] + ca * out.R[:, 2]
    g = out.gamma_T + model.alpha0
    T = out.T_norm * (math.cos(g) * i2 + math.sin(g) * k2)
    return float(np.linalg.norm(a_p - (Fa + T) / model.m))
