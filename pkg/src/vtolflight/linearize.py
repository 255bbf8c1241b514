"""Trim search and local linearisation of the closed loop.

The closed loop is taken in continuous time: plant, first-order actuators,
all integrators, and the control laws evaluated without sampling (the
reference-rate feedforward is zero at a trim and is left out). The attitude
is perturbed on the rotation group, R = R_trim expm(S(delta)). Coordinates
that no loop regulates (horizontal position outside position hold, altitude
under climb-rate control, integrators of inactive loops) are left out, since
they would only contribute zero eigenvalues.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm
from scipy.optimize import root

from .controller import outer_control
from .geometry import orthonormalize, skew
from .inner import inner_step_k
from .outer import OuterIntegrators
from .plant import VehicleState, _derivative, surface_matrix
from .sim import run_period_k
from .solver import BALANCED, PITCH, THRUST_DIR, SetpointSolver, YAW
from .airdata import estimate_airvelocity
from .transition import Phase, PhaseSetpoints

N_Z = 18 + 8 + 1 + 3 + 1 + 3 + 3
I_ACT, I_VZ, I_VH, I_VT, I_H, I_W = 18, 26, 27, 30, 31, 34
DT_RATE = 1e-3


class TrimError(RuntimeError):
    pass


@dataclass
class LinearModel:
    airspeed: float
    setpoints: PhaseSetpoints
    z_trim: np.ndarray
    A: np.ndarray
    labels: list
    residual: float

    @property
    def eigenvalues(self):
        return np.linalg.eigvals(self.A)

    @property
    def max_real(self):
        return float(np.max(self.eigenvalues.real))


def trim_setpoints(V, s):
    """Setpoints the transition schedule would use around airspeed ``V``."""
    f = s.controller.fsm
    z0 = float(s.mission.start_position[2])
    if V <= 0.0:
        return PhaseSetpoints(Phase.MC, z_r=z0, r_hor_r=np.zeros(3))
    x = np.array([1.0, 0.0, 0.0])
    if V <= 4.0:
        return PhaseSetpoints(Phase.T0, PITCH, theta=f.theta_T0, lam=0.0, vertical="vz",
                              lateral=YAW, speed="velocity", v_hor_r=V * x, aero=True)
    common = dict(lateral=BALANCED, speed="heading", v_a_r=V, h_r=x, aero=True)
    if V <= 8.0:
        return PhaseSetpoints(Phase.T1, PITCH, theta=f.theta_T1, lam=0.0, vertical="vz", **common)
    if V < f.va_FW:
        return PhaseSetpoints(Phase.T3, PITCH, theta=f.theta_T3, lam=1.0, vertical="vz", **common)
    return PhaseSetpoints(Phase.FW, THRUST_DIR, gamma_T=0.0, lam=1.0, vertical="z", z_r=z0,
                          **common)


def _selection(sp):
    """Indices of the tangent coordinates kept, and their labels."""
    idx, lab = [], []
    if sp.speed == "position":
        idx += [0, 1]
        lab += ["x", "y"]
    if sp.vertical == "z":
        idx.append(2)
        lab.append("z")
    idx += [3, 4, 5, 6, 7, 8, 15, 16, 17]
    lab += ["vx", "vy", "vz", "d1", "d2", "d3", "p", "q", "r"]
    idx += list(range(I_ACT, I_ACT + 8))
    lab += [f"act{n}" for n in range(8)]
    idx.append(I_VZ)
    lab.append("I_vz")
    if sp.speed == "heading":
        idx += [I_VT, I_H + 2]
        lab += ["I_vt", "I_h"]
    else:
        idx += [I_VH, I_VH + 1]
        lab += ["I_vh_x", "I_vh_y"]
    idx += [I_W, I_W + 1, I_W + 2]
    lab += ["I_w1", "I_w2", "I_w3"]
    return np.array(idx), lab


class ClosedLoop:
    """Continuous-time closed-loop vector field for fixed setpoints."""

    def __init__(self, s, sp, wind=np.zeros(3), airdata="ideal"):
        if airdata not in ("ideal", "estimated"):
            raise ValueError("airdata must be 'ideal' or 'estimated'")
        self.airdata = airdata
        self.s = s
        self.sp = sp
        cfg = s.controller
        self.cfg = cfg
        self.alloc = cfg.alloc
        self.P = s.plant.pack()
        self.Bsurf = surface_matrix(s.plant)
        self.wind = np.asarray(wind, float)
        self.gains = cfg.inner.pack()
        self.J = np.array(cfg.model.J)
        self.lim = cfg.limits
        self.tau = self.lim.taus

    def field(self, z):
        x = z[0:18]
        R = x[6:15].reshape(3, 3)
        r, v, w = x[0:3], x[3:6], x[15:18]
        act = np.clip(z[I_ACT:I_ACT + 8], self.lim.lower, self.lim.upper)
        ints = OuterIntegrators(float(z[I_VZ]), z[I_VH:I_VH + 3].copy(), float(z[I_VT]),
                                z[I_H:I_H + 3].copy())
        I0 = ints.copy()
        va = v - self.wind
        if self.airdata == "ideal":
            va_c = va
        else:
            va_c = estimate_airvelocity(v, R, float(R[:, 0] @ va), self.cfg.airdata_eps).v_a
        solver = SetpointSolver(self.cfg.solver_model)
        solver.reset_hold(R[:, 1])
        out = outer_control(r, v, R, va_c, self.sp, ints, self.cfg, DT_RATE, solver)
        I_w = z[I_W:I_W + 3]
        lim = self.lim
        cmd, M, I_w_new, _, _ = inner_step_k(
            R.copy(), w.copy(), out.R_r, np.zeros(3), I_w.copy(), self.J, self.gains,
            DT_RATE, self.sp.lam, out.T_mc, out.T_fw, float(np.linalg.norm(va_c)),
            self.alloc.A_inv, self.alloc.B_inv, lim.rotor_max, lim.pusher_max,
            lim.surface_max, self.cfg.model.rho, self.alloc.q_clamp)
        dz = np.zeros(N_Z)
        dz[0:18] = _derivative(x, act, self.P, self.Bsurf, self.wind)
        dz[I_ACT:I_ACT + 8] = (cmd - z[I_ACT:I_ACT + 8]) / self.tau
        dz[I_VZ] = (ints.I_vz - I0.I_vz) / DT_RATE
        dz[I_VH:I_VH + 3] = (ints.I_vh - I0.I_vh) / DT_RATE
        dz[I_VT] = (ints.I_vt - I0.I_vt) / DT_RATE
        dz[I_H:I_H + 3] = (ints.I_h - I0.I_h) / DT_RATE
        dz[I_W:I_W + 3] = (I_w_new - I_w) / DT_RATE
        return dz

    # tangent-space parametrisation around a base point
    def retract(self, z0, xi, idx):
        z = z0.copy()
        d = np.zeros(3)
        for k, n in enumerate(idx):
            if 6 <= n <= 8:
                d[n - 6] = xi[k]
            else:
                z[n] += xi[k]
        R0 = z0[6:15].reshape(3, 3)
        z[6:15] = (R0 @ expm(skew(d))).reshape(9)
        return z

    def reduced(self, z, idx):
        """Tangent derivative of the kept coordinates at ``z``."""
        dz = self.field(z)
        out = dz[idx].copy()
        # attitude coordinates move with the body rate (exact at a trim)
        for k, n in enumerate(idx):
            if 6 <= n <= 8:
                out[k] = z[15 + n - 6]
        return out


def _guess(s, sp, V):
    st = VehicleState.level(r=(0.0, 0.0, float(s.mission.start_position[2])),
                            v=(V, 0.0, 0.0))
    z = np.zeros(N_Z)
    z[0:18] = st.to_array()
    z[I_ACT:I_ACT + 4] = s.controller.alloc.A_inv @ np.array([s.plant.m * s.plant.g0, 0, 0, 0])
    return z


def _settle(s, sp, z, airdata, duration=40.0):
    """Run the sampled closed loop with fixed setpoints to near steady state."""
    cfg, lim = s.controller, s.controller.limits
    alloc = cfg.alloc
    P, Bsurf = s.plant.pack(), surface_matrix(s.plant)
    n_plant, n_inner = s.steps
    alpha = lim.lag_gains(s.dt_plant)
    x, act = z[0:18].copy(), z[I_ACT:I_ACT + 8].copy()
    ints = OuterIntegrators()
    I_w = np.zeros(3)
    solver = SetpointSolver(cfg.solver_model)
    solver.reset_hold(x[6:15].reshape(3, 3)[:, 1])
    gains, J = cfg.inner.pack(), np.array(cfg.model.J)
    for _ in range(int(duration / s.dt_ctl)):
        R = x[6:15].reshape(3, 3)
        va = x[3:6]
        if airdata == "estimated":
            va = estimate_airvelocity(x[3:6], R, float(R[:, 0] @ va), cfg.airdata_eps).v_a
        out = outer_control(x[0:3].copy(), x[3:6].copy(), R.copy(), va, sp, ints, cfg,
                            s.dt_ctl, solver)
        x, act, I_w, _, _ = run_period_k(
            x, act, out.R_r, np.zeros(3), I_w, J, gains, sp.lam, out.T_mc, out.T_fw,
            float(np.linalg.norm(va)), alloc.A_inv, alloc.B_inv, lim.rotor_max,
            lim.pusher_max, lim.surface_max, cfg.model.rho, alloc.q_clamp, P, Bsurf,
            np.zeros(3), s.dt_plant, n_plant, n_inner, alpha, lim.lower, lim.upper)
        if not np.all(np.isfinite(x)) or np.abs(x[15:18]).max() > 50:
            return None
    z = np.zeros(N_Z)
    z[0:18] = x
    z[I_ACT:I_ACT + 8] = act
    z[I_VZ], z[I_VH:I_VH + 3], z[I_VT], z[I_H:I_H + 3] = ints.I_vz, ints.I_vh, ints.I_vt, ints.I_h
    z[I_W:I_W + 3] = I_w
    return z


def find_trim(s, V, tol=1e-8, airdata="ideal"):
    """Closed-loop equilibrium at airspeed ``V`` (no wind). Returns (z, setpoints).

    The sampled loop is first run to near steady state, then the continuous
    equilibrium is polished with a Newton-type root finder. The equilibrium
    does not depend on the loop gains, so if the given gains do not settle
    (an unstable variant) the default gains are used to get there.
    """
    from .inner import InnerGains
    from .outer import OuterGains

    sp = trim_setpoints(V, s)
    cl = ClosedLoop(s, sp, airdata=airdata)
    idx, _ = _selection(sp)
    tame = replace(s, controller=replace(s.controller, inner=InnerGains(), outer=OuterGains()))
    res = float("inf")
    for runner in (s, tame):
        base = _settle(runner, sp, _guess(s, sp, V), airdata)
        if base is None:
            continue
        for _ in range(5):
            sol = root(lambda xi: cl.reduced(cl.retract(base, xi, idx), idx),
                       np.zeros(len(idx)), method="hybr", options={"xtol": 1e-13})
            base = cl.retract(base, sol.x, idx)
            base[6:15] = orthonormalize(base[6:15].reshape(3, 3)).reshape(9)
            res = float(np.linalg.norm(cl.reduced(base, idx)))
            if res < tol:
                return base, sp
    raise TrimError(f"no trim found at {V} m/s (residual {res:.2e})")


def linearize_closed_loop(s, V, h=1e-6, airdata="ideal"):
    """Linear model (Jacobian of the kept coordinates) at the trim for ``V``.

    With ``airdata='ideal'`` the controller is fed the true air velocity.
    With ``'estimated'`` it gets the pitot/attitude estimate, which assumes
    zero sideslip: sideslip is then invisible to the controller and balanced
    flight trims come with a neutral (zero-eigenvalue) sideslip mode.
    """
    z, sp = find_trim(s, V, airdata=airdata)
    cl = ClosedLoop(s, sp, airdata=airdata)
    idx, labels = _selection(sp)
    n = len(idx)
    A = np.zeros((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        A[:, k] = (cl.reduced(cl.retract(z, e, idx), idx)
                   - cl.reduced(cl.retract(z, -e, idx), idx)) / (2 * h)
    res = float(np.linalg.norm(cl.reduced(z, idx)))
    return LinearModel(V, sp, z, A, labels, res)


def parse_sweep(text):
    """'lo:step:hi' -> list of airspeeds, hi included."""
    try:
        lo, step, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise ValueError(f"sweep {text!r} is not of the form lo:step:hi") from None
    if step <= 0 or hi < lo:
        raise ValueError("sweep needs step > 0 and hi >= lo")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + k * step, 10) for k in range(n + 1)]


def stability_sweep(s, speeds, airdata="ideal"):
    return [linearize_closed_loop(s, V, airdata=airdata) for V in speeds]
