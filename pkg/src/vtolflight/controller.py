"""Flight controller assembly: FSM, outer loops, setpoint solver, inner loops.

The outer part (automaton, position/speed loops, solver) runs at the outer
rate and produces the reference frame, the thrust split and lambda. The
inner part (attitude, rate, allocation) is a compiled kernel run by the
simulation at the inner rate.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import outer as ol
from .actuators import ActuatorLimits
from .airdata import EPS_AIRDATA, estimate_airvelocity
from .geometry import euler_from_frame
from .inner import AllocationConfig, InnerGains, reference_rate
from .plant import VehicleParams
from .solver import BALANCED, FLAG_CLAMPED, SetpointSolver, SolverInput, SolverModel, THRUST_DIR
from .transition import Event, FsmConfig, Phase, Tracked, fsm_step, initial_state


@dataclass
class ControllerConfig:
    model: VehicleParams = field(default_factory=VehicleParams)
    outer: ol.OuterGains = field(default_factory=ol.OuterGains)
    inner: InnerGains = field(default_factory=InnerGains)
    fsm: FsmConfig = field(default_factory=FsmConfig)
    limits: ActuatorLimits = field(default_factory=ActuatorLimits)
    aero_in_mc: bool = False
    airdata_eps: float = EPS_AIRDATA

    @property
    def solver_model(self):
        return SolverModel.from_params(self.model)

    @property
    def alloc(self):
        return AllocationConfig.from_params(self.model, self.limits)


@dataclass
class OuterOutput:
    a_r: np.ndarray
    R_r: np.ndarray
    T_norm: float
    gamma_T: float
    T_mc_raw: float        # signed solver split
    T_fw_raw: float
    T_mc: float            # after clamping to what the actuators can do
    T_fw: float
    flags: int
    v_a_est: np.ndarray
    vz_r: float
    v_hor_r: np.ndarray


def _heading_speed_ok(v):
    return math.hypot(v[0], v[1]) >= ol.V_MIN_HEADING


def outer_control(r, v, R, v_a_est, sp, ints, cfg, dt, solver):
    """One evaluation of the outer loops and the setpoint solver.

    ``ints`` is updated in place. ``solver`` carries the held lateral axis.
    """
    g = cfg.outer
    if sp.vertical == "z":
        vz_r = ol.altitude_ctl(r[2], sp.z_r, 0.0, g)
    else:
        vz_r = sp.vz_r
    a_z, ints.I_vz = ol.vertical_speed_ctl(v[2], vz_r, 0.0, ints.I_vz, g, dt)

    v_hor_r = np.zeros(3)
    if sp.speed == "heading" and _heading_speed_ok(v):
        spd = ol.SpeedSetpoint("heading", h_r=sp.h_r, dh_r=sp.dh_r, speed=sp.v_a_r,
                               dspeed=sp.dv_a_r, airspeed_ref=True)
        a_h, ints.I_vt, ints.I_h = ol.speed_heading_ctl(v, v_a_est, spd, ints.I_vt,
                                                        ints.I_h, g, dt)
        v_hor_r = sp.v_a_r * sp.h_r
    else:
        dv = sp.dv_hor_r
        if sp.speed == "position":
            v_hor_r = ol.guidance_tt(r, sp.r_hor_r, np.zeros(3), g)
        elif sp.speed == "velocity":
            v_hor_r = sp.v_hor_r
        else:
            # too slow for the heading loop: push along the heading
            v_hor_r = max(sp.v_a_r, ol.V_MIN_HEADING) * sp.h_r
        a_h, ints.I_vh = ol.horizontal_velocity_ctl(v, v_hor_r, dv, ints.I_vh, g, dt)
    a_r = ol.assemble_acceleration(a_z, a_h)

    aero = sp.aero and (cfg.aero_in_mc or sp.phase is not Phase.MC)
    angle = sp.gamma_T if sp.thrust_mode == THRUST_DIR else sp.theta
    out = solver(SolverInput(a_r, v_a_est, sp.thrust_mode, angle, angle, sp.lateral,
                             sp.psi_r, aero))
    T_mc = min(max(out.T_mc, 0.0), 4.0 * cfg.limits.rotor_max)
    T_fw = min(max(out.T_fw, 0.0), cfg.limits.pusher_max)
    return OuterOutput(a_r, out.R, out.T_norm, out.gamma_T, out.T_mc, out.T_fw, T_mc,
                       T_fw, out.flags, v_a_est, vz_r, v_hor_r)


class FlightController:
    """Stateful outer-rate controller.

    Holds the automaton, the outer integrators, the solver's held lateral
    axis and the previous reference frame used for the angular-velocity
    feedforward. The inner-loop integrator lives here as well, but is
    advanced by the inner kernel.
    """

    def __init__(self, cfg, dt):
        self.cfg = cfg
        self.dt = dt
        self.fsm = None
        self.ints = ol.OuterIntegrators()
        self.I_w = np.zeros(3)
        self.solver = SetpointSolver(cfg.solver_model)
        self.R_r = np.eye(3)
        self.R_r_prev = None
        self.w_ff = np.zeros(3)
        self.lam = 0.0
        self.sp = None
        self.out = None
        self._lateral = None
        self._speed = None

    def tracked(self, r, v, R, airspeed):
        return Tracked(r, v, airspeed, euler_from_frame(R)[2])

    def reset(self, r, v, R):
        self.fsm = initial_state(self.tracked(r, v, R, 0.0))
        self.solver.reset_hold(R[:, 1])
        self.R_r = R.copy()
        self.R_r_prev = None

    def update(self, r, v, R, pitot, events=(), pilot=None):
        """Run one outer tick. ``pilot(phase, sp)`` may edit the setpoints."""
        est = estimate_airvelocity(v, R, pitot, self.cfg.airdata_eps)
        if self.fsm is None:
            self.reset(r, v, R)
        prev_phase = self.fsm.phase
        self.fsm, sp = fsm_step(self.fsm, self.tracked(r, v, R, est.airspeed),
                                [Event(e) for e in events], self.cfg.fsm, self.dt)
        if pilot is not None:
            pilot(self.fsm, sp)
        changed = self.fsm.phase is not prev_phase
        if sp.lateral != self._lateral:
            self.solver.reset_hold(R[:, 1])
            self._lateral = sp.lateral
        mode = "heading" if sp.speed == "heading" else "planar"
        if mode != self._speed:
            # integrators of the loop being switched in start from zero
            if mode == "heading":
                self.ints.I_vt, self.ints.I_h = 0.0, np.zeros(3)
            else:
                self.ints.I_vh = np.zeros(3)
            self._speed = mode
        out = outer_control(r, v, R, est.v_a, sp, self.ints, self.cfg, self.dt, self.solver)
        if self.cfg.inner.feedforward and self.R_r_prev is not None and not changed:
            self.w_ff = reference_rate(out.R_r, self.R_r_prev, self.dt)
        else:
            self.w_ff = np.zeros(3)
        self.R_r_prev = out.R_r.copy()
        self.R_r = out.R_r
        self.lam = sp.lam
        self.sp = sp
        self.out = out
        return out

    @property
    def thrust_clamped(self):
        return bool(self.out is not None and self.out.flags & FLAG_CLAMPED)

    @property
    def balanced(self):
        return self.sp is not None and self.sp.lateral == BALANCED
