"""Closed-loop simulation of a scenario: plant, controller, pilot script, log."""

import math
import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .actuators import pwm_encode
from .controller import FlightController
from .geometry import euler_from_frame
from .inner import inner_step_k
from .plant import DivergenceError, Environment, VehicleState, advance, surface_matrix
from .transition import Event, Phase, heading_error

COLUMNS = (
    "t", "x", "y", "z", "vx", "vy", "vz", "airspeed", "airspeed_est",
    "roll_deg", "pitch_deg", "heading_deg", "p", "q", "r", "phase", "lambda",
    "a_rx", "a_ry", "a_rz", "vz_r", "speed_r", "T_mc_r", "T_fw_r", "T_fw_raw",
    "t1", "t2", "t3", "t4", "t_push", "pwm1", "pwm2", "pwm3", "pwm4", "pwm_push",
    "delta_a_deg", "delta_rel_deg", "delta_rer_deg",
    "I_vz", "I_vh_x", "I_vh_y", "I_vt", "I_h", "I_w1", "I_w2", "I_w3",
    "heading_err_deg", "flags",
)
COL = {name: n for n, name in enumerate(COLUMNS)}

FLAG_SOLVER_CLAMP = 1
FLAG_SOLVER_HELD = 2
FLAG_ALLOC_SAT = 4


@dataclass
class SimLog:
    columns: tuple
    data: np.ndarray

    def __len__(self):
        return self.data.shape[0]

    def col(self, name):
        return self.data[:, COL[name]]

    def phase(self):
        return self.data[:, COL["phase"]].astype(int)


@dataclass
class SimResult:
    log: SimLog
    metrics: dict
    diverged: bool = False
    message: str = ""


@njit(cache=True)
def run_period_k(x, act, Rr, w_ff, I_w, J, gains, lam, T_mc, T_fw, va_norm, A_inv,
                 B_inv, rmax, pmax, dmax, rho, q_clamp, P, Bsurf, wind, dt_plant,
                 n_plant, n_inner, alpha, lo, hi):
    """Inner loops at the inner rate, each tick followed by ``n_plant`` plant steps."""
    dt_in = dt_plant * n_plant
    cmd = np.zeros(8)
    sat = False
    for _ in range(n_inner):
        R = x[6:15].reshape(3, 3).copy()
        w = x[15:18].copy()
        cmd, M, I_w, wrb, s = inner_step_k(R, w, Rr, w_ff, I_w, J, gains, dt_in, lam,
                                           T_mc, T_fw, va_norm, A_inv, B_inv, rmax,
                                           pmax, dmax, rho, q_clamp)
        sat = sat or s
        x, act = advance(x, act, cmd, P, Bsurf, wind, dt_plant, n_plant, alpha, lo, hi)
    return x, act, I_w, cmd, sat


class Pilot:
    """Mission script: timed triggers and the heading turn flown in FW."""

    def __init__(self, mission):
        self.m = mission
        self.sent = set()
        self.fw_time = 0.0

    def events(self, t):
        out = []
        for name, when in (("transition", self.m.transition_time),
                           ("back_transition", self.m.back_transition_time),
                           ("abort", self.m.abort_time)):
            if when >= 0 and t >= when and name not in self.sent:
                self.sent.add(name)
                out.append(name)
        return out

    def __call__(self, fsm, sp):
        if fsm.phase is not Phase.FW:
            return
        t_turn = fsm.elapsed - self.m.fw_turn_delay
        if t_turn <= 0 or self.m.fw_turn == 0:
            return
        rate = math.copysign(self.m.fw_turn_rate, self.m.fw_turn)
        ang = rate * t_turn
        done = abs(ang) >= abs(self.m.fw_turn)
        if done:
            ang = self.m.fw_turn
        h0 = fsm.captured.h
        psi = math.atan2(h0[1], h0[0]) + ang
        sp.h_r = np.array([math.cos(psi), math.sin(psi), 0.0])
        sp.dh_r = np.zeros(3) if done else rate * np.array([-math.sin(psi), math.cos(psi), 0.0])


def initial_state(s):
    m = s.mission
    return VehicleState.level(r=m.start_position, yaw=m.start_yaw)


def run_scenario(s, max_records=None):
    """Simulate scenario ``s``. Returns a :class:`SimResult`.

    The run is deterministic for a given scenario (the seed drives pitot
    noise and gusts). A diverging state ends the run early with
    ``diverged=True`` and the last record kept in the log.
    """
    s.validate()
    t_wall = time.perf_counter()
    cfg = s.controller
    lim = cfg.limits
    alloc = cfg.alloc
    P = s.plant.pack()
    Bsurf = surface_matrix(s.plant)
    env = Environment(s.env.wind, s.env.gust_amplitude, s.seed)
    rng = np.random.default_rng(s.seed)
    n_plant, n_inner = s.steps
    alpha = lim.lag_gains(s.dt_plant)
    lo, hi = lim.lower, lim.upper
    gains = cfg.inner.pack()
    Jc = np.array(cfg.model.J)

    x = initial_state(s).to_array()
    act = np.zeros(8)
    act[0:4] = alloc.A_inv @ np.array([s.plant.m * s.plant.g0, 0, 0, 0])
    ctl = FlightController(cfg, s.dt_ctl)
    pilot = Pilot(s.mission)

    n_ticks = int(round(s.duration / s.dt_ctl))
    rows = []
    diverged, message = False, ""
    for k in range(n_ticks):
        t = k * s.dt_ctl
        r, v, R, w = x[0:3], x[3:6], x[6:15].reshape(3, 3), x[15:18]
        wind = env.wind_at(t)
        va_true = v - wind
        pitot = float(R[:, 0] @ va_true) + (rng.normal(0.0, s.env.pitot_sigma)
                                             if s.env.pitot_sigma > 0 else 0.0)
        out = ctl.update(r.copy(), v.copy(), R.copy(), pitot, pilot.events(t), pilot)
        va_norm = float(np.linalg.norm(out.v_a_est))
        x_new, act, I_w, cmd, sat = run_period_k(
            x, act, ctl.R_r, ctl.w_ff, ctl.I_w, Jc, gains, ctl.lam, out.T_mc, out.T_fw,
            va_norm, alloc.A_inv, alloc.B_inv, lim.rotor_max, lim.pusher_max,
            lim.surface_max, cfg.model.rho, alloc.q_clamp, P, Bsurf, wind, s.dt_plant,
            n_plant, n_inner, alpha, lo, hi)
        ctl.I_w = I_w
        rows.append(_record(t, x, va_true, out, ctl, cmd, sat))
        if not np.all(np.isfinite(x_new)) or np.abs(x_new[15:18]).max() > 50.0:
            diverged = True
            message = f"state diverged at t={t + s.dt_ctl:.3f} s in phase {ctl.fsm.phase.name}"
            break
        x = x_new
        if max_records is not None and len(rows) >= max_records:
            break

    data = np.array(rows, dtype=float) if rows else np.zeros((0, len(COLUMNS)))
    log = SimLog(COLUMNS, data)
    metrics = compute_metrics(log, s, ctl)
    metrics["runtime_s"] = time.perf_counter() - t_wall
    metrics["diverged"] = diverged
    return SimResult(log, metrics, diverged, message)


def _record(t, x, va_true, out, ctl, cmd, sat):
    R = x[6:15].reshape(3, 3)
    roll, pitch, yaw = euler_from_frame(R)
    ok = np.isfinite(cmd)
    pwm = pwm_encode(np.clip(np.where(ok, cmd, 0.0), ctl.cfg.limits.lower,
                             ctl.cfg.limits.upper))
    pwm[~ok] = 0     # no valid pulse for a diverged command
    sp = ctl.sp
    speed_r = sp.v_a_r if sp.speed == "heading" else float(np.linalg.norm(out.v_hor_r))
    herr = heading_error(x[3:6], sp.h_r) if sp.speed == "heading" else 0.0
    flags = ((FLAG_SOLVER_CLAMP if out.flags & 2 else 0)
             | (FLAG_SOLVER_HELD if out.flags & 1 else 0)
             | (FLAG_ALLOC_SAT if sat else 0))
    ints = ctl.ints
    return [
        t, *x[0:3], *x[3:6], float(np.linalg.norm(va_true)),
        float(np.linalg.norm(out.v_a_est)),
        math.degrees(roll), math.degrees(pitch), math.degrees(yaw), *x[15:18],
        int(ctl.fsm.phase), ctl.lam, *out.a_r, out.vz_r, speed_r,
        out.T_mc, out.T_fw, out.T_fw_raw, *cmd[0:4], cmd[4], *pwm[0:5],
        *np.degrees(cmd[5:8]), ints.I_vz, ints.I_vh[0], ints.I_vh[1], ints.I_vt,
        ints.I_h[2], *ctl.I_w, math.degrees(herr), flags,
    ]


# ----------------------------------------------------------------------------
# metrics

SETTLE_T1 = 2.0          # s after T1 entry before heading error counts
FW_WINDOW = 5.0          # s at the end of FW used for the airspeed check


def _phase_sequence(ph):
    seq = []
    for p in ph:
        if not seq or seq[-1] != p:
            seq.append(int(p))
    return seq


FULL_SEQUENCE = [int(p) for p in (Phase.MC, Phase.T0, Phase.T1, Phase.T2, Phase.T3,
                                  Phase.T4, Phase.FW, Phase.BT0, Phase.BT1, Phase.BT2,
                                  Phase.BT3, Phase.BT4, Phase.MC)]


def compute_metrics(log, s, ctl=None):
    m = {}
    if len(log) == 0:
        m.update(completed=False, aborted=False, n_records=0)
        return m
    ph = log.phase()
    t = log.col("t")
    seq = _phase_sequence(ph)
    m["n_records"] = len(log)
    m["phase_sequence"] = " ".join(Phase(p).name for p in seq)
    m["completed"] = seq == FULL_SEQUENCE
    m["aborted"] = bool(ctl is not None and ctl.fsm.aborted)

    # per-phase tracking RMS
    vz_err = log.col("vz") - log.col("vz_r")
    spd = np.where(np.isin(ph, [int(p) for p in (Phase.T1, Phase.T2, Phase.T3, Phase.T4,
                                                  Phase.FW, Phase.BT0, Phase.BT1,
                                                  Phase.BT2, Phase.BT3)]),
                   log.col("airspeed"), np.hypot(log.col("vx"), log.col("vy")))
    spd_err = spd - log.col("speed_r")
    for p in Phase:
        sel = ph == int(p)
        if sel.any():
            m[f"rms_vz_{p.name}"] = float(np.sqrt(np.mean(vz_err[sel] ** 2)))
            m[f"rms_speed_{p.name}"] = float(np.sqrt(np.mean(spd_err[sel] ** 2)))
    m["tracking_rms"] = float(np.sqrt(np.mean(vz_err ** 2 + spd_err ** 2)))

    trans = np.isin(ph, [int(p) for p in (Phase.T0, Phase.T1, Phase.T2, Phase.T3, Phase.T4)])
    if trans.any():
        z = log.col("z")
        z0 = z[np.argmax(trans)]
        loss = float(np.max(z[trans] - z0))
        t4 = ph == int(Phase.T4)
        hold = float(np.max(np.abs(z[t4] - z[np.argmax(t4)]))) if t4.any() else 0.0
        m["altitude_loss_transition"] = max(loss, 0.0)
        m["altitude_hold_err_T4"] = hold
        m["altitude_dev_transition"] = max(loss, hold)
        ht = np.isin(ph, [int(p) for p in (Phase.T1, Phase.T2, Phase.T3, Phase.T4)])
        if ht.any():
            t1 = t[np.argmax(ht)]
            sel = ht & (t >= t1 + SETTLE_T1)
            if sel.any():
                m["heading_err_transition_deg"] = float(np.max(log.col("heading_err_deg")[sel]))
    fw = ph == int(Phase.FW)
    if fw.any():
        tf = t[fw]
        sel = fw & (t >= tf[-1] - FW_WINDOW)
        va = log.col("airspeed")[sel]
        m["fw_airspeed_mean"] = float(va.mean())
        m["fw_airspeed_max_dev"] = float(np.max(np.abs(va - s.controller.fsm.va_FW)))
    m["final_speed"] = float(np.linalg.norm(log.data[-1, [COL["vx"], COL["vy"], COL["vz"]]]))

    bt2 = ph == int(Phase.BT2)
    if bt2.any():
        neg = bt2 & (log.col("T_fw_raw") < 0)
        m["bt2_negative_thrust_samples"] = int(neg.sum())
        m["bt2_pusher_cmd_max_when_negative"] = (float(log.col("t_push")[neg].max())
                                                if neg.any() else 0.0)
    m["acceptance_ok"] = acceptance_ok(m)
    return m


def acceptance_ok(m):
    try:
        return bool(
            m["completed"] and not m["aborted"]
            and m["fw_airspeed_max_dev"] <= 1.0
            and m["heading_err_transition_deg"] < 3.0
            and m["altitude_dev_transition"] <= 5.0
            and m["final_speed"] < 0.5
            and m["bt2_negative_thrust_samples"] > 0
            and m["bt2_pusher_cmd_max_when_negative"] == 0.0
        )
    except KeyError:
        return False
