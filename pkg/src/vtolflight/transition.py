"""Transition / back-transition state machine.

The forward chain is MC -> T0 -> T1 -> T2 -> T3 -> T4 -> FW, then
FW -> BT0 -> ... -> BT4 -> MC. A forward edge fires once the phase's
tracking errors have stayed below their thresholds for a dwell time. An abort
(pilot command or phase timeout) during a transition phase jumps to the
analogous back-transition phase. Each phase emits the bundle of high-level
setpoints consumed by the outer loops and the setpoint solver.
"""

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .solver import BALANCED, PITCH, THRUST_DIR, YAW


class Phase(enum.IntEnum):
    MC = 0
    T0 = 1
    T1 = 2
    T2 = 3
    T3 = 4
    T4 = 5
    FW = 6
    BT0 = 7
    BT1 = 8
    BT2 = 9
    BT3 = 10
    BT4 = 11


class Event(enum.Enum):
    TRANSITION = "transition"
    BACK_TRANSITION = "back_transition"
    ABORT = "abort"


FORWARD = {
    Phase.T0: Phase.T1, Phase.T1: Phase.T2, Phase.T2: Phase.T3,
    Phase.T3: Phase.T4, Phase.T4: Phase.FW,
    Phase.BT0: Phase.BT1, Phase.BT1: Phase.BT2, Phase.BT2: Phase.BT3,
    Phase.BT3: Phase.BT4, Phase.BT4: Phase.MC,
}
DEFAULT_ABORT = {
    Phase.T0: Phase.BT4, Phase.T1: Phase.BT4, Phase.T2: Phase.BT3,
    Phase.T3: Phase.BT2, Phase.T4: Phase.BT1,
}
TRANSITION_PHASES = (Phase.T0, Phase.T1, Phase.T2, Phase.T3, Phase.T4)


def edges(abort_map=None):
    """All directed edges of the automaton, pilot triggers included."""
    out = {(Phase.MC, Phase.T0), (Phase.FW, Phase.BT0)}
    out |= set(FORWARD.items())
    out |= set((abort_map or DEFAULT_ABORT).items())
    return out


@dataclass
class FsmConfig:
    theta_T0: float = 0.0
    vz_T0: float = -1.0
    v_hor_T0: float = 5.0
    theta_T1: float = 0.0
    vz_T1: float = -1.1
    va_T1: float = 9.0
    theta_T2: float = 0.0
    vz_T2: float = -0.9
    theta_T3: float = math.radians(3.0)
    vz_T3: float = 0.0
    va_FW: float = 20.0
    vz_BT0: float = 0.5
    theta_BT1: float = math.radians(3.0)
    vz_BT1: float = 0.0
    vz_BT2: float = 0.12
    va_BT2: float = 10.0
    theta_BT3: float = math.radians(3.0)
    # convergence and timing
    eps_va: float = 0.5
    eps_vz: float = 0.3
    eps_heading: float = math.radians(5.0)
    dwell: float = 0.5
    timeout: float = 15.0
    # ramps
    v_hor_rate: float = 1.0
    va_rate: float = 1.5
    lam_up_time: float = 2.0
    lam_down_time: float = 1.0
    abort_map: dict = field(default_factory=lambda: dict(DEFAULT_ABORT))

    def __post_init__(self):
        problems = []
        for name in ("eps_va", "eps_vz", "eps_heading", "timeout", "v_hor_rate",
                     "va_rate", "lam_up_time", "lam_down_time", "va_T1",
                     "va_FW", "va_BT2", "v_hor_T0"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if self.dwell < 0:
            problems.append("dwell must be non-negative")
        if self.vz_T0 >= 0 or self.vz_T1 >= 0 or self.vz_T2 >= 0:
            problems.append("transition climb rates must be negative (NED)")
        if self.vz_BT0 <= 0 or self.vz_BT2 < 0:
            problems.append("back-transition descent rates must be positive (NED)")
        self.abort_map = {Phase(k): Phase(v) for k, v in self.abort_map.items()}
        for k, v in self.abort_map.items():
            if k not in TRANSITION_PHASES or v not in FORWARD and v is not Phase.MC:
                problems.append(f"invalid abort edge {k.name}->{v.name}")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class PhaseSetpoints:
    """High-level setpoints for one phase.

    ``thrust_mode`` selects which of ``gamma_T`` / ``theta`` is imposed,
    ``vertical`` selects ``vz_r`` ('vz') or ``z_r`` ('z'), ``lateral``
    selects the yaw reference ``psi_r`` or balanced flight, and ``speed`` is
    'position' (hold ``r_hor_r``), 'velocity' (track ``v_hor_r``) or
    'heading' (airspeed ``v_a_r`` along ``h_r``).
    """

    phase: Phase
    thrust_mode: int = THRUST_DIR
    gamma_T: float = -math.pi / 2
    theta: float = 0.0
    lam: float = 0.0
    vertical: str = "z"
    vz_r: float = 0.0
    z_r: float = 0.0
    lateral: int = YAW
    psi_r: float = 0.0
    speed: str = "position"
    r_hor_r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v_hor_r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dv_hor_r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v_a_r: float = 0.0
    dv_a_r: float = 0.0
    h_r: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    dh_r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    aero: bool = False


@dataclass
class Tracked:
    """Measured quantities the convergence tests look at."""

    r: np.ndarray
    v: np.ndarray
    airspeed: float
    yaw: float


@dataclass
class Captured:
    """References frozen when a phase is entered."""

    psi: float = 0.0
    h: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    z: float = 0.0
    r_hor: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v_hor: np.ndarray = field(default_factory=lambda: np.zeros(3))
    lam: float = 0.0


@dataclass
class FsmState:
    phase: Phase = Phase.MC
    elapsed: float = 0.0
    converged_for: float = 0.0
    captured: Captured = field(default_factory=Captured)
    transition_ref: Captured = field(default_factory=Captured)
    pending: frozenset = frozenset()
    lam: float = 0.0
    aborted: bool = False
    history: tuple = ()


def lambda_schedule(phase, dt_phase, cfg=None, lam_entry=None):
    """Blending coefficient as a function of time spent in ``phase``.

    T2 ramps up from 0 to 1 and BT3 ramps down from 1 to 0. ``lam_entry``
    starts a ramp from a different value (after an abort), keeping lambda
    continuous.
    """
    if dt_phase < 0:
        raise ValueError("elapsed time must be non-negative")
    cfg = cfg or FsmConfig()
    if phase is Phase.T2:
        start = 0.0 if lam_entry is None else lam_entry
        return min(start + dt_phase / cfg.lam_up_time, 1.0)
    if phase is Phase.BT3:
        start = 1.0 if lam_entry is None else lam_entry
        return max(start - dt_phase / cfg.lam_down_time, 0.0)
    if phase in (Phase.MC, Phase.T0, Phase.T1, Phase.BT4):
        return 0.0
    return 1.0


def _unit_h(v):
    h = np.array([v[0], v[1], 0.0])
    n = np.linalg.norm(h)
    return h / n if n > 1e-9 else None


def heading_error(v, h_r):
    h = _unit_h(v)
    if h is None:
        return math.pi
    return math.acos(max(-1.0, min(1.0, float(h @ h_r))))


def initial_state(tracked):
    """Automaton sitting in MC with references captured from ``tracked``."""
    cap = _capture(tracked, 0.0)
    return FsmState(Phase.MC, 0.0, 0.0, cap, cap, frozenset(), 0.0, False, (Phase.MC,))


def _capture(tracked, lam):
    r = np.asarray(tracked.r, float)
    v = np.asarray(tracked.v, float)
    h = _unit_h(v)
    if h is None:
        h = np.array([math.cos(tracked.yaw), math.sin(tracked.yaw), 0.0])
    return Captured(psi=tracked.yaw, h=h, z=float(r[2]),
                    r_hor=np.array([r[0], r[1], 0.0]),
                    v_hor=np.array([v[0], v[1], 0.0]), lam=lam)


def setpoints_for_phase(phase, cfg, cap, elapsed=0.0, tref=None):
    """Setpoint bundle of ``phase`` after ``elapsed`` seconds in it.

    ``cap`` holds the references captured at phase entry and ``tref`` the
    ones captured when the current (back-)transition was triggered, which
    fix the heading to follow.
    """
    if cap is None:
        raise ValueError("phase references have not been captured")
    tref = tref or cap
    sp = PhaseSetpoints(phase)
    sp.lam = lambda_schedule(phase, elapsed, cfg, cap.lam if phase in (Phase.T2, Phase.BT3) else None)
    sp.h_r = tref.h.copy()
    sp.psi_r = tref.psi
    sp.z_r = cap.z
    if phase is Phase.MC:
        sp.r_hor_r = cap.r_hor.copy()
        sp.psi_r = cap.psi
        return sp
    if phase is Phase.T0:
        sp.thrust_mode, sp.theta = PITCH, cfg.theta_T0
        sp.vertical, sp.vz_r = "vz", cfg.vz_T0
        sp.speed = "velocity"
        mag = min(cfg.v_hor_rate * elapsed, cfg.v_hor_T0)
        sp.v_hor_r = mag * tref.h
        if mag < cfg.v_hor_T0:
            sp.dv_hor_r = cfg.v_hor_rate * tref.h
        sp.aero = True
        return sp
    if phase is Phase.BT4:
        sp.gamma_T = -math.pi / 2
        sp.speed = "velocity"
        v0 = float(np.linalg.norm(cap.v_hor))
        d = cap.v_hor / v0 if v0 > 1e-9 else tref.h
        mag = max(v0 - cfg.v_hor_rate * elapsed, 0.0)
        sp.v_hor_r = mag * d
        if mag > 0:
            sp.dv_hor_r = -cfg.v_hor_rate * d
        sp.psi_r = cap.psi
        sp.aero = True
        return sp

    # wing-borne or mixed phases: balanced flight along h_r
    sp.lateral = BALANCED
    sp.speed = "heading"
    sp.aero = True
    if phase is Phase.FW:
        sp.gamma_T = 0.0
        sp.v_a_r = cfg.va_FW
        sp.h_r = cap.h.copy()
        return sp
    table = {
        Phase.T1: (PITCH, cfg.theta_T1, cfg.vz_T1),
        Phase.T2: (PITCH, cfg.theta_T2, cfg.vz_T2),
        Phase.T3: (PITCH, cfg.theta_T3, cfg.vz_T3),
        Phase.T4: (THRUST_DIR, 0.0, None),
        Phase.BT0: (THRUST_DIR, 0.0, cfg.vz_BT0),
        Phase.BT1: (PITCH, cfg.theta_BT1, cfg.vz_BT1),
        Phase.BT2: (PITCH, cfg.theta_BT1, cfg.vz_BT2),
        Phase.BT3: (PITCH, cfg.theta_BT3, None),
    }
    mode, angle, vz = table[phase]
    sp.thrust_mode = mode
    if mode == PITCH:
        sp.theta = angle
    else:
        sp.gamma_T = angle
    if vz is None:
        sp.vertical = "z"
    else:
        sp.vertical, sp.vz_r = "vz", vz
    if phase in (Phase.T1, Phase.T2):
        sp.v_a_r = cfg.va_T1
    elif phase is Phase.T3:
        sp.v_a_r = min(cfg.va_T1 + cfg.va_rate * elapsed, cfg.va_FW)
        sp.dv_a_r = cfg.va_rate if sp.v_a_r < cfg.va_FW else 0.0
    elif phase is Phase.BT2:
        sp.v_a_r = max(cfg.va_FW - cfg.va_rate * elapsed, cfg.va_BT2)
        sp.dv_a_r = -cfg.va_rate if sp.v_a_r > cfg.va_BT2 else 0.0
    elif phase is Phase.BT3:
        sp.v_a_r = cfg.va_BT2
    else:
        sp.v_a_r = cfg.va_FW
    return sp


def converged(phase, sp, tracked, cfg, elapsed):
    """Forward condition of ``phase`` (without the dwell)."""
    v = np.asarray(tracked.v, float)
    va = tracked.airspeed
    vz_ok = sp.vertical != "vz" or abs(v[2] - sp.vz_r) < cfg.eps_vz
    v_hor = math.hypot(v[0], v[1])
    if phase is Phase.T0:
        return (elapsed >= cfg.v_hor_T0 / cfg.v_hor_rate
                and abs(v_hor - cfg.v_hor_T0) < cfg.eps_va and vz_ok)
    if phase is Phase.T1:
        return (abs(va - cfg.va_T1) < cfg.eps_va
                and heading_error(v, sp.h_r) < cfg.eps_heading)
    if phase is Phase.T2:
        return sp.lam >= 1.0
    if phase is Phase.T3:
        return sp.v_a_r >= cfg.va_FW and abs(va - cfg.va_FW) < cfg.eps_va
    if phase is Phase.T4:
        return (abs(va - cfg.va_FW) < cfg.eps_va and abs(v[2]) < cfg.eps_vz
                and heading_error(v, sp.h_r) < cfg.eps_heading)
    if phase in (Phase.BT0, Phase.BT1):
        return vz_ok and abs(va - cfg.va_FW) < cfg.eps_va
    if phase is Phase.BT2:
        return abs(va - cfg.va_BT2) < cfg.eps_va
    if phase is Phase.BT3:
        return sp.lam <= 0.0
    if phase is Phase.BT4:
        return sp.dv_hor_r @ sp.dv_hor_r == 0.0 and v_hor < cfg.eps_va
    return False


def _enter(state, phase, tracked, aborted=False):
    cap = _capture(tracked, state.lam)
    tref = state.transition_ref
    if phase in (Phase.T0, Phase.BT0):
        tref = cap
        if phase is Phase.T0:
            tref = replace(cap, h=np.array([math.cos(cap.psi), math.sin(cap.psi), 0.0]))
    return FsmState(phase, 0.0, 0.0, cap, tref, state.pending, state.lam,
                    state.aborted or aborted, state.history + (phase,))


def fsm_step(state, tracked, events, cfg, dt):
    """Advance the automaton by ``dt`` seconds.

    ``events`` is an iterable of :class:`Event`. Triggers that do not apply
    to the current phase stay pending (a back-transition requested during
    the transition fires once FW is reached); an abort only applies during
    T0-T4. Returns (new state, setpoints).
    """
    pending = set(state.pending) | {Event(e) for e in events}
    state = replace(state, pending=frozenset(pending))
    phase = state.phase

    nxt, aborted = None, False
    if phase in TRANSITION_PHASES and Event.ABORT in pending:
        nxt, aborted = cfg.abort_map[phase], True
        pending.discard(Event.ABORT)
    elif phase is Phase.MC and Event.TRANSITION in pending:
        nxt = Phase.T0
        pending.discard(Event.TRANSITION)
    elif phase is Phase.FW and Event.BACK_TRANSITION in pending:
        nxt = Phase.BT0
        pending.discard(Event.BACK_TRANSITION)
    pending.discard(Event.ABORT)
    state = replace(state, pending=frozenset(pending))

    if nxt is None:
        elapsed = state.elapsed + dt
        sp = setpoints_for_phase(phase, cfg, state.captured, elapsed, state.transition_ref)
        conv = state.converged_for + dt if converged(phase, sp, tracked, cfg, elapsed) else 0.0
        if phase in FORWARD and conv >= cfg.dwell:
            nxt = FORWARD[phase]
        elif phase in FORWARD and elapsed >= cfg.timeout:
            if phase in TRANSITION_PHASES:
                nxt, aborted = cfg.abort_map[phase], True
            else:
                nxt = FORWARD[phase]
        else:
            return replace(state, elapsed=elapsed, converged_for=conv, lam=sp.lam), sp

    state = _enter(state, nxt, tracked, aborted)
    sp = setpoints_for_phase(nxt, cfg, state.captured, 0.0, state.transition_ref)
    return replace(state, lam=sp.lam), sp
