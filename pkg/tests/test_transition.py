import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vtolflight.solver import BALANCED, PITCH, THRUST_DIR, YAW
from vtolflight.transition import (DEFAULT_ABORT, FORWARD, Captured, Event, FsmConfig, Phase,
                                   Tracked, edges, fsm_step, initial_state, lambda_schedule,
                                   setpoints_for_phase)

CFG = FsmConfig()
DT = 0.02
HOVER = Tracked(np.array([0.0, 0, -50]), np.zeros(3), 0.0, 0.3)


def run(state, tracked, seconds, events=()):
    sp = None
    for k in range(int(round(seconds / DT))):
        state, sp = fsm_step(state, tracked, events if k == 0 else (), CFG, DT)
    return state, sp


def enter(phase, tracked=HOVER):
    """Automaton forced into ``phase`` with references from ``tracked``."""
    st0 = initial_state(tracked)
    cap = Captured(psi=tracked.yaw, h=np.array([1.0, 0, 0]), z=tracked.r[2],
                   v_hor=np.array([tracked.v[0], tracked.v[1], 0.0]),
                   lam=lambda_schedule(phase, 0.0))
    st0.phase, st0.captured, st0.transition_ref, st0.lam = phase, cap, cap, cap.lam
    return st0


def test_config_validation():
    for bad in (dict(eps_va=0), dict(timeout=-1), dict(vz_T1=1.0), dict(dwell=-0.1),
                dict(abort_map={Phase.FW: Phase.MC})):
        with pytest.raises(ValueError):
            FsmConfig(**bad)


def test_lambda_schedule_examples():
    assert lambda_schedule(Phase.T2, 1.0) == 0.5
    assert lambda_schedule(Phase.T2, 3.0) == 1.0
    assert lambda_schedule(Phase.BT3, 0.25) == 0.75
    assert lambda_schedule(Phase.BT3, 5.0) == 0.0
    for ph in (Phase.MC, Phase.T0, Phase.T1, Phase.BT4):
        assert lambda_schedule(ph, 3.0) == 0.0
    for ph in (Phase.T3, Phase.T4, Phase.FW, Phase.BT0, Phase.BT1, Phase.BT2):
        assert lambda_schedule(ph, 3.0) == 1.0
    # ramp restarted from the value at an abort
    assert lambda_schedule(Phase.BT3, 0.2, lam_entry=0.4) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        lambda_schedule(Phase.T2, -1.0)


def test_mc_trigger_enters_t0():
    state, sp = fsm_step(initial_state(HOVER), HOVER, [Event.TRANSITION], CFG, DT)
    assert state.phase is Phase.T0
    assert sp.thrust_mode == PITCH and sp.theta == 0.0 and sp.lam == 0.0
    assert sp.vertical == "vz" and sp.vz_r == -1.0
    assert sp.lateral == YAW and sp.psi_r == 0.3
    assert sp.speed == "velocity"
    later = setpoints_for_phase(Phase.T0, CFG, state.captured, 2.0, state.transition_ref)
    assert np.allclose(later.v_hor_r, 2.0 * np.array([math.cos(0.3), math.sin(0.3), 0]))
    done = setpoints_for_phase(Phase.T0, CFG, state.captured, 9.0, state.transition_ref)
    assert np.linalg.norm(done.v_hor_r) == pytest.approx(5.0)
    assert np.array_equal(done.dv_hor_r, np.zeros(3))


def test_t1_advances_on_airspeed_convergence():
    v = np.array([9.0, 0, -1.1])
    slow = Tracked(np.zeros(3), v, 8.0, 0.0)
    state, _ = run(enter(Phase.T1), slow, 2.0)
    assert state.phase is Phase.T1
    near = Tracked(np.zeros(3), v, 9.3, 0.0)
    state, _ = run(enter(Phase.T1), near, CFG.dwell + 2 * DT)
    assert state.phase is Phase.T2


def test_dwell_debounces():
    near = Tracked(np.zeros(3), np.array([9.0, 0, -1.1]), 9.3, 0.0)
    state = enter(Phase.T1)
    state, _ = run(state, near, CFG.dwell - 4 * DT)
    far = Tracked(np.zeros(3), np.array([9.0, 0, -1.1]), 7.0, 0.0)
    state, _ = fsm_step(state, far, (), CFG, DT)
    assert state.converged_for == 0.0
    state, _ = run(state, near, CFG.dwell - 4 * DT)
    assert state.phase is Phase.T1


def test_t3_abort_goes_to_bt2():
    cruise = Tracked(np.zeros(3), np.array([15.0, 0, 0]), 15.0, 0.0)
    state, sp = fsm_step(enter(Phase.T3, cruise), cruise, [Event.ABORT], CFG, DT)
    assert state.phase is Phase.BT2 and state.aborted
    assert sp.lam == 1.0
    for src, dst in DEFAULT_ABORT.items():
        state, _ = fsm_step(enter(src, cruise), cruise, [Event.ABORT], CFG, DT)
        assert state.phase is dst


def test_abort_ignored_outside_transition():
    for ph in (Phase.MC, Phase.FW, Phase.BT2):
        state, _ = fsm_step(enter(ph), HOVER, [Event.ABORT], CFG, DT)
        assert state.phase is ph and Event.ABORT not in state.pending


def test_setpoint_rows():
    cap = Captured(psi=0.2, h=np.array([0.0, 1, 0]), z=-40.0, v_hor=np.array([0.0, 6, 0]),
                   lam=1.0)
    sp = setpoints_for_phase(Phase.T3, CFG, cap, 0.0)
    assert sp.thrust_mode == PITCH and sp.theta == pytest.approx(math.radians(3))
    assert sp.lam == 1.0 and sp.vertical == "vz" and sp.vz_r == 0.0
    assert sp.lateral == BALANCED and sp.speed == "heading"
    assert sp.v_a_r == 9.0 and sp.dv_a_r == 1.5
    assert np.array_equal(sp.h_r, [0, 1, 0])
    assert setpoints_for_phase(Phase.T3, CFG, cap, 100.0).v_a_r == 20.0

    sp = setpoints_for_phase(Phase.T4, CFG, cap, 1.0)
    assert sp.thrust_mode == THRUST_DIR and sp.gamma_T == 0.0 and sp.lam == 1.0
    assert sp.vertical == "z" and sp.z_r == -40.0
    assert sp.lateral == BALANCED and sp.v_a_r == 20.0

    sp = setpoints_for_phase(Phase.BT4, CFG, cap, 1.0)
    assert sp.thrust_mode == THRUST_DIR and sp.gamma_T == -math.pi / 2 and sp.lam == 0.0
    assert sp.vertical == "z" and sp.z_r == -40.0
    assert sp.lateral == YAW and sp.psi_r == 0.2
    assert np.allclose(sp.v_hor_r, [0, 5, 0])
    assert np.allclose(setpoints_for_phase(Phase.BT4, CFG, cap, 10.0).v_hor_r, 0)
    with pytest.raises(ValueError):
        setpoints_for_phase(Phase.T3, CFG, None)


def ideal(sp, r):
    """Vehicle that tracks every setpoint exactly."""
    vz = sp.vz_r if sp.vertical == "vz" else 0.0
    if sp.speed == "heading":
        v = sp.v_a_r * sp.h_r + np.array([0, 0, vz])
        va = sp.v_a_r
    else:
        v = sp.v_hor_r + np.array([0, 0, vz])
        va = float(np.linalg.norm(v))
    return Tracked(r, v, va, sp.psi_r)


def test_full_mission_visits_chain_in_order():
    state = initial_state(HOVER)
    tracked = HOVER
    events = {int(1 / DT): [Event.TRANSITION]}
    for k in range(int(200 / DT)):
        ev = events.get(k, [])
        if state.phase is Phase.FW and not state.pending:
            ev = [Event.BACK_TRANSITION]
        state, sp = fsm_step(state, tracked, ev, CFG, DT)
        tracked = ideal(sp, tracked.r + DT * tracked.v)
        if state.phase is Phase.MC and len(state.history) > 1:
            break
    assert list(state.history) == list(Phase)[:] + [Phase.MC]
    assert not state.aborted


def test_timeouts():
    stuck = Tracked(np.zeros(3), np.array([3.0, 0, 0]), 3.0, 0.0)
    state, _ = run(enter(Phase.T1), stuck, CFG.timeout + 2 * DT)
    assert state.phase is Phase.BT4 and state.aborted
    # back-transition phases advance on timeout
    slow = Tracked(np.zeros(3), np.array([18.0, 0, 0]), 18.0, 0.0)
    state, _ = run(enter(Phase.BT2), slow, CFG.timeout + 2 * DT)
    assert state.phase is Phase.BT3 and not state.aborted


def test_back_transition_request_stays_pending_until_fw():
    cruise = Tracked(np.zeros(3), np.array([15.0, 0, 0]), 15.0, 0.0)
    state, _ = fsm_step(enter(Phase.T3, cruise), cruise, [Event.BACK_TRANSITION], CFG, DT)
    assert state.phase is Phase.T3 and Event.BACK_TRANSITION in state.pending
    state = enter(Phase.FW, cruise)
    state.pending = frozenset({Event.BACK_TRANSITION})
    state, _ = fsm_step(state, cruise, (), CFG, DT)
    assert state.phase is Phase.BT0 and not state.pending


def test_abort_closure_reaches_mc():
    E = edges()
    succ = {}
    for a, b in E:
        succ.setdefault(a, []).append(b)
    for start in Phase:
        seen, todo = {start}, deque([start])
        while todo:
            for nxt in succ.get(todo.popleft(), []):
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
        assert Phase.MC in seen or start is Phase.MC
    # forward chain has no skipped edge
    for a, b in FORWARD.items():
        assert b == a + 1 or (a is Phase.BT4 and b is Phase.MC)


PALETTE = [
    HOVER,
    Tracked(np.zeros(3), np.array([5.0, 0, -1.0]), 5.0, 0.0),
    Tracked(np.zeros(3), np.array([9.0, 0, -1.1]), 9.0, 0.0),
    Tracked(np.zeros(3), np.array([20.0, 0, 0.0]), 20.0, 0.0),
    Tracked(np.zeros(3), np.array([10.0, 0, 0.12]), 10.0, 0.0),
    Tracked(np.zeros(3), np.array([0.1, 0, 0.0]), 0.1, 0.0),
]
EVENTS = [(), (Event.TRANSITION,), (Event.BACK_TRANSITION,), (Event.ABORT,)]


@given(st.lists(st.tuples(st.integers(0, len(PALETTE) - 1), st.integers(0, 3),
                          st.integers(1, 200)), min_size=1, max_size=40))
def test_random_walk_invariants(script):
    E = edges()
    state = initial_state(HOVER)
    lam = 0.0
    step = DT / min(CFG.lam_up_time, CFG.lam_down_time) + 1e-12
    for idx, ev, n in script:
        for k in range(n):
            prev = state.phase
            state, sp = fsm_step(state, PALETTE[idx], EVENTS[ev] if k == 0 else (), CFG, DT)
            assert prev == state.phase or (prev, state.phase) in E
            assert 0.0 <= sp.lam <= 1.0
            assert abs(sp.lam - lam) <= step
            lam = sp.lam
            if state.phase in (Phase.MC, Phase.T0, Phase.T1, Phase.BT4):
                assert sp.lam == 0.0
            if sp.thrust_mode == THRUST_DIR:
                assert state.phase in (Phase.MC, Phase.T0, Phase.T4, Phase.FW, Phase.BT0,
                                       Phase.BT4)
            assert sp.lateral in (YAW, BALANCED)
            assert sp.vertical in ("z", "vz")
