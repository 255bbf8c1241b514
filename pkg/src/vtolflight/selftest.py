"""Randomized property checks shipped with the package (``vtolflight selftest``)."""

import math
import time
from dataclasses import dataclass

import numpy as np

from .airdata import estimate_airvelocity
from numba import njit

from .geometry import orthonormalize, rotation_about, skew
from .inner import AllocationConfig, InnerGains, attitude_rate_k, blend_torque
from .plant import VehicleParams
from .solver import (FLAG_CLAMPED, THRUST_DIR, SolverInput, SolverModel,
                     force_residual, solve, solve_k)
from .transition import DEFAULT_ABORT, Phase, edges


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


def random_solver_input(rng, v_max=25.0):
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    return SolverInput(
        a_r=rng.uniform(-5.0, 5.0, 3),
        v_a=d * rng.uniform(0.0, v_max),
        mode=int(rng.integers(2)),
        gamma_T=rng.uniform(-math.pi / 2, 0.0),
        theta=math.radians(rng.uniform(-20.0, 20.0)),
        lateral=int(rng.integers(2)),
        psi=rng.uniform(-math.pi, math.pi),
    )


def check_solver_residual(n=10_000, seed=0):
    """Force balance of the solver over random inputs (unclamped solutions)."""
    model = SolverModel()
    rng = np.random.default_rng(seed)
    inputs = []
    while len(inputs) < n:
        inp = random_solver_input(rng)
        inputs.append(inp)
    j0 = np.array([0.0, 1.0, 0.0])
    solve_k(inputs[0].a_r, inputs[0].v_a, 0, -1.0, 0, 0.0, j0, model.m, model.g0, model.rho,
            model.S, model.c0, model.c0bar, model.alpha0)
    t0 = time.perf_counter()
    raw = []
    for inp in inputs:
        ang = inp.gamma_T if inp.mode == THRUST_DIR else inp.theta
        raw.append(solve_k(inp.a_r, inp.v_a, inp.mode, ang, inp.lateral, inp.psi, j0,
                           model.m, model.g0, model.rho, model.S, model.c0, model.c0bar,
                           model.alpha0))
    elapsed = time.perf_counter() - t0
    worst, used = 0.0, 0
    for inp in inputs:
        out = solve(inp, model)
        if out.flags & FLAG_CLAMPED:
            continue
        used += 1
        a_p = inp.a_r - np.array([0.0, 0.0, model.g0])
        res = force_residual(out, inp.a_r, inp.v_a, model)
        worst = max(worst, res / max(1.0, float(np.linalg.norm(a_p))))
    ok = worst <= 1e-9 and elapsed < 1.0
    return CheckResult("solver residual", ok,
                       f"{used} solutions, worst relative residual {worst:.2e}, "
                       f"{elapsed:.3f} s for {n} solves")


def check_hover():
    model = SolverModel()
    out = solve(SolverInput(np.zeros(3)), SolverModel(model.m, model.g0, model.rho,
                                                      model.S, model.c0, model.c0bar, 0.0))
    err_T = abs(out.T_norm - model.m * model.g0)
    err_R = float(np.abs(out.R - np.eye(3)).max())
    return CheckResult("hover solve", err_T <= 1e-9 and err_R <= 1e-9,
                       f"|T| error {err_T:.1e}, frame error {err_R:.1e}")


@njit(cache=True)
def lyapunov_value(R, Rr):
    """V = tan^2(angle/2) / 2 for the rotation taking ``R`` onto ``Rr``."""
    Q = Rr @ R.T
    s = 0.5 * math.sqrt((Q[2, 1] - Q[1, 2]) ** 2 + (Q[0, 2] - Q[2, 0]) ** 2
                        + (Q[1, 0] - Q[0, 1]) ** 2)
    c = 0.5 * (Q[0, 0] + Q[1, 1] + Q[2, 2] - 1.0)
    return 0.5 * math.tan(0.5 * math.atan2(s, c)) ** 2


@njit(cache=True)
def _attitude_field(R, Rr, k):
    # omega is inertial, so dR/dt = [omega]x R
    return skew(attitude_rate_k(R, Rr, k)) @ R


@njit(cache=True)
def attitude_trajectory(R0, Rr, k, dt=1e-3, duration=3.0):
    """RK4 on the kinematic loop; returns the Lyapunov value at every sample."""
    R = R0.copy()
    n = int(round(duration / dt))
    V = np.empty(n + 1)
    V[0] = lyapunov_value(R, Rr)
    for s in range(1, n + 1):
        k1 = _attitude_field(R, Rr, k)
        k2 = _attitude_field(R + 0.5 * dt * k1, Rr, k)
        k3 = _attitude_field(R + 0.5 * dt * k2, Rr, k)
        k4 = _attitude_field(R + dt * k3, Rr, k)
        R = orthonormalize(R + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
        V[s] = lyapunov_value(R, Rr)
    return V


def random_rotation(rng, angle_range=(0.0, math.pi)):
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    return rotation_about(u, rng.uniform(*angle_range))


def check_lyapunov(n=200, seed=0, dt=1e-3, duration=3.0):
    k = np.array(InnerGains().k_att)
    lam = k.min()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        Rr = random_rotation(rng)
        R0 = random_rotation(rng, (0.05, 3.0)) @ Rr
        V = attitude_trajectory(R0, Rr, k, dt, duration)
        t = np.arange(len(V)) * dt
        worst = max(worst, float(np.max(V / (V[0] * np.exp(-4 * lam * t)))))
    return CheckResult("attitude Lyapunov decrease", worst <= 1 + 1e-6,
                       f"{n} runs, worst V(t)/bound {worst:.9f}")


def check_allocation():
    cfg = AllocationConfig.from_params(VehicleParams())
    ea = float(np.abs(cfg.A @ cfg.A_inv - np.eye(4)).max())
    eb = float(np.abs(cfg.B @ cfg.B_inv - np.eye(3)).max())
    rng = np.random.default_rng(0)
    blend = 0.0
    for _ in range(1000):
        M = rng.normal(size=3) * 10
        mc, fw = blend_torque(M, rng.uniform())
        blend = max(blend, float(np.max(np.abs(mc + fw - M))))
    return CheckResult("allocation round trip", ea <= 1e-12 and eb <= 1e-12 and blend == 0.0,
                       f"A err {ea:.1e}, B err {eb:.1e}, blend err {blend:.1e}")


def check_airdata(n=1000, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        R = random_rotation(rng, (0.0, 1.0))
        # air velocity confined to the body i-k plane (no sideslip)
        va = rng.uniform(0, 25) * R[:, 0] + rng.uniform(-3, 3) * R[:, 2]
        wind = np.append(rng.normal(size=2) * 3, 0.0)   # horizontal
        est = estimate_airvelocity(va + wind, R, float(R[:, 0] @ va), eps=0.0)
        worst = max(worst, float(np.abs(est.v_a - va).max()))
    return CheckResult("air data exactness", worst <= 1e-9, f"worst error {worst:.1e}")


def check_fsm_graph():
    g = {}
    for a, b in edges(DEFAULT_ABORT):
        g.setdefault(a, []).append(b)
    seen, todo = {Phase.MC}, [Phase.MC]
    while todo:
        p = todo.pop()
        for q in g.get(p, ()):
            if q not in seen:
                seen.add(q)
                todo.append(q)
    # every phase reachable, and MC reachable from every phase
    back = all(_reaches(g, p, Phase.MC) for p in Phase)
    ok = seen == set(Phase) and back
    return CheckResult("automaton graph", ok, f"{len(seen)} phases reachable, return to MC: {back}")


def _reaches(g, a, b):
    seen, todo = {a}, [a]
    while todo:
        p = todo.pop()
        if p == b:
            return True
        for q in g.get(p, ()):
            if q not in seen:
                seen.add(q)
                todo.append(q)
    return a == b


CHECKS = (check_solver_residual, check_hover, check_lyapunov, check_allocation,
          check_airdata, check_fsm_graph)


def run_selftest(report=print):
    results = []
    for fn in CHECKS:
        try:
            r = fn()
        except Exception as exc:  # a crashing check is a failed check
            r = CheckResult(fn.__name__, False, f"raised {type(exc).__name__}: {exc}")
        report(f"{'PASS' if r.ok else 'FAIL'}  {r.name}: {r.detail}")
        results.append(r)
    return results
