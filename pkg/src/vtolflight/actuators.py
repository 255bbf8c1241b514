"""Actuator commands, first-order actuator lags and PWM encoding."""

import math
from dataclasses import dataclass, field

import numpy as np

CHANNELS = ("t1", "t2", "t3", "t4", "t_push", "delta_a", "delta_rel", "delta_rer")
PWM_MIN = 1000
PWM_MAX = 2000


@dataclass
class ActuatorLimits:
    rotor_max: float = 80.0      # N per lift rotor
    pusher_max: float = 100.0    # N
    surface_max: float = math.radians(30.0)
    tau_rotor: float = 0.020
    tau_surface: float = 0.030

    def __post_init__(self):
        if min(self.rotor_max, self.pusher_max, self.surface_max) <= 0:
            raise ValueError("actuator bounds must be positive")
        if min(self.tau_rotor, self.tau_surface) < 0:
            raise ValueError("time constants must be non-negative")

    @property
    def lower(self):
        s = self.surface_max
        return np.array([0.0, 0.0, 0.0, 0.0, 0.0, -s, -s, -s])

    @property
    def upper(self):
        r, s = self.rotor_max, self.surface_max
        return np.array([r, r, r, r, self.pusher_max, s, s, s])

    @property
    def taus(self):
        return np.array([self.tau_rotor] * 5 + [self.tau_surface] * 3)

    def lag_gains(self, dt):
        """Per-channel fraction of the remaining error closed in one step."""
        taus = self.taus
        out = np.ones(8)
        nz = taus > 0
        out[nz] = 1.0 - np.exp(-dt / taus[nz])
        return out


@dataclass
class ActuatorCommand:
    t: np.ndarray = field(default_factory=lambda: np.zeros(4))
    t_push: float = 0.0
    delta: np.ndarray = field(default_factory=lambda: np.zeros(3))  # a, rel, rer

    def to_array(self):
        return np.concatenate((np.asarray(self.t, float), [self.t_push],
                               np.asarray(self.delta, float)))

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, float)
        return cls(a[0:4].copy(), float(a[4]), a[5:8].copy())

    def validate(self, limits):
        a = self.to_array()
        if np.any(a < limits.lower - 1e-12) or np.any(a > limits.upper + 1e-12):
            raise ValueError("actuator command outside bounds")


@dataclass
class ActuatorState:
    realized: np.ndarray = field(default_factory=lambda: np.zeros(8))

    @property
    def command(self):
        return ActuatorCommand.from_array(self.realized)


def actuator_step(cmd, state, dt, limits=None):
    """First-order lag of each channel toward ``cmd``, then clamped to bounds.

    The lag is discretised exactly, so after one time constant the response
    to a step reaches 1 - 1/e of it.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    limits = limits or ActuatorLimits()
    c = cmd.to_array() if isinstance(cmd, ActuatorCommand) else np.asarray(cmd, float)
    a = state.realized
    out = a + limits.lag_gains(dt) * (c - a)
    return ActuatorState(np.clip(out, limits.lower, limits.upper))


@dataclass
class PwmCalibration:
    """Monotone map between a physical command u and a PWM width.

    ``kind='affine'`` is linear over [lo, hi]; ``kind='quadratic'`` models
    u = lo + (hi - lo) s^2 with s the normalised pulse width, the usual
    shape of a propeller thrust curve.
    """

    lo: float
    hi: float
    kind: str = "affine"

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("calibration must be increasing")
        if self.kind not in ("affine", "quadratic"):
            raise ValueError(f"unknown calibration kind {self.kind!r}")

    def to_unit(self, s):
        if self.kind == "affine":
            return self.lo + (self.hi - self.lo) * s
        return self.lo + (self.hi - self.lo) * s * s

    def from_unit(self, u):
        x = np.clip((u - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        return x if self.kind == "affine" else np.sqrt(x)


def default_calibration(limits=None, rotor_kind="affine"):
    limits = limits or ActuatorLimits()
    rot = PwmCalibration(0.0, limits.rotor_max, rotor_kind)
    push = PwmCalibration(0.0, limits.pusher_max, rotor_kind)
    surf = PwmCalibration(-limits.surface_max, limits.surface_max)
    return [rot] * 4 + [push] + [surf] * 3


def pwm_encode(cmd, cal=None):
    """Integer pulse widths (us) in [1000, 2000], one per channel."""
    cal = cal or default_calibration()
    u = cmd.to_array() if isinstance(cmd, ActuatorCommand) else np.asarray(cmd, float)
    s = np.array([c.from_unit(x) for c, x in zip(cal, u)])
    return np.rint(PWM_MIN + (PWM_MAX - PWM_MIN) * s).astype(int)


def pwm_decode(pwm, cal=None):
    cal = cal or default_calibration()
    pwm = np.asarray(pwm, float)
    if np.any(pwm < PWM_MIN) or np.any(pwm > PWM_MAX):
        raise ValueError("PWM width outside [1000, 2000] us")
    s = (pwm - PWM_MIN) / (PWM_MAX - PWM_MIN)
    return ActuatorCommand.from_array([c.to_unit(x) for c, x in zip(cal, s)])
