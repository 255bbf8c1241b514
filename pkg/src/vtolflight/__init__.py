"""Unified nonlinear flight control for a compound (lift + cruise) VTOL.

A single set of control laws covers hover, transition and wing-borne flight:
outer loops produce a desired acceleration, a model-based solver turns it
into an attitude and a thrust split between lift rotors and pusher, and the
inner loops track the attitude with torques blended between rotors and
control surfaces. A transition state machine sequences the setpoints.
"""

from .plant import VehicleParams, VehicleState
from .scenario import Scenario, default_scenario, load_scenario
from .sim import run_scenario
from .transition import Phase

__all__ = ["Phase", "Scenario", "VehicleParams", "VehicleState", "default_scenario",
           "load_scenario", "run_scenario"]
