"""Single-car physics: powertrain maps, external forces, space-domain dynamics.

All functions accept either plain floats or autodiff expressions for the
state/input quantities, so the same formulas back both numeric evaluation
and the NLP transcription.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import autodiff as ad
from .track import TrackNode

__all__ = [
    "AgentParams",
    "AgentState",
    "AgentInput",
    "StateRates",
    "V_FLOOR",
    "default_params",
    "engine_power",
    "propulsive_power",
    "external_force",
    "dynamics_rhs",
]

# Lower velocity bound used as an explicit NLP variable bound: the space-domain
# dynamics divide by v, so iterates must stay away from standstill.
V_FLOOR = 5.0


@dataclass(frozen=True)
class AgentParams:
    """Physical and regulatory constants of one car (SI units)."""

    m: float            # mass [kg]
    c_d1: float         # free-stream drag coefficient, force = c_d1 * v^2 [kg/m]
    c_d2: float         # curvature (sidewind) drag coefficient [kg]
    c_roll: float       # rolling resistance coefficient [-]
    g: float            # gravitational acceleration [m/s^2]
    eta_e: float        # Willans engine efficiency [-]
    P_e0: float         # engine drag power [W]
    P_k_min: float      # motor-generator power bounds [W]
    P_k_max: float
    mdot_f_max: float   # max fuel mass flow [kg/s]
    H_l: float          # lower heating value of the fuel [J/kg]
    E_b_max: float      # battery capacity [J]

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("m must be positive")
        if self.c_d1 <= 0:
            raise ValueError("c_d1 must be positive")
        if not 0 < self.eta_e < 1:
            raise ValueError("eta_e must lie in (0, 1)")
        if self.P_e0 < 0:
            raise ValueError("P_e0 must be non-negative")
        if not (self.P_k_min <= 0 <= self.P_k_max):
            raise ValueError("P_k bounds must bracket zero (motor and generator mode)")
        if self.mdot_f_max <= 0 or self.H_l <= 0 or self.E_b_max <= 0:
            raise ValueError("mdot_f_max, H_l and E_b_max must be positive")

    @property
    def P_f_max(self) -> float:
        return self.mdot_f_max * self.H_l


@dataclass(frozen=True)
class AgentState:
    """v [m/s], consumed fuel energy E_f [J], battery energy E_b [J], t [s]."""

    v: float
    E_f: float
    E_b: float
    t: float


@dataclass(frozen=True)
class AgentInput:
    """Motor-generator power P_k, fuel power P_f, brake power P_brk [W]."""

    P_k: float
    P_f: float
    P_brk: float


@dataclass(frozen=True)
class StateRates:
    """Space-domain derivatives of the agent state."""

    dv_ds: object
    dEf_ds: object
    dEb_ds: object
    dt_ds: object


def default_params() -> AgentParams:
    """Synthetic car consistent with public sporting-regulation magnitudes.

    c_d1 is tuned so full power on a flat straight balances drag at about
    95 m/s; c_d2 adds 5 % drag at a 100 m reference corner radius.
    """
    return AgentParams(
        m=798.0,
        c_d1=0.811,
        c_d2=0.05 * 0.811 * 100.0,
        c_roll=0.01,
        g=9.81,
        eta_e=0.5,
        P_e0=2.0e4,
        P_k_min=-1.2e5,
        P_k_max=1.2e5,
        mdot_f_max=100.0 / 3600.0,
        H_l=43.4e6,
        E_b_max=4.0e6,
    )


def _sin(x):
    return ad.sin(x) if isinstance(x, ad.Expr) else math.sin(x)


def engine_power(params: AgentParams, P_f):
    """Willans line: mechanical engine power from fuel power."""
    return params.eta_e * P_f - params.P_e0


def propulsive_power(params: AgentParams, u):
    """Net power at the wheels (perfect transmission)."""
    return engine_power(params, u.P_f) + u.P_k - u.P_brk


def external_force(params: AgentParams, v, gamma, alpha, delta):
    """Resistive force: aero drag (with slipstream reduction), roll, slope.

    The interaction reduces only the free-stream part of the aero drag:
    F_aero = (c_d1 + c_d2*gamma - c_d1*delta) * v^2.
    """
    c_aero = params.c_d1 + params.c_d2 * gamma
    aero = (c_aero - params.c_d1 * delta) * (v * v)
    return (aero
            + params.c_roll * params.m * params.g
            + params.m * params.g * _sin(alpha))


def dynamics_rhs(params: AgentParams, x, u, node: TrackNode, delta) -> StateRates:
    """Space-domain state derivatives d/ds of (v, E_f, E_b, t).

    A velocity at or below the floor is an infeasible evaluation point and
    raises: it is never clamped inside the derivatives, the NLP keeps
    iterates feasible through an explicit bound on v instead.
    """
    v = x.v
    if not isinstance(v, ad.Expr) and v <= V_FLOOR:
        raise ValueError(
            f"dynamics evaluated below the velocity floor (v={v}, floor={V_FLOOR})")
    P_p = propulsive_power(params, u)
    F = external_force(params, v, node.gamma, node.alpha, delta)
    inv_v = 1.0 / v
    dv = (P_p - F * v) / (params.m * v * v)
    return StateRates(
        dv_ds=dv,
        dEf_ds=u.P_f * inv_v,
        dEb_ds=-(u.P_k * inv_v),
        dt_ds=inv_v,
    )
