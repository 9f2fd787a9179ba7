"""Closed-form power split between the covert and public signals for a fixed beamformer."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .detection import covert_lambda_bound
from .errors import InfeasibleError, InvalidParameterError
from .noma import PowerSplit
from .system_model import NoiseModel, SystemParams


@dataclass(frozen=True)
class PowerSubproblemInputs:
    """Coefficients of the power subproblem.

    g_b, g_c: cascaded gains to Bob (reflect side) and Carol (transmit side).
    s_r: ``sum(beta_r * |h_ar|^2)``, how much of Alice's signal the reflect
    side exposes to the warden.
    """

    g_b: float
    g_c: float
    s_r: float
    params: SystemParams
    noise: NoiseModel

    def __post_init__(self):
        if min(self.g_b, self.g_c, self.s_r) < 0:
            raise InvalidParameterError("gains must be nonnegative")

    @property
    def l_rw(self) -> float:
        return self.params.link_gain("rw")


def check_sic_feasible(inp: PowerSubproblemInputs, rtol: float = 0.0) -> bool:
    """SIC at Bob works for every power split iff ``sigma_c^2 g_b >= sigma_b^2 g_c``."""
    lhs = inp.noise.carol * inp.g_b
    rhs = inp.noise.bob * inp.g_c
    return lhs >= rhs * (1.0 - rtol)


def power_caps(inp: PowerSubproblemInputs) -> dict:
    """Upper bounds on the covert power from each constraint."""
    p = inp.params
    q = 2.0 ** p.qos_rate
    if inp.s_r > 0:
        covert = covert_lambda_bound(p.covertness_level, inp.noise) / (inp.l_rw * inp.s_r)
    else:
        covert = math.inf
    if inp.g_c > 0:
        qos = (p.max_transmit_power * inp.g_c - (q - 1.0) * inp.noise.carol) / (q * inp.g_c)
    else:
        qos = math.inf if p.qos_rate == 0 else -math.inf
    return {"budget": p.max_transmit_power / 2.0, "covert": covert, "qos": qos}


def allocate_power(inp: PowerSubproblemInputs, sic_rtol: float = 0.0) -> PowerSplit:
    """Maximize the covert power; the public signal takes the rest of the budget."""
    if not check_sic_feasible(inp, sic_rtol):
        raise InfeasibleError("sic", "Bob's cascaded channel is too weak for SIC decoding order")
    caps = power_caps(inp)
    if caps["qos"] < 0:
        raise InfeasibleError("qos", "Carol's QoS rate is unreachable even with the whole budget")
    p_tmax = inp.params.max_transmit_power
    p_b = float(max(0.0, min(caps.values())))
    return PowerSplit(p_b, p_tmax - p_b)
