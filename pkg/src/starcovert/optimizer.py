"""Alternating maximization of the covert rate: power split, then passive beamforming."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beamforming import build_coefficients, penalty_loop, resolve_structure, solve_relaxation
from .detection import covert_lambda_bound, expected_phi
from .errors import InfeasibleError, InfeasibleInstance, InvalidParameterError, SolverError
from .noma import PowerSplit, StarBeamformer, effective_gain, rates, reflected_exposure
from .power_alloc import PowerSubproblemInputs, allocate_power
from .system_model import default_noise, make_rng

CONVERGED = "converged"
ITERATION_CAPPED = "iteration-capped"
INFEASIBLE_INSTANCE = "infeasible-instance"
NON_MONOTONE = "non-monotone"


@dataclass(frozen=True)
class AlgorithmConfig:
    outer_tol: float = 1e-4
    inner_tol: float = 1e-5
    omega: float = 5.0
    max_outer: int = 50
    max_inner: int = 30
    init_retries: int = 20
    xi_ratio: float = 1e-3
    xi_cap: float = 1e8
    solver_tol: float = 1e-8
    monotone_slack: float = 1e-6
    # relative slack on the SIC ordering when re-checking an extracted beamformer
    sic_rtol: float = 1e-6
    # relative tightening of SIC in the beam step, absorbs extraction error
    sic_backoff: float = 1e-5

    def __post_init__(self):
        if not (self.outer_tol > 0 and self.inner_tol > 0):
            raise InvalidParameterError("tolerances must be positive")
        if not self.omega > 1:
            raise InvalidParameterError("omega must exceed 1")
        if self.max_outer < 1 or self.max_inner < 1 or self.init_retries < 0:
            raise InvalidParameterError("iteration caps must be at least 1")
        if not 0 <= self.sic_backoff < 1:
            raise InvalidParameterError("sic_backoff must lie in [0, 1)")


@dataclass
class Solution:
    beamformer: StarBeamformer | None
    powers: PowerSplit | None
    covert_rate: float
    trace: list = field(default_factory=list)
    status: str = CONVERGED
    outer_iterations: int = 0
    inner_iterations: list = field(default_factory=list)
    message: str = ""
    structure: str = "star"

    @property
    def ok(self) -> bool:
        return self.status == CONVERGED


def power_inputs(ch, beam, params, noise) -> PowerSubproblemInputs:
    return PowerSubproblemInputs(
        g_b=effective_gain(ch.h_rb, "reflect", beam, ch.h_ar),
        g_c=effective_gain(ch.h_rc, "transmit", beam, ch.h_ar),
        s_r=reflected_exposure(beam, ch.h_ar),
        params=params,
        noise=noise,
    )


def _cophase(h_user, h_ar):
    return -np.angle(np.conj(h_user) * h_ar)


def _feasible(ch, beam, params, noise):
    try:
        allocate_power(power_inputs(ch, beam, params, noise))
    except InfeasibleError:
        return False
    return True


def _pareto_split(ch, params, noise):
    """Per-element reflect shares on the boundary of the achievable gain region.

    With both sides co-phased, ``sqrt(g_b) = sum(a cos t)`` and
    ``sqrt(g_c) = sum(b sin t)`` where ``beta_r = cos(t)^2``. Boundary points
    maximize ``sum(b sin t + nu a cos t)``, i.e. ``beta_r = nu^2 a^2 / (nu^2 a^2 + b^2)``;
    ``g_b`` grows and ``g_c`` shrinks with ``nu``. Returns the shares at the
    log-midpoint of the ``nu`` interval where Bob can afford the SIC ordering
    and Carol can reach her QoS floor, or None when that interval is empty
    (then no amplitude/phase choice is feasible).
    """
    a = np.abs(ch.h_rb) * np.abs(ch.h_ar)
    b = np.abs(ch.h_rc) * np.abs(ch.h_ar)
    kappa = noise.bob / noise.carol
    floor = (2.0 ** params.qos_rate - 1.0) * noise.carol / params.max_transmit_power

    def shares(nu):
        num = (nu * a) ** 2
        den = num + b ** 2
        return np.divide(num, den, out=np.full_like(num, 0.5), where=den > 0)

    def gains(nu):
        br = shares(nu)
        return float(np.dot(a, np.sqrt(br))) ** 2, float(np.dot(b, np.sqrt(1.0 - br))) ** 2

    def solve_nu(pred):
        # smallest log-nu in [-60, 60] with pred true; pred is monotone in nu
        lo, hi = -60.0, 60.0
        if not pred(np.exp(hi)):
            return None
        if pred(np.exp(lo)):
            return lo
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if pred(np.exp(mid)):
                hi = mid
            else:
                lo = mid
        return hi

    hi = solve_nu(lambda nu: gains(nu)[1] < floor)
    hi = 60.0 if hi is None else hi
    # prefer the stretch where the co-phased point already meets SIC; else
    # the one where Bob's gain leaves room for detuning Carol's
    for pred in (lambda nu: gains(nu)[0] >= kappa * gains(nu)[1],
                 lambda nu: gains(nu)[0] >= kappa * floor):
        lo = solve_nu(pred)
        if lo is not None and lo < hi:
            return shares(np.exp(0.5 * (lo + hi)))
    return None


def _detuned_phases(h_user, h_ar, amp, target):
    """Phases whose cascaded gain through amplitudes ``amp`` equals ``target``.

    Elements are split into two groups of near-equal co-phased magnitude and
    the second group is rotated by an angle found by bisection; returns None
    when ``target`` is below the reachable range.
    """
    mag = np.sqrt(amp) * np.abs(h_user) * np.abs(h_ar)
    group = np.zeros(mag.shape[0], dtype=bool)
    s1 = s2 = 0.0
    for k in np.argsort(-mag):
        if s1 <= s2:
            s1 += mag[k]
        else:
            s2 += mag[k]
            group[k] = True
    if target > (s1 + s2) ** 2 or target < (s1 - s2) ** 2:
        return None
    lo, hi = 0.0, np.pi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if abs(s1 + s2 * np.exp(1j * mid)) ** 2 > target:
            lo = mid
        else:
            hi = mid
    return _cophase(h_user, h_ar) + np.where(group, 0.5 * (lo + hi), 0.0)


def _detuned_candidate(ch, params, noise, beta_r, pr):
    """Reflect side co-phased; transmit gain set midway between the QoS floor and the SIC ceiling."""
    amp_t = 1.0 - beta_r
    g_b = float(np.sum(np.sqrt(beta_r) * np.abs(ch.h_rb) * np.abs(ch.h_ar))) ** 2
    floor = (2.0 ** params.qos_rate - 1.0) * noise.carol / params.max_transmit_power
    ceiling = g_b * noise.carol / noise.bob
    reach = float(np.sum(np.sqrt(amp_t) * np.abs(ch.h_rc) * np.abs(ch.h_ar))) ** 2
    top = min(ceiling, reach)
    if floor > top:
        return None
    pt = _detuned_phases(ch.h_rc, ch.h_ar, amp_t, 0.5 * (floor + top))
    return None if pt is None else StarBeamformer.from_split(beta_r, pr, pt)


def _relaxed_start(ch, params, noise, st, anchor):
    """Penalized relaxation run at half the largest covert power it admits.

    Raises ``InfeasibleInstance`` when even zero covert power is infeasible for
    the relaxation, which proves the instance has no feasible point.
    """
    coef = build_coefficients(ch)
    p_tmax = params.max_transmit_power

    def admits(p_b):
        # a numerical failure near the feasibility edge counts as "not admitted"
        try:
            return solve_relaxation(coef, PowerSplit(p_b, p_tmax - p_b), params, noise, st) > -math.inf
        except SolverError:
            return None

    base = admits(0.0)
    if base is None:
        return None
    if not base:
        raise InfeasibleInstance("SIC and QoS constraints are jointly infeasible even when relaxed")
    lo, hi = 0.0, p_tmax / 2.0
    if admits(hi):
        lo = hi
    else:
        for _ in range(20):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if admits(mid) else (lo, mid)
    for p_b in (0.5 * lo, 0.0):
        res = penalty_loop(coef, PowerSplit(p_b, p_tmax - p_b), params, noise, anchor, st)
        if res.beam is not None and _feasible(ch, res.beam, params, noise):
            return res.beam
    return None


def init_beamformer(params, ch, seed=0, noise=None, structure="star", retries=20) -> StarBeamformer:
    """Feasible starting beamformer for the alternating loop.

    Candidates, in order: half/half amplitudes with each side co-phased to
    its user; per-element splits on the gain-region boundary, centred in
    the SIC/QoS-feasible stretch (co-phased, then transmit-detuned);
    half/half amplitudes with the transmit phases detuned into the feasible
    gain window; the dual-RIS element assignment, detuned the same way; the
    penalized relaxation at half the largest covert power it admits; then up to
    ``retries`` draws of uniformly random phases. The first candidate whose
    power subproblem is feasible wins. Raises ``InfeasibleInstance`` early
    when the relaxation proves no feasible point exists.
    """
    noise = noise if noise is not None else default_noise()
    m = ch.element_count
    st = resolve_structure(structure, m)
    pr, pt = _cophase(ch.h_rb, ch.h_ar), _cophase(ch.h_rc, ch.h_ar)
    split = np.zeros(m)
    split[st.reflect] = 1.0
    if st.coupled:
        amps = [np.full(m, 0.5)]
        candidates = [StarBeamformer.from_split(amps[0], pr, pt)]
        b = _pareto_split(ch, params, noise)
        if b is not None:
            candidates.append(StarBeamformer.from_split(b, pr, pt))
            candidates.append(_detuned_candidate(ch, params, noise, b, pr))
        candidates.append(_detuned_candidate(ch, params, noise, amps[0], pr))
        if m % 2 == 0:
            half = np.zeros(m)
            half[: m // 2] = 1.0
            candidates.append(_detuned_candidate(ch, params, noise, half, pr))
    else:
        amps = [split]
        candidates = [StarBeamformer.from_split(split, pr, pt),
                      _detuned_candidate(ch, params, noise, split, pr)]
    for beam in candidates:
        if beam is not None and _feasible(ch, beam, params, noise):
            return beam
    beam = _relaxed_start(ch, params, noise, st, candidates[0])
    if beam is not None:
        return beam
    rng = make_rng(seed)
    for _ in range(retries):
        for beta in amps:
            beam = StarBeamformer.from_split(beta, rng.uniform(0, 2 * np.pi, m), rng.uniform(0, 2 * np.pi, m))
            if _feasible(ch, beam, params, noise):
                return beam
    raise InfeasibleInstance(f"no feasible starting point after {retries} random retries")


def objective(ch, beam, powers, noise) -> float:
    return rates(ch, beam, powers, noise).r_bb


def optimize(ch, params, noise, cfg: AlgorithmConfig | None = None, structure="star",
             seed=0, init: StarBeamformer | None = None) -> Solution:
    """Alternate the closed-form power step and the penalized-SDR beamforming step.

    ``trace[0]`` is the covert rate of the starting beamformer after the first
    power step; ``trace[k]`` the rate after the ``k``-th beamforming step.
    The initial powers play no role: the power step runs first.
    """
    cfg = cfg or AlgorithmConfig()
    st = resolve_structure(structure, ch.element_count)
    if init is None:
        try:
            init = init_beamformer(params, ch, seed, noise, st, cfg.init_retries)
        except InfeasibleInstance as exc:
            return Solution(None, None, math.nan, status=INFEASIBLE_INSTANCE, message=str(exc),
                            structure=st.name)
    coef = build_coefficients(ch)
    beam = init
    try:
        powers = allocate_power(power_inputs(ch, beam, params, noise))
    except InfeasibleError as exc:
        return Solution(None, None, math.nan, status=INFEASIBLE_INSTANCE,
                        message=f"starting point infeasible: {exc}", structure=st.name)
    best = Solution(beam, powers, objective(ch, beam, powers, noise), structure=st.name)
    best.trace.append(best.covert_rate)
    for m in range(cfg.max_outer):
        if m > 0:
            try:
                powers = allocate_power(power_inputs(ch, beam, params, noise), sic_rtol=cfg.sic_rtol)
            except InfeasibleError as exc:
                best.status, best.message = ITERATION_CAPPED, f"power step failed at outer iteration {m}: {exc}"
                return best
        try:
            res = penalty_loop(coef, powers, params, noise, beam, st,
                               eps_hat=cfg.inner_tol, omega=cfg.omega, max_inner=cfg.max_inner,
                               xi_ratio=cfg.xi_ratio, xi_cap=cfg.xi_cap, tol=cfg.solver_tol,
                               backoff=cfg.sic_backoff)
        except InfeasibleError as exc:
            best.status, best.message = ITERATION_CAPPED, f"beamforming subproblem infeasible: {exc}"
            return best
        best.inner_iterations.append(res.iterations)
        if res.beam is None:
            best.status, best.message = ITERATION_CAPPED, f"inner loop {res.status}: {res.message}"
            return best
        rate = objective(ch, res.beam, powers, noise)
        prev = best.trace[-1]
        if rate < prev - cfg.monotone_slack:
            best.status = NON_MONOTONE
            best.message = f"outer step {m + 1} lowered the covert rate from {prev:.9g} to {rate:.9g}"
            return best
        if rate < prev:
            # a loss within solver noise: keep the incumbent, which is a fixed point
            best.outer_iterations = m + 1
            best.status = CONVERGED
            best.message = f"outer step {m + 1} returned {prev - rate:.3g} below the incumbent; kept the incumbent"
            return best
        beam = res.beam
        best.beamformer, best.powers, best.covert_rate = beam, powers, rate
        best.trace.append(rate)
        best.outer_iterations = m + 1
        if abs(rate - prev) <= cfg.outer_tol:
            best.status = CONVERGED
            return best
    best.status, best.message = ITERATION_CAPPED, "outer iteration cap reached"
    return best


def optimize_baseline(ch, params, noise, cfg: AlgorithmConfig | None = None, seed=0) -> Solution:
    """Same pipeline with two conventional surfaces of M/2 elements (reflect-only, transmit-only)."""
    if ch.element_count % 2:
        raise InvalidParameterError(f"baseline needs an even element count, got {ch.element_count}")
    return optimize(ch, params, noise, cfg, structure="dual_ris", seed=seed)


def audit(sol: Solution, ch, params, noise) -> dict:
    """Relative violations of every constraint of the joint problem (<= 0 means satisfied)."""
    p, beam = sol.powers, sol.beamformer
    g_b = effective_gain(ch.h_rb, "reflect", beam, ch.h_ar)
    g_c = effective_gain(ch.h_rc, "transmit", beam, ch.h_ar)
    r = rates(ch, beam, p, noise)
    bound = covert_lambda_bound(params.covertness_level, noise)
    lam = expected_phi(p.p_b, beam, ch.h_ar, params.link_gain("rw"))
    p_tmax = params.max_transmit_power
    return {
        "budget": (p.p_b + p.p_c - p_tmax) / p_tmax,
        "order": (p.p_b - p.p_c) / p_tmax,
        "nonneg": -min(p.p_b, p.p_c) / p_tmax,
        "sic": (noise.bob * g_c - noise.carol * g_b) / max(noise.carol * g_b, noise.bob * g_c, 1e-300),
        "qos": (params.qos_rate - r.r_cc) / max(params.qos_rate, 1.0),
        "covert": (lam - bound) / bound,
        "split": float(np.max(np.abs(beam.beta_r + beam.beta_t - 1.0))),
    }
