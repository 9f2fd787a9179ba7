"""Independent oracles and quick self-checks.

The oracles avoid the closed forms they check: detection error comes from the
log-uniform CDF on a threshold grid, the power split from a grid over the
covert power, the beamformer from exhaustive search over quantized amplitudes
and phases, and ``lambda_max`` from a dense eigensolver.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import conic
from .beamforming import build_coefficients, penalty_loop, solve_relaxation
from .detection import (WardenObservables, covert_lambda_bound, dep, min_dep, optimal_threshold,
                        threshold_range)
from .errors import InfeasibleError, InfeasibleInstance
from .noma import PowerSplit, rates
from .power_alloc import PowerSubproblemInputs, allocate_power
from .system_model import NoiseModel, convert_db, default_noise, default_system, sample_channels, trial_seed


# --- detection ------------------------------------------------------------

def noise_cdf(x, noise: NoiseModel):
    lo, _ = noise.support
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = (np.log(np.maximum(x, 1e-300)) - math.log(lo)) / (2.0 * math.log(noise.uncertainty))
    return np.clip(np.where(x > 0, f, 0.0), 0.0, 1.0)


def dep_grid(taus, obs: WardenObservables, noise: NoiseModel):
    """False alarm ``P(n > tau - phi1)`` plus miss ``P(n < tau - phi2)``."""
    taus = np.asarray(taus, dtype=float)
    return 1.0 - noise_cdf(taus - obs.phi1, noise) + noise_cdf(taus - obs.phi2, noise)


def dep_grid_min(obs, noise, points=100_000):
    lo, hi = threshold_range(obs, noise)
    taus = np.linspace(lo, hi, points)
    d = dep_grid(taus, obs, noise)
    i = int(np.argmin(d))
    return float(d[i]), float(taus[i])


def random_detection_instance(rng):
    """``(WardenObservables, NoiseModel)`` spanning both sides of the zero-DEP boundary."""
    s = 10 ** rng.uniform(-12, -6)
    rho = 10 ** (rng.uniform(0.5, 10.0) / 10.0)   # 0.5 to 10 dB
    phi1 = s * 10 ** rng.uniform(-3, 2)
    phi = s * (rho * rho - 1) / rho * 10 ** rng.uniform(-4, 0.5)
    noise = NoiseModel(bob=1e-11, carol=1e-11, nominal_warden=s, uncertainty=rho)
    return WardenObservables(phi1, phi1 + phi), noise


# --- power allocation -----------------------------------------------------

def power_grid_oracle(inp: PowerSubproblemInputs, points=1_000_000):
    """Largest feasible covert power on a uniform grid over ``[0, P/2]``.

    Returns ``(p_b, step)``, or ``(None, step)`` when no grid point is feasible.
    """
    p = inp.params
    p_tmax = p.max_transmit_power
    grid = np.linspace(0.0, p_tmax / 2.0, points)
    p_c = p_tmax - grid
    q = 2.0 ** p.qos_rate - 1.0
    ok = inp.noise.carol * inp.g_b >= inp.noise.bob * inp.g_c
    ok = ok & (p_c * inp.g_c >= q * (grid * inp.g_c + inp.noise.carol))
    bound = covert_lambda_bound(p.covertness_level, inp.noise)
    ok = ok & (grid * inp.l_rw * inp.s_r <= bound)
    step = grid[1] - grid[0]
    if not ok.any():
        return None, step
    return float(grid[np.flatnonzero(ok)[-1]]), step


def power_audit(split: PowerSplit, inp: PowerSubproblemInputs) -> dict:
    p = inp.params
    pt = p.max_transmit_power
    q = 2.0 ** p.qos_rate - 1.0
    bound = covert_lambda_bound(p.covertness_level, inp.noise)
    sinr_c = split.p_c * inp.g_c / (split.p_b * inp.g_c + inp.noise.carol)
    return {
        "budget": (split.p_b + split.p_c - pt) / pt,
        "order": (split.p_b - split.p_c) / pt,
        "nonneg": -min(split.p_b, split.p_c) / pt,
        "qos": (q - sinr_c) / max(q, 1.0),
        "covert": (split.p_b * inp.l_rw * inp.s_r - bound) / bound,
    }


def random_power_instance(rng, feasible=True, max_tries=1000):
    params = default_system(
        max_transmit_power=convert_db(rng.uniform(0, 30), "dBm"),
        covertness_level=rng.uniform(0.05, 0.5),
        qos_rate=rng.uniform(0.1, 3.0),
    )
    noise = default_noise()
    for _ in range(max_tries):
        g_c = 10 ** rng.uniform(-11, -7)
        g_b = g_c * 10 ** rng.uniform(-0.5, 2)
        s_r = 10 ** rng.uniform(-9, -5)
        inp = PowerSubproblemInputs(g_b, g_c, s_r, params, noise)
        if not feasible:
            return inp
        try:
            allocate_power(inp)
            return inp
        except InfeasibleError:
            continue
    raise RuntimeError("no feasible power instance found")


# --- beamforming ----------------------------------------------------------

def exhaustive_beamformer(ch, params, noise, phases=16, amplitudes=11, powers: PowerSplit | None = None):
    """Best covert rate over quantized amplitudes and phases.

    With ``powers=None`` each grid point gets its exact optimal power split;
    otherwise the powers are held fixed and the grid point must satisfy the
    constraints at those powers. The first element's phases are pinned to
    zero since only relative phases matter. Returns
    ``(rate, (beta_r, phase_r, phase_t))`` with rate ``-inf`` when no grid
    point is feasible. Cost grows as ``(amplitudes * phases^2)^M / phases^2``.
    """
    m = ch.element_count
    amp = np.linspace(0.0, 1.0, amplitudes)
    ph = 2.0 * np.pi * np.arange(phases) / phases
    a = np.conj(ch.h_rb) * ch.h_ar
    b = np.conj(ch.h_rc) * ch.h_ar
    c = np.abs(ch.h_ar) ** 2
    betas = np.array(np.meshgrid(*([amp] * m), indexing="ij")).reshape(m, -1).T
    rel = np.array(np.meshgrid(*([ph] * (m - 1)), indexing="ij")).reshape(m - 1, -1).T if m > 1 else np.zeros((1, 0))
    rel = np.hstack([np.zeros((len(rel), 1)), rel])
    rot = np.exp(1j * rel)
    # |sum_m sqrt(beta_m) e^{j phi_m} a_m|^2 for every (amplitude, phase) pair
    fb = np.abs(np.einsum("km,pm,m->kp", np.sqrt(betas), rot, a)) ** 2
    fc = np.abs(np.einsum("km,pm,m->kp", np.sqrt(1.0 - betas), rot, b)) ** 2
    s_r = (betas @ c)[:, None]
    p_tmax = params.max_transmit_power
    q = 2.0 ** params.qos_rate - 1.0
    bound = covert_lambda_bound(params.covertness_level, noise)
    l_rw = params.link_gain("rw")
    if powers is None:
        with np.errstate(divide="ignore", invalid="ignore"):
            cov = np.where(s_r > 0, bound / (l_rw * s_r), np.inf)
    best, arg = -math.inf, None
    for j in range(fc.shape[1]):
        g_c = fc[:, j][:, None]                     # transmit phases index j, reflect phases along axis 1
        ok = noise.carol * fb >= noise.bob * g_c
        if powers is None:
            with np.errstate(divide="ignore", invalid="ignore"):
                qos = np.where(g_c > 0, (p_tmax * g_c - q * noise.carol) / ((q + 1.0) * g_c), -np.inf)
            pb = np.maximum(np.minimum(np.minimum(p_tmax / 2.0, cov), qos), 0.0)
            ok = ok & (qos >= 0)
        else:
            pb = powers.p_b
            ok = ok & (powers.p_c * g_c >= q * (pb * g_c + noise.carol)) & (pb * l_rw * s_r <= bound)
        rate = np.where(ok, np.log2(1.0 + pb * fb / noise.bob), -np.inf)
        k, p = np.unravel_index(int(np.argmax(rate)), rate.shape)
        if rate[k, p] > best:
            best = float(rate[k, p])
            arg = (betas[k].copy(), rel[p].copy(), rel[j].copy())
    return best, arg


def relaxed_rate_bound(ch, params, noise, structure="star", intervals=24, tol=1e-8):
    """Upper bound on the best covert rate from the rank-relaxed subproblem.

    The relaxed gain at covert power ``p`` can only shrink as ``p`` grows, so
    on each grid interval ``[p_i, p_{i+1}]`` the rate is at most
    ``log2(1 + p_{i+1} g(p_i) / sigma_b^2)``.
    """
    coef = build_coefficients(ch)
    p_tmax = params.max_transmit_power
    grid = np.linspace(0.0, p_tmax / 2.0, intervals + 1)
    best = -math.inf
    for lo, hi in zip(grid[:-1], grid[1:]):
        g = solve_relaxation(coef, PowerSplit(float(lo), float(p_tmax - lo)), params, noise, structure, tol)
        if g == -math.inf:
            break
        best = max(best, math.log2(1.0 + hi * max(g, 0.0) / noise.bob))
    return best


@dataclass
class SdrComparison:
    powers: PowerSplit
    grid: float          # best rate on the amplitude/phase grid
    extracted: float     # rate of the rank-one beamformer from the penalty loop
    relaxed: float       # rate bound from the relaxed gain
    inner_status: str


def sdr_vs_grid(ch, params, noise, phases=16, amplitudes=11):
    """Beamforming subproblem at the powers of the starting point, three ways.

    Returns None when the instance or the grid at those powers is infeasible.
    """
    from .optimizer import init_beamformer, power_inputs
    try:
        start = init_beamformer(params, ch, 0, noise)
    except InfeasibleInstance:
        return None
    powers = allocate_power(power_inputs(ch, start, params, noise))
    grid, _ = exhaustive_beamformer(ch, params, noise, phases, amplitudes, powers=powers)
    if grid == -math.inf:
        return None
    coef = build_coefficients(ch)
    res = penalty_loop(coef, powers, params, noise, start)
    extracted = rates(ch, res.beam, powers, noise).r_bb if res.beam is not None else math.nan
    gain = solve_relaxation(coef, powers, params, noise)
    relaxed = math.log2(1.0 + powers.p_b * max(gain, 0.0) / noise.bob)
    return SdrComparison(powers, grid, extracted, relaxed, res.status)


# --- conic solver ---------------------------------------------------------

def random_hermitian(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (z + z.conj().T) / 2.0


def lambda_max_sdp(h, tol=1e-8):
    """``max Tr(H X)`` subject to ``Tr X = 1``, ``X`` PSD."""
    n = h.shape[0]
    prob = conic.SdpProblem([n], sense="max")
    prob.objective = conic.LinearForm({0: h})
    prob.add_constraint({0: np.eye(n)}, sense="==", rhs=1.0, name="trace")
    return conic.solve(prob, tol=tol)


# --- quick suites ---------------------------------------------------------

@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _suite_detection(rng, n):
    worst_grid = worst_min = 0.0
    for _ in range(n):
        obs, noise = random_detection_instance(rng)
        d_star = dep(optimal_threshold(obs, noise), obs, noise)
        g, _ = dep_grid_min(obs, noise, 10_000)
        worst_grid = max(worst_grid, d_star - g)
        worst_min = max(worst_min, abs(min_dep(obs.phi, noise) - d_star))
    ok = worst_grid <= 1e-9 and worst_min <= 1e-12
    return ok, f"{n} instances, closed form minus grid <= {worst_grid:.2e}, min_dep gap {worst_min:.2e}"


def _suite_power(rng, n):
    worst = 0.0
    for _ in range(n):
        inp = random_power_instance(rng)
        split = allocate_power(inp)
        g, step = power_grid_oracle(inp, 100_000)
        worst = max(worst, (g - split.p_b) / step if g is not None else math.inf,
                    (split.p_b - (g if g is not None else 0.0)) / step - 1.0)
    return worst <= 1.0, f"{n} instances, worst offset from grid optimum {worst:.3f} grid steps"


def _suite_conic(rng, n):
    worst = 0.0
    for _ in range(n):
        h = random_hermitian(rng, int(rng.integers(2, 17)))
        sol = lambda_max_sdp(h)
        worst = max(worst, abs(sol.objective - np.linalg.eigvalsh(h)[-1]))
    return worst <= 1e-6, f"{n} Hermitian instances, worst lambda_max error {worst:.2e}"


def _suite_beamforming(rng, n):
    params = default_system(element_count=2, max_transmit_power=convert_db(30.0, "dBm"))
    noise = default_noise()
    base = int(rng.integers(2**31))
    close = bounded = total = k = 0
    while total < n and k < 50 * n:
        rec = sdr_vs_grid(sample_channels(params, trial_seed(base, k)), params, noise, phases=8, amplitudes=6)
        k += 1
        if rec is None:
            continue
        total += 1
        close += rec.extracted >= 0.98 * rec.grid
        bounded += rec.relaxed >= rec.grid
    ok = total == n and bounded == total and close >= 0.9 * total
    return ok, f"{total} M=2 instances: {close} within 2% of grid search, {bounded} bounded by relaxation"


SUITES = {
    "detection": _suite_detection,
    "power": _suite_power,
    "conic": _suite_conic,
    "beamforming": _suite_beamforming,
}


def run_suites(names=None, instances=20, seed=0) -> list[SuiteResult]:
    out = []
    for name in names or SUITES:
        rng = np.random.default_rng([seed, list(SUITES).index(name)])
        t0 = time.perf_counter()
        ok, detail = SUITES[name](rng, instances)
        out.append(SuiteResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out
