"""Passive beamforming by semidefinite relaxation with a rank-one penalty.

Each side of the surface is lifted to ``Q = conj(v) v^T`` where ``v`` is the
diagonal of the coefficient matrix, so the cascaded gain becomes
``Tr(Q A)`` with ``A = a a^H`` and ``a = conj(h_user) * h_ar``. The rank-one
requirement is enforced through the penalty ``eta(Q) = Tr(Q) - ||Q||_2``,
whose concave part is linearized at the previous iterate; the penalty
weights grow geometrically until both matrices are numerically rank one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import conic
from .detection import covert_lambda_bound
from .errors import ExtractionRefused, InfeasibleError, InvalidParameterError, SolverError
from .noma import PowerSplit, StarBeamformer, canonical_phase

# residual level at which a non-optimal solver exit is still usable
ACCEPT_RESIDUAL = 1e-6


@dataclass(frozen=True)
class SdrCoefficients:
    """Lifted channel data: ``A = a a^H``, ``B = b b^H``, ``c = |h_ar|^2``."""

    a_vec: np.ndarray
    b_vec: np.ndarray
    c: np.ndarray

    @property
    def A(self):
        return np.outer(self.a_vec, self.a_vec.conj())

    @property
    def B(self):
        return np.outer(self.b_vec, self.b_vec.conj())

    @property
    def element_count(self):
        return self.c.shape[0]


def build_coefficients(ch) -> SdrCoefficients:
    h_ar = np.asarray(ch.h_ar)
    return SdrCoefficients(
        a_vec=np.conj(ch.h_rb) * h_ar,
        b_vec=np.conj(ch.h_rc) * h_ar,
        c=np.abs(h_ar) ** 2,
    )


@dataclass(frozen=True)
class Structure:
    """Which elements serve each side, and whether amplitudes are shared.

    The STAR surface uses every element on both sides with
    ``beta_r + beta_t = 1``; the dual-RIS baseline dedicates the first half
    of the elements to reflection and the second half to transmission, each
    at full amplitude.
    """

    reflect: np.ndarray
    transmit: np.ndarray
    coupled: bool
    name: str

    @classmethod
    def star(cls, m):
        idx = np.arange(m)
        return cls(idx, idx, True, "star")

    @classmethod
    def dual_ris(cls, m):
        if m % 2:
            raise InvalidParameterError(f"the dual-RIS baseline needs an even element count, got {m}")
        return cls(np.arange(m // 2), np.arange(m // 2, m), False, "dual_ris")


def resolve_structure(structure, m) -> Structure:
    if isinstance(structure, Structure):
        return structure
    if structure == "star":
        return Structure.star(m)
    if structure in ("dual_ris", "baseline", "baseline-ris"):
        return Structure.dual_ris(m)
    raise InvalidParameterError(f"unknown structure {structure!r}")


def lift(beam: StarBeamformer, side: str) -> np.ndarray:
    v = beam.coefficients(side)
    return np.outer(np.conj(v), v)


def principal(q):
    """Largest eigenvalue and a unit eigenvector.

    With a repeated top eigenvalue the lowest-index eigenvector of
    ``numpy.linalg.eigh`` is used.
    """
    w, v = np.linalg.eigh(q)
    top = w[-1]
    k = int(np.argmax(w >= top - 1e-12 * max(1.0, abs(top))))
    return float(top), v[:, k]


def eta(q) -> float:
    """Rank-one gap ``Tr(Q) - ||Q||_2``; zero exactly when a PSD ``Q`` has rank at most one."""
    if q.size == 0:
        return 0.0
    return max(0.0, float(np.real(np.trace(q))) - float(np.linalg.eigvalsh(q)[-1]))


@dataclass(frozen=True)
class LinearizedPenalty:
    """Affine majorizer ``Q -> Tr(W Q) + const`` of ``eta`` built at an anchor matrix."""

    weight: np.ndarray
    const: float

    def __call__(self, q) -> float:
        return float(np.real(np.sum(np.conj(self.weight) * q))) + self.const


def linearized_penalty(q_prev) -> LinearizedPenalty:
    n = q_prev.shape[0]
    if not np.any(q_prev):
        return LinearizedPenalty(np.eye(n), 0.0)
    lam, v = principal(q_prev)
    vv = np.outer(v, v.conj())
    const = float(np.real(v.conj() @ q_prev @ v)) - lam
    return LinearizedPenalty(np.eye(n) - vv, const)


@dataclass
class SdrState:
    q_r: np.ndarray
    q_t: np.ndarray
    xi1: float
    xi2: float
    iteration: int = 0
    relaxed_gain: float = 0.0      # Tr(Q_r A)
    penalized_objective: float = 0.0
    eta_r: float = 0.0
    eta_t: float = 0.0
    sdp_status: str = ""
    history: list = field(default_factory=list)

    @property
    def beta_r(self):
        return np.real(np.diag(self.q_r)).copy()

    @property
    def beta_t(self):
        return np.real(np.diag(self.q_t)).copy()

    @property
    def violation(self) -> float:
        return max(self.eta_r, self.eta_t)


def initial_state(beam: StarBeamformer, coef: SdrCoefficients, structure, xi_ratio=1e-3) -> SdrState:
    """Lift ``beam`` and pick scale-relative starting penalty weights."""
    st = resolve_structure(structure, coef.element_count)
    q_r, q_t = _restrict_full(lift(beam, "reflect"), st.reflect), _restrict_full(lift(beam, "transmit"), st.transmit)
    gain0 = float(np.real(np.sum(np.conj(coef.A) * q_r)))
    scale = _objective_scale(coef, st)
    xi0 = xi_ratio * abs(gain0) / scale
    if xi0 <= 0:
        xi0 = xi_ratio
    return SdrState(q_r, q_t, xi0, xi0, relaxed_gain=gain0,
                    eta_r=eta(q_r[np.ix_(st.reflect, st.reflect)]),
                    eta_t=eta(q_t[np.ix_(st.transmit, st.transmit)]))


def _restrict_full(q, idx):
    out = np.zeros_like(q)
    out[np.ix_(idx, idx)] = q[np.ix_(idx, idx)]
    return out


def _objective_scale(coef, st):
    a = coef.a_vec[st.reflect]
    s = float(np.vdot(a, a).real)
    return s if s > 0 else 1.0


def build_sdp(coef: SdrCoefficients, p: PowerSplit, params, noise, state: SdrState, structure,
              backoff=0.0):
    """Penalized relaxed subproblem for fixed powers, linearized at ``state``.

    Gains are normalized by ``||a_r||^2`` (objective) and ``||b_t||^2``
    (public-user terms); returns ``(problem, scale_a)``. ``backoff`` tightens
    the SIC row by that relative amount so a beamformer extracted from a
    nearly rank-one solution still meets the ordering exactly. QoS and
    covertness need no such margin: the next power step re-solves them.
    """
    st = resolve_structure(structure, coef.element_count)
    ir, it = st.reflect, st.transmit
    nr, nt = len(ir), len(it)
    a_r, b_t = coef.a_vec[ir], coef.b_vec[it]
    sa = _objective_scale(coef, st)
    sb = float(np.vdot(b_t, b_t).real) or 1.0
    a_n = np.outer(a_r, a_r.conj()) / sa
    b_n = np.outer(b_t, b_t.conj()) / sb

    pen_r = linearized_penalty(state.q_r[np.ix_(ir, ir)])
    pen_t = linearized_penalty(state.q_t[np.ix_(it, it)])
    prob = conic.SdpProblem([nr, nt], sense="max")
    prob.objective = conic.LinearForm(
        {0: a_n - state.xi1 * pen_r.weight, 1: -state.xi2 * pen_t.weight},
        const=-state.xi1 * pen_r.const - state.xi2 * pen_t.const,
    )

    # SIC ordering at Bob
    wa, wb = noise.carol * sa, noise.bob * sb
    w = max(wa, wb)
    prob.add_constraint({0: (wa / w) * a_n, 1: -(1.0 + backoff) * (wb / w) * b_n}, sense=">=", rhs=0.0,
                        name="sic")

    # Carol's QoS
    q = 2.0 ** params.qos_rate - 1.0
    if q > 0:
        margin = p.p_c - q * p.p_b
        if margin <= 0:
            raise InfeasibleError("qos", "public power cannot meet the QoS rate against covert interference")
        prob.add_constraint({1: b_n}, sense=">=", rhs=q * noise.carol / (margin * sb), name="qos")

    # covertness, only when the reflect amplitudes are free
    if st.coupled and p.p_b > 0:
        cmax = float(np.max(coef.c[ir])) or 1.0
        rhs = covert_lambda_bound(params.covertness_level, noise) / (p.p_b * params.link_gain("rw"))
        prob.add_constraint({0: np.diag(coef.c[ir] / cmax)}, sense="<=", rhs=rhs / cmax, name="covert")

    for j in range(nr if st.coupled else 0):
        e = np.zeros((nr, nr))
        e[j, j] = 1.0
        f = np.zeros((nt, nt))
        f[j, j] = 1.0
        prob.add_constraint({0: e, 1: f}, sense="==", rhs=1.0, name=f"split{j}")
    if not st.coupled:
        for k, n in ((0, nr), (1, nt)):
            for j in range(n):
                e = np.zeros((n, n))
                e[j, j] = 1.0
                prob.add_constraint({k: e}, sense="==", rhs=1.0, name=f"unit{k}_{j}")
    return prob, sa


def solve_penalized_sdp(coef, p: PowerSplit, params, noise, state: SdrState,
                        structure="star", tol=1e-8, backoff=0.0) -> SdrState:
    """One penalized SDP solve; the result becomes the next linearization anchor."""
    st = resolve_structure(structure, coef.element_count)
    prob, sa = build_sdp(coef, p, params, noise, state, st, backoff)
    sol = conic.solve(prob, tol=tol)
    if sol.status == conic.INFEASIBLE:
        raise InfeasibleError("sdp", sol.message)
    if sol.status != conic.OPTIMAL and max(sol.primal_residual, sol.dual_residual, sol.gap) > ACCEPT_RESIDUAL:
        raise SolverError(sol.status, sol.message)
    m = coef.element_count
    q_r = np.zeros((m, m), dtype=complex)
    q_t = np.zeros((m, m), dtype=complex)
    q_r[np.ix_(st.reflect, st.reflect)] = sol.matrices[0]
    q_t[np.ix_(st.transmit, st.transmit)] = sol.matrices[1]
    gain = float(np.real(np.sum(np.conj(coef.A) * q_r)))
    return SdrState(
        q_r, q_t, state.xi1, state.xi2,
        iteration=state.iteration + 1,
        relaxed_gain=gain,
        penalized_objective=sol.objective,
        eta_r=eta(sol.matrices[0]),
        eta_t=eta(sol.matrices[1]),
        sdp_status=sol.status,
        history=state.history,
    )


def extract_beamformer(state: SdrState, structure="star", eps_hat=1e-5) -> StarBeamformer:
    """Phases from principal eigenvectors, amplitudes from the diagonals.

    Since ``Q = conj(v) v^T`` the principal eigenvector is proportional to
    ``conj(v)``, so element phases are minus its arguments.
    """
    if state.violation > eps_hat:
        raise ExtractionRefused(f"rank-one gap {state.violation:.3g} exceeds {eps_hat:.3g}")
    m = state.q_r.shape[0]
    st = resolve_structure(structure, m)
    phase_r = np.zeros(m)
    phase_t = np.zeros(m)
    for q, idx, phase in ((state.q_r, st.reflect, phase_r), (state.q_t, st.transmit, phase_t)):
        if len(idx):
            _, v = principal(q[np.ix_(idx, idx)])
            phase[idx] = -np.angle(v)
    if st.coupled:
        br = np.clip(state.beta_r, 0.0, 1.0)
        bt = np.clip(state.beta_t, 0.0, 1.0)
        br = np.clip(br + 0.5 * (1.0 - br - bt), 0.0, 1.0)
    else:
        br = np.zeros(m)
        br[st.reflect] = 1.0
    return StarBeamformer.from_split(br, canonical_phase(phase_r), canonical_phase(phase_t))


@dataclass
class PenaltyResult:
    state: SdrState
    beam: StarBeamformer | None
    status: str          # "converged", "rank-one-failure", "solver-failure"
    iterations: int
    message: str = ""


def penalty_loop(coef, p: PowerSplit, params, noise, beam_prev: StarBeamformer, structure="star",
                 eps_hat=1e-5, omega=5.0, max_inner=30, xi_ratio=1e-3, xi_cap=1e8, tol=1e-8,
                 backoff=0.0) -> PenaltyResult:
    """Inner loop: solve, measure the rank-one gap, grow the penalty weights."""
    if not omega > 1:
        raise InvalidParameterError("penalty scale omega must exceed 1")
    st = resolve_structure(structure, coef.element_count)
    state = initial_state(beam_prev, coef, st, xi_ratio)
    xi0 = state.xi1
    history = []
    for i in range(max_inner):
        try:
            state = solve_penalized_sdp(coef, p, params, noise, state, st, tol, backoff)
        except SolverError as exc:
            return PenaltyResult(state, None, "solver-failure", i, str(exc))
        history.append((state.xi1, state.relaxed_gain, state.eta_r, state.eta_t))
        state.history = history
        if state.violation <= eps_hat:
            return PenaltyResult(state, extract_beamformer(state, st, eps_hat), "converged", i + 1)
        state = replace(state, xi1=state.xi1 * omega, xi2=state.xi2 * omega)
        if state.xi1 > xi_cap * xi0:
            return PenaltyResult(state, None, "rank-one-failure", i + 1,
                                 f"penalty cap reached with rank-one gap {state.violation:.3g}")
    return PenaltyResult(state, None, "rank-one-failure", max_inner,
                         f"inner iteration cap reached with rank-one gap {state.violation:.3g}")


def solve_relaxation(coef, p: PowerSplit, params, noise, structure="star", tol=1e-8) -> float:
    """Largest relaxed gain ``Tr(Q_r A)`` at fixed powers, rank constraint dropped.

    Upper-bounds the gain of every feasible beamformer at these powers;
    returns ``-inf`` when the relaxation itself is infeasible.
    """
    st = resolve_structure(structure, coef.element_count)
    m = coef.element_count
    zero = np.zeros((m, m), dtype=complex)
    state = SdrState(zero, zero, 0.0, 0.0)
    try:
        return solve_penalized_sdp(coef, p, params, noise, state, st, tol).relaxed_gain
    except InfeasibleError:
        return -math.inf
