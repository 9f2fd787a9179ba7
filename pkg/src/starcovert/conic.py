"""Small dense semidefinite programs over Hermitian matrices.

Problems are stated over Hermitian PSD matrix variables plus one nonnegative
real vector variable, with real-linear objective and constraints
(``Re Tr(C X)`` terms). :func:`real_embedding` lifts them to a real
symmetric standard-form SDP, and :func:`solve` runs an infeasible-start
primal-dual interior-point method (HKM search direction with Mehrotra
predictor-corrector) on the lifted problem.

Embedding convention: an ``n x n`` Hermitian ``H`` becomes the ``2n x 2n``
real ``[[Re H, -Im H], [Im H, Re H]]``. Since ``<emb(C), emb(H)> = 2 Re Tr(CH)``
every matrix coefficient is halved after embedding so that constraint
right-hand sides and objective values are unchanged.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import InvalidParameterError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max-iterations"
NUMERICAL_FAILURE = "numerical-failure"

SENSES = ("==", "<=", ">=")


@dataclass
class LinearForm:
    """``sum_k Re Tr(mats[k] X_k) + vec . x + const``."""

    mats: dict = field(default_factory=dict)
    vec: np.ndarray | None = None
    const: float = 0.0

    def evaluate(self, matrices, vector=None) -> float:
        val = self.const
        for k, c in self.mats.items():
            val += float(np.real(np.sum(np.conj(c) * matrices[k])))
        if self.vec is not None:
            val += float(np.dot(self.vec, vector))
        return val


@dataclass
class Constraint:
    form: LinearForm
    sense: str
    rhs: float
    name: str = ""


@dataclass
class SdpProblem:
    """Maximize (or minimize) a linear objective over Hermitian PSD matrices and a nonnegative vector."""

    matrix_dims: list
    vector_dim: int = 0
    objective: LinearForm = field(default_factory=LinearForm)
    constraints: list = field(default_factory=list)
    sense: str = "max"

    def add_constraint(self, mats=None, vec=None, sense="==", rhs=0.0, name=""):
        self.constraints.append(Constraint(LinearForm(dict(mats or {}), vec), sense, float(rhs), name))

    def validate(self):
        if self.sense not in ("max", "min"):
            raise InvalidParameterError(f"sense must be 'max' or 'min', got {self.sense!r}")
        forms = [self.objective] + [c.form for c in self.constraints]
        for con in self.constraints:
            if con.sense not in SENSES:
                raise InvalidParameterError(f"constraint sense must be one of {SENSES}")
        for f in forms:
            for k, c in f.mats.items():
                n = self.matrix_dims[k]
                c = np.asarray(c)
                if c.shape != (n, n):
                    raise InvalidParameterError(f"coefficient for variable {k} has shape {c.shape}, need {(n, n)}")
                if not np.allclose(c, c.conj().T, atol=1e-12 * (1 + np.abs(c).max())):
                    raise InvalidParameterError(f"coefficient for variable {k} is not Hermitian")
            if f.vec is not None and np.shape(f.vec) != (self.vector_dim,):
                raise InvalidParameterError("vector coefficient has wrong length")


@dataclass
class SdpSolution:
    matrices: list
    vector: np.ndarray
    objective: float
    dual_objective: float
    status: str
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    duals: np.ndarray | None = None
    message: str = ""


def embed_hermitian(h):
    h = np.asarray(h)
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def unembed(x):
    """Hermitian matrix represented by the symmetric part of the structured subspace."""
    n = x.shape[0] // 2
    x11, x12, x21, x22 = x[:n, :n], x[:n, n:], x[n:, :n], x[n:, n:]
    h = 0.5 * ((x11 + x22) + 1j * (x21 - x12))
    return 0.5 * (h + h.conj().T)


@dataclass
class RealSdp:
    """``min <C, X> s.t. <A_i, X> = b_i, X in K`` with K a product of PSD and orthant blocks.

    ``blocks`` lists ``("s", n)`` or ``("l", n)``; ``c[k]`` and ``a[k]`` hold
    the block data (``a[k]`` stacked over constraints).
    """

    blocks: list
    c: list
    a: list
    b: np.ndarray
    sign: float = 1.0
    offset: float = 0.0
    n_hermitian: int = 0
    vector_dim: int = 0

    @property
    def m(self) -> int:
        return self.b.shape[0]


def real_embedding(p: SdpProblem) -> RealSdp:
    p.validate()
    n_ineq = sum(1 for c in p.constraints if c.sense != "==")
    n_lp = p.vector_dim + n_ineq
    m = len(p.constraints)
    sign = -1.0 if p.sense == "max" else 1.0

    blocks = [("s", 2 * n) for n in p.matrix_dims]
    c = [sign * 0.5 * embed_hermitian(p.objective.mats.get(k, np.zeros((n, n))))
         for k, n in enumerate(p.matrix_dims)]
    a = [np.zeros((m, 2 * n, 2 * n)) for n in p.matrix_dims]
    if n_lp:
        blocks.append(("l", n_lp))
        cl = np.zeros(n_lp)
        if p.objective.vec is not None:
            cl[:p.vector_dim] = sign * np.asarray(p.objective.vec, dtype=float)
        c.append(cl)
        a.append(np.zeros((m, n_lp)))
    b = np.zeros(m)
    slack = p.vector_dim
    for i, con in enumerate(p.constraints):
        for k, coef in con.form.mats.items():
            a[k][i] = 0.5 * embed_hermitian(coef)
        if con.form.vec is not None:
            a[-1][i, :p.vector_dim] = con.form.vec
        if con.sense == "<=":
            a[-1][i, slack] = 1.0
            slack += 1
        elif con.sense == ">=":
            a[-1][i, slack] = -1.0
            slack += 1
        b[i] = con.rhs - con.form.const
    return RealSdp(blocks, c, a, b, sign=sign, offset=p.objective.const,
                   n_hermitian=len(p.matrix_dims), vector_dim=p.vector_dim)


# ---------------------------------------------------------------------------
# block-vector helpers


def _inner(u, v):
    return sum(float(np.sum(x * y)) for x, y in zip(u, v))


def _norm(u):
    return math.sqrt(_inner(u, u))


def _amap(rs, x):
    out = np.zeros(rs.m)
    for (kind, _), ak, xk in zip(rs.blocks, rs.a, x):
        out += np.tensordot(ak, xk, axes=xk.ndim)
    return out


def _aadj(rs, y):
    return [np.tensordot(y, ak, axes=1) for ak in rs.a]


def _max_step(kind, x, dx, chol=None):
    """Largest alpha with x + alpha dx in the cone (inf if unbounded)."""
    if kind == "l":
        neg = dx < 0
        if not np.any(neg):
            return math.inf
        return float(np.min(-x[neg] / dx[neg]))
    lo = chol if chol is not None else linalg.cholesky(x, lower=True)
    t = linalg.solve_triangular(lo, dx, lower=True)
    t = linalg.solve_triangular(lo, t.T, lower=True)
    lam = np.linalg.eigvalsh(0.5 * (t + t.T))[0]
    return math.inf if lam >= 0 else -1.0 / lam


def _min_eig(kind, x):
    return float(np.min(x)) if kind == "l" else float(np.linalg.eigvalsh(x)[0])


class _Ipm:
    def __init__(self, rs: RealSdp, tol, max_iter):
        self.tol, self.max_iter = tol, max_iter
        # row and objective equilibration
        norms = np.sqrt(sum(np.sum(ak.reshape(rs.m, -1) ** 2, axis=1) for ak in rs.a)) if rs.m else np.zeros(0)
        self.row_scale = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
        cn = _norm(rs.c)
        self.c_scale = cn if cn > 0 else 1.0
        d = self.row_scale
        self.rs = RealSdp(
            rs.blocks,
            [ck / self.c_scale for ck in rs.c],
            [ak * d.reshape((-1,) + (1,) * (ak.ndim - 1)) for ak in rs.a],
            rs.b * d,
        )
        self.orig = rs

    def initial_point(self):
        rs = self.rs
        x, s = [], []
        for k, (kind, n) in enumerate(rs.blocks):
            ak = rs.a[k].reshape(rs.m, -1)
            anorm = np.sqrt(np.sum(ak ** 2, axis=1)) if rs.m else np.zeros(1)
            xi = max(10.0, math.sqrt(n), n * float(np.max((1 + np.abs(rs.b)) / (1 + anorm))) if rs.m else 10.0)
            eta = max(10.0, math.sqrt(n), float(np.max(anorm)) if rs.m else 0.0, float(np.linalg.norm(rs.c[k])))
            if kind == "s":
                x.append(xi * np.eye(n))
                s.append(eta * np.eye(n))
            else:
                x.append(np.full(n, xi))
                s.append(np.full(n, eta))
        return x, np.zeros(rs.m), s

    def _direction(self, x, s, sinv, rp, rd, sigma_mu, corr):
        """HKM direction. ``corr`` holds the Mehrotra second-order term per block (or None)."""
        rs = self.rs
        m = rs.m
        schur = np.zeros((m, m))
        base = []
        for k, (kind, _) in enumerate(rs.blocks):
            ak, xk, si, rdk = rs.a[k], x[k], sinv[k], rd[k]
            if kind == "s":
                t = np.matmul(np.matmul(xk, ak), si)
                schur += np.tensordot(ak, t, axes=([1, 2], [1, 2]))
                r = sigma_mu * si - xk - xk @ rdk @ si
                if corr is not None:
                    r -= corr[k] @ si
            else:
                w = xk * si
                schur += (ak * w) @ ak.T
                r = sigma_mu * si - xk - w * rdk
                if corr is not None:
                    r -= corr[k] * si
            base.append(r)
        rhs = rp - _amap(rs, base)
        schur = 0.5 * (schur + schur.T)
        try:
            dy = linalg.cho_solve(linalg.cho_factor(schur, lower=True), rhs)
        except linalg.LinAlgError:
            dy = np.linalg.lstsq(schur, rhs, rcond=None)[0]
        aty = _aadj(rs, dy)
        dx, ds = [], []
        for k, (kind, _) in enumerate(rs.blocks):
            dsk = rd[k] - aty[k]
            if kind == "s":
                dxk = base[k] + x[k] @ aty[k] @ sinv[k]
                dxk = 0.5 * (dxk + dxk.T)
            else:
                dxk = base[k] + x[k] * aty[k] * sinv[k]
            dx.append(dxk)
            ds.append(dsk)
        return dx, dy, ds

    def _steps(self, x, s, dx, ds, cx, cs):
        ap = ad = math.inf
        for k, (kind, _) in enumerate(self.rs.blocks):
            ap = min(ap, _max_step(kind, x[k], dx[k], cx[k]))
            ad = min(ad, _max_step(kind, s[k], ds[k], cs[k]))
        return ap, ad

    def residuals(self, x, y, s):
        rs = self.rs
        rp = rs.b - _amap(rs, x)
        aty = _aadj(rs, y)
        rd = [ck - ak - sk for ck, ak, sk in zip(rs.c, aty, s)]
        pobj = _inner(rs.c, x)
        dobj = float(rs.b @ y)
        pinf = float(np.linalg.norm(rp)) / (1 + float(np.linalg.norm(rs.b)))
        dinf = _norm(rd) / (1 + _norm(rs.c))
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        return rp, rd, pobj, dobj, pinf, dinf, gap

    def infeasibility(self, x, y):
        """Farkas-type certificates on the current iterate."""
        rs = self.rs
        by = float(rs.b @ y)
        if by > 0:
            aty = _aadj(rs, y)
            worst = max(_max_eig(kind, ak) for (kind, _), ak in zip(rs.blocks, aty))
            if worst <= 1e-9 * by:
                return "primal infeasible: found y with A^T y <= 0 and b.y > 0"
        cx = _inner(rs.c, x)
        if cx < 0:
            ax = _amap(rs, x)
            if float(np.linalg.norm(ax)) <= 1e-9 * -cx and min(
                    _min_eig(kind, xk) for (kind, _), xk in zip(rs.blocks, x)) >= 0:
                return "dual infeasible: found a primal ray with negative cost"
        return None

    def run(self):
        rs = self.rs
        n_total = sum(n for _, n in rs.blocks)
        x, y, s = self.initial_point()
        best = None
        status, message = MAX_ITERATIONS, "iteration cap reached"
        it = 0
        stalls = 0
        for it in range(1, self.max_iter + 1):
            rp, rd, pobj, dobj, pinf, dinf, gap = self.residuals(x, y, s)
            score = max(pinf, dinf, gap)
            if best is None or score < best[0]:
                best = (score, [a.copy() for a in x], y.copy(), [a.copy() for a in s], pinf, dinf, gap)
            if pinf <= self.tol and dinf <= self.tol and gap <= self.tol:
                status, message = OPTIMAL, "converged"
                break
            cert = self.infeasibility(x, y)
            if cert is not None:
                status, message = INFEASIBLE, cert
                break
            mu = _inner(x, s) / n_total
            try:
                cx = [linalg.cholesky(xk, lower=True) if kind == "s" else None
                      for (kind, _), xk in zip(rs.blocks, x)]
                cs = [linalg.cholesky(sk, lower=True) if kind == "s" else None
                      for (kind, _), sk in zip(rs.blocks, s)]
            except linalg.LinAlgError:
                status, message = NUMERICAL_FAILURE, "iterate lost positive definiteness"
                break
            sinv = []
            for (kind, n), sk, ck in zip(rs.blocks, s, cs):
                if kind == "s":
                    li = linalg.solve_triangular(ck, np.eye(n), lower=True)
                    sinv.append(li.T @ li)
                else:
                    sinv.append(1.0 / sk)
            # predictor
            dx, dy, ds = self._direction(x, s, sinv, rp, rd, 0.0, None)
            ap, ad = self._steps(x, s, dx, ds, cx, cs)
            ap, ad = min(1.0, ap), min(1.0, ad)
            mu_aff = _inner([a + ap * b for a, b in zip(x, dx)], [a + ad * b for a, b in zip(s, ds)]) / n_total
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
            corr = [dxk @ dsk if kind == "s" else dxk * dsk
                    for (kind, _), dxk, dsk in zip(rs.blocks, dx, ds)]
            # corrector
            dx, dy, ds = self._direction(x, s, sinv, rp, rd, sigma * mu, corr)
            ap, ad = self._steps(x, s, dx, ds, cx, cs)
            gamma = 0.9 + 0.09 * min(1.0, ap, ad)
            ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)
            if ap < 1e-10 and ad < 1e-10:
                stalls += 1
                if stalls >= 3:
                    status, message = NUMERICAL_FAILURE, "step lengths collapsed"
                    break
            else:
                stalls = 0
            x = [a + ap * b for a, b in zip(x, dx)]
            y = y + ad * dy
            s = [a + ad * b for a, b in zip(s, ds)]
            if not all(np.all(np.isfinite(a)) for a in x + s) or not np.all(np.isfinite(y)):
                status, message = NUMERICAL_FAILURE, "non-finite iterate"
                break
        if status == OPTIMAL or status == INFEASIBLE:
            _, _, _, _, pinf, dinf, gap = self.residuals(x, y, s)
        else:
            _, x, y, s, pinf, dinf, gap = best
        return x, y, s, status, message, pinf, dinf, gap, it


def _max_eig(kind, x):
    return float(np.max(x)) if kind == "l" else float(np.linalg.eigvalsh(x)[-1])


def _psd_project(h):
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def solve(p: SdpProblem, tol: float = 1e-8, max_iter: int = 200) -> SdpSolution:
    """Solve ``p``; on ``optimal`` status all normalized residuals are at most ``tol``.

    Returned matrices are projected onto the PSD cone (eigenvalues clipped at 0).
    """
    if not tol > 0:
        raise InvalidParameterError("tol must be positive")
    rs = real_embedding(p)
    ipm = _Ipm(rs, tol, max_iter)
    x, y, s, status, message, pinf, dinf, gap, it = ipm.run()
    mats = [_psd_project(unembed(x[k])) for k in range(rs.n_hermitian)]
    vec = np.asarray(x[-1][:rs.vector_dim]) if rs.vector_dim else np.zeros(0)
    # undo equilibration: objective back in the caller's units and sense
    pobj = _inner(ipm.rs.c, x) * ipm.c_scale
    duals = y * ipm.row_scale * ipm.c_scale
    dobj = float(rs.b @ duals)
    objective = rs.sign * pobj + rs.offset
    dual_objective = rs.sign * dobj + rs.offset
    return SdpSolution(mats, vec, objective, dual_objective, status, pinf, dinf, gap, it,
                       duals=rs.sign * duals, message=message)


# ---------------------------------------------------------------------------
# debug dumps: JSON text with complex matrices stored as {"re": [...], "im": [...]}


def _enc(a):
    a = np.asarray(a)
    return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}


def _dec(d):
    return np.asarray(d["re"]) + 1j * np.asarray(d["im"])


def _form_to_dict(f: LinearForm):
    return {
        "mats": {str(k): _enc(v) for k, v in f.mats.items()},
        "vec": None if f.vec is None else np.asarray(f.vec, dtype=float).tolist(),
        "const": f.const,
    }


def _form_from_dict(d):
    vec = None if d["vec"] is None else np.asarray(d["vec"], dtype=float)
    return LinearForm({int(k): _dec(v) for k, v in d["mats"].items()}, vec, d["const"])


def dump_problem(p: SdpProblem, path):
    doc = {
        "format": "starcovert-sdp/1",
        "sense": p.sense,
        "matrix_dims": list(p.matrix_dims),
        "vector_dim": p.vector_dim,
        "objective": _form_to_dict(p.objective),
        "constraints": [
            {"name": c.name, "sense": c.sense, "rhs": c.rhs, "form": _form_to_dict(c.form)}
            for c in p.constraints
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_problem(path) -> SdpProblem:
    doc = json.loads(Path(path).read_text())
    p = SdpProblem(doc["matrix_dims"], doc["vector_dim"], _form_from_dict(doc["objective"]),
                   sense=doc["sense"])
    for c in doc["constraints"]:
        p.constraints.append(Constraint(_form_from_dict(c["form"]), c["sense"], c["rhs"], c["name"]))
    return p
