"""Log-barrier interior point method for mixed linear / log-sum-exp programs.

Problems have the form::

    minimize    c @ z
    subject to  G z <= h
                E z == f
                log(sum_i exp(a_i @ z + b_i)) <= q @ z + r      (LSE rows)
                sum_i exp(a_i @ z + b_i)      <= q @ z + r      (EXP rows)

Both smooth row types are convex and defined everywhere, so the barrier is
well defined for any strictly feasible point and phase 1 can start anywhere.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

LSE, EXP = 0, 1


class ConvexStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE_START = "infeasible_start"
    NUMERICAL_FAILURE = "numerical_failure"


class ConvexProblem:
    """Incrementally built problem; variables are referenced by index."""

    def __init__(self):
        self.names: list = []
        self.log_domain: list = []
        self.cost: dict = {}
        self._lin: list = []       # (coeffs, rhs)
        self._eq: list = []        # (coeffs, rhs)
        self._smooth: list = []    # (kind, [(coeffs, const)], linear coeffs, const)

    @property
    def n(self) -> int:
        return len(self.names)

    def add_var(self, name=None, log_domain: bool = False) -> int:
        self.names.append(name)
        self.log_domain.append(log_domain)
        return self.n - 1

    def minimize(self, coeffs: dict):
        self.cost = dict(coeffs)

    def add_linear(self, coeffs: dict, rhs: float):
        """``sum coeffs[j] z_j <= rhs``."""
        self._lin.append((dict(coeffs), float(rhs)))

    def add_equality(self, coeffs: dict, rhs: float):
        self._eq.append((dict(coeffs), float(rhs)))

    def add_lse(self, terms, linear: dict | None = None, const: float = 0.0):
        """``log sum exp(terms) <= linear @ z + const``; each term is
        ``(coeffs, offset)``."""
        self._smooth.append((LSE, list(terms), dict(linear or {}), float(const)))

    def add_exp(self, terms, linear: dict | None = None, const: float = 0.0):
        """``sum exp(terms) <= linear @ z + const``."""
        self._smooth.append((EXP, list(terms), dict(linear or {}), float(const)))

    def compile(self) -> "_Compiled":
        return _Compiled(self)


def _rows_to_csr(rows, n):
    data, ind, ptr = [], [], [0]
    for coeffs in rows:
        for j, v in coeffs.items():
            if v:
                ind.append(j)
                data.append(v)
        ptr.append(len(ind))
    return sp.csr_matrix((np.array(data, float), np.array(ind, int), np.array(ptr, int)), shape=(len(rows), n))


DENSE_LIMIT = 4_000_000  # entries; above this the term matrices stay sparse


def _scale_rows(M, w):
    return M * w[:, None] if isinstance(M, np.ndarray) else sp.diags(w) @ M


def _gram(M, w):
    """``M.T @ diag(w) @ M`` as a dense array."""
    out = M.T @ _scale_rows(M, w)
    return out if isinstance(out, np.ndarray) else out.toarray()


class _Compiled:
    def __init__(self, p: ConvexProblem):
        n = p.n
        self.n = n
        self.c = np.zeros(n)
        for j, v in p.cost.items():
            self.c[j] += v
        terms, owner, offs = [], [], []
        kinds, lin, const = [], [], []
        for k, (kind, tt, q, r) in enumerate(p._smooth):
            if not tt:
                raise ValueError(f"smooth constraint {k} has no exponential terms")
            kinds.append(kind)
            lin.append(q)
            const.append(r)
            for coeffs, off in tt:
                terms.append(coeffs)
                owner.append(k)
                offs.append(off)
        K, T = len(kinds), len(terms)
        dense = (T + K + len(p._lin)) * max(n, 1) <= DENSE_LIMIT
        conv = (lambda M: M.toarray()) if dense else (lambda M: M)
        self.G = conv(_rows_to_csr([r[0] for r in p._lin], n))
        self.h = np.array([r[1] for r in p._lin], float)
        self.E = _rows_to_csr([r[0] for r in p._eq], n).toarray()
        self.f = np.array([r[1] for r in p._eq], float)
        self.A = conv(_rows_to_csr(terms, n))
        self.b = np.array(offs, float)
        self.owner = np.array(owner, int)
        self.kind = np.array(kinds, int)
        self.Q = conv(_rows_to_csr(lin, n))
        self.r = np.array(const, float)
        S = sp.csr_matrix((np.ones(T), (self.owner, np.arange(T))), shape=(K, T))
        self.S = S.toarray() if dense else S
        self.is_lse_term = self.kind[self.owner] == LSE if T else np.zeros(0, bool)
        self.any_lse = bool(self.is_lse_term.any())

    @property
    def n_ineq(self) -> int:
        return self.G.shape[0] + len(self.kind)

    def smooth_values(self, z):
        """Values ``g_k(z)`` of the smooth rows and per-term weights
        (softmax weights for LSE rows, raw exponentials for EXP rows)."""
        K = len(self.kind)
        if K == 0:
            return np.zeros(0), np.zeros(0)
        u = self.A @ z + self.b
        m = np.full(K, -np.inf)
        np.maximum.at(m, self.owner, u)
        m = np.where(self.kind == LSE, m, 0.0)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            w = np.exp(u - m[self.owner])
            s = np.bincount(self.owner, weights=w, minlength=K)
            head = np.where(self.kind == LSE, m + np.log(s), s)
            omega = np.where(self.is_lse_term, w / s[self.owner], w)
        g = head - (self.Q @ z) - self.r
        return g, omega

    def smooth_jacobian(self, omega):
        return self.S @ _scale_rows(self.A, omega) - self.Q

    def constraint_values(self, z):
        g, _ = self.smooth_values(z)
        return np.concatenate([self.G @ z - self.h, g])

    def barrier(self, z, t):
        g, _ = self.smooth_values(z)
        s = self.h - self.G @ z
        if np.any(g >= 0) or np.any(s <= 0) or not np.all(np.isfinite(g)):
            return np.inf
        return t * (self.c @ z) - np.log(-g).sum() - np.log(s).sum()

    def derivatives(self, z, t):
        g, omega = self.smooth_values(z)
        s = self.h - self.G @ z
        grad = t * self.c + self.G.T @ (1.0 / s)
        H = _gram(self.G, 1.0 / s ** 2) if self.G.shape[0] else np.zeros((self.n, self.n))
        if len(g):
            J = self.smooth_jacobian(omega)
            inv = 1.0 / (-g)
            grad = grad + J.T @ inv
            H += _gram(J, inv ** 2)
            H += _gram(self.A, omega * inv[self.owner])
            if self.any_lse:
                Jp = self.S @ _scale_rows(self.A, np.where(self.is_lse_term, omega, 0.0))
                H -= _gram(Jp, np.where(self.kind == LSE, inv, 0.0))
        return np.asarray(grad).ravel(), H

    def max_violation(self, z) -> float:
        v = self.constraint_values(z)
        eq = np.abs(self.E @ z - self.f) if len(self.f) else np.zeros(0)
        return float(max(v.max(initial=-np.inf), eq.max(initial=0.0), 0.0))


def check_derivatives(P: _Compiled, z, t: float = 1.0, h: float = 1e-6) -> dict:
    """Compare analytic barrier derivatives with central differences.

    Returns the relative error of the gradient (against differences of the
    barrier) and of the Hessian (against differences of the gradient), each
    measured as ``max|analytic - numeric| / max(1, max|analytic|)``.
    """
    z = np.asarray(z, float)
    grad, H = P.derivatives(z, t)
    g_num = np.empty_like(z)
    H_num = np.empty_like(H)
    for j in range(z.size):
        e = np.zeros_like(z)
        e[j] = h
        g_num[j] = (P.barrier(z + e, t) - P.barrier(z - e, t)) / (2 * h)
        H_num[:, j] = (P.derivatives(z + e, t)[0] - P.derivatives(z - e, t)[0]) / (2 * h)
    rel = lambda a, b: float(np.abs(a - b).max() / max(1.0, np.abs(a).max()))  # noqa: E731
    return {"gradient": rel(grad, g_num), "hessian": rel(H, H_num)}


@dataclass
class ConvexSolution:
    status: ConvexStatus
    z: np.ndarray
    objective: float
    max_violation: float
    kkt_residual: float = np.nan
    stage_objectives: list = field(default_factory=list)
    newton_steps: int = 0

    @property
    def ok(self) -> bool:
        return self.status is ConvexStatus.OPTIMAL


def _newton_step(H, grad, E):
    n = H.shape[0]
    H = H + np.eye(n) * (1e-12 * (1.0 + np.abs(np.diag(H)).max(initial=0.0)))
    if E.shape[0]:
        K = np.block([[H, E.T], [E, np.zeros((E.shape[0], E.shape[0]))]])
        rhs = np.concatenate([-grad, np.zeros(E.shape[0])])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        return sol[:n], sol[n:]
    try:
        L = np.linalg.cholesky(H)
        dz = -np.linalg.solve(L.T, np.linalg.solve(L, grad))
    except np.linalg.LinAlgError:
        try:
            dz = np.linalg.solve(H, -grad)
        except np.linalg.LinAlgError:
            dz = np.linalg.lstsq(H, -grad, rcond=None)[0]
    return dz, np.zeros(0)


def _center(P: _Compiled, z, t, alpha=0.3, beta=0.5, tol=1e-10, max_steps=200, stop=None):
    """Damped Newton on the barrier at parameter ``t``."""
    steps = 0
    nu = np.zeros(P.E.shape[0])
    for _ in range(max_steps):
        grad, H = P.derivatives(z, t)
        dz, nu = _newton_step(H, grad, P.E)
        if not np.all(np.isfinite(dz)):
            return z, nu, steps, False
        dec = -grad @ dz
        if dec / 2 <= tol:
            return z, nu, steps, True
        f0 = P.barrier(z, t)
        slack = 1e-13 * (1.0 + abs(f0))  # roundoff allowance at large t
        step = 1.0
        while True:
            cand = z + step * dz
            f1 = P.barrier(cand, t)
            if f1 <= f0 - alpha * step * dec + slack:
                break
            step *= beta
            if step < 1e-10:
                return z, nu, steps, dec / 2 <= 1e-6
        z = cand
        steps += 1
        if stop is not None and stop(z):
            return z, nu, steps, True
    return z, nu, steps, True


def _project_equalities(P: _Compiled, z):
    if not len(P.f):
        return z
    r = P.f - P.E @ z
    return z + np.linalg.lstsq(P.E, r, rcond=None)[0]


def _phase_one(p: ConvexProblem, z0, margin=1e-7):
    """Find a strictly feasible point by minimizing a shared slack."""
    P = p.compile()
    viol = P.constraint_values(z0)
    q = ConvexProblem()
    q.names = list(p.names) + ["_slack"]
    q.log_domain = list(p.log_domain) + [False]
    sig = p.n
    q.cost = {sig: 1.0}
    q._lin = [({**co, sig: co.get(sig, 0.0) - 1.0}, rhs) for co, rhs in p._lin]
    q._lin.append(({sig: -1.0}, 1.0))
    q._eq = list(p._eq)
    q._smooth = [(kind, tt, {**lin, sig: lin.get(sig, 0.0) + 1.0}, r) for kind, tt, lin, r in p._smooth]
    Q = q.compile()
    z = np.concatenate([z0, [max(viol.max(initial=0.0), 0.0) + 1.0]])

    def done(zz):
        return zz[-1] < -margin

    t = 1.0
    for _ in range(12):
        z, _, _, ok = _center(Q, z, t, stop=done)
        if done(z) or not ok:
            break
        t *= 10.0
    return z[:-1], z[-1]


def solve_convex(p: ConvexProblem, start, t0: float = 1.0, t_max: float = 1e8, factor: float = 10.0,
                 alpha: float = 0.3, beta: float = 0.5) -> ConvexSolution:
    """Barrier method.

    The barrier weight is ``mu`` per inequality: centering runs at
    ``t = mu * n_ineq`` for ``mu = t0, t0*factor, ...`` up to ``t_max``, so
    the final duality gap is about ``1 / t_max`` whatever the problem size.
    """
    P = p.compile()
    z = _project_equalities(P, np.asarray(start, float).copy())
    if not np.all(np.isfinite(P.constraint_values(z))):
        return ConvexSolution(ConvexStatus.INFEASIBLE_START, z, np.nan, np.inf)
    if P.n_ineq and P.constraint_values(z).max() >= 0:
        z, slack = _phase_one(p, z)
        if P.constraint_values(z).max(initial=-1) >= 0:
            log.info("phase 1 could not reach the interior (slack %.3g)", slack)
            return ConvexSolution(ConvexStatus.INFEASIBLE_START, z, float(P.c @ z), P.max_violation(z))
    if P.n_ineq == 0:
        grad = P.c
        if np.linalg.norm(grad) > 0 and not len(P.f):
            return ConvexSolution(ConvexStatus.NUMERICAL_FAILURE, z, -np.inf, 0.0)
    scale = max(P.n_ineq, 1)
    mu = t0
    stages, steps = [], 0
    best = z
    nu = np.zeros(P.E.shape[0])
    while True:
        t = mu * scale
        z_new, nu, k, ok = _center(P, z, t, alpha, beta)
        steps += k
        if not np.isfinite(P.barrier(z_new, t)):
            log.warning("barrier left the domain at t=%g", t)
            return ConvexSolution(ConvexStatus.NUMERICAL_FAILURE, best, float(P.c @ best), P.max_violation(best),
                                  stage_objectives=stages, newton_steps=steps)
        z = z_new
        best = z
        stages.append(float(P.c @ z))
        if not ok:
            return ConvexSolution(ConvexStatus.NUMERICAL_FAILURE, z, stages[-1], P.max_violation(z),
                                  stage_objectives=stages, newton_steps=steps)
        if mu >= t_max:
            break
        mu *= factor
    grad, _ = P.derivatives(z, t)
    resid = grad + (P.E.T @ nu if len(nu) else 0.0)
    kkt = float(np.linalg.norm(resid) / t / (1.0 + np.linalg.norm(P.c)))
    return ConvexSolution(ConvexStatus.OPTIMAL, z, float(P.c @ z), P.max_violation(z), kkt, stages, steps)
