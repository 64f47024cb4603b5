"""Dense two-phase primal simplex.

Every linear program in the package (slave LP, OPTU, certificate LP) goes
through :func:`solve_lp`.  Duals are reported as shadow prices, i.e. the
derivative of the optimal objective with respect to each row's right-hand
side, for both minimization and maximization.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7

LE, EQ, GE = "<=", "=", ">="


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


class LpError(Exception):
    pass


@dataclass
class LpProblem:
    c: np.ndarray
    A: np.ndarray
    senses: list
    b: np.ndarray
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    maximize: bool = False

    def __post_init__(self):
        self.c = np.asarray(self.c, float).ravel()
        n = self.c.size
        self.A = np.asarray(self.A, float).reshape(-1, n)
        self.b = np.asarray(self.b, float).ravel()
        self.senses = list(self.senses)
        m = self.A.shape[0]
        if self.b.size != m or len(self.senses) != m:
            raise LpError(f"dimension mismatch: A has {m} rows, b {self.b.size}, senses {len(self.senses)}")
        if any(s not in (LE, EQ, GE) for s in self.senses):
            raise LpError(f"unknown relation in {set(self.senses)}")
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, float).ravel()
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, float).ravel()
        if self.lb.size != n or self.ub.size != n:
            raise LpError("bound vectors do not match the number of columns")
        for arr in (self.c, self.A, self.b):
            if not np.all(np.isfinite(arr)):
                raise LpError("non-finite coefficient")
        if np.any(self.lb > self.ub):
            raise LpError("lower bound above upper bound")

    @property
    def shape(self):
        return self.A.shape


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float = np.nan
    duals: np.ndarray | None = None
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Tableau:
    """Standard-form tableau ``B^-1 [A | I_art] , B^-1 b`` with basis list."""

    def __init__(self, A, b, basis, n_real):
        self.T = A.copy()
        self.rhs = b.copy()
        self.basis = list(basis)
        self.n_real = n_real
        self.iterations = 0
        self.degenerate = 0
        self.bland = False

    def pivot(self, r, q):
        T = self.T
        piv = T[r, q]
        T[r] /= piv
        self.rhs[r] /= piv
        col = T[:, q].copy()
        col[r] = 0.0
        nz = np.abs(col) > 0
        if nz.any():
            T[nz] -= np.outer(col[nz], T[r])
            self.rhs[nz] -= col[nz] * self.rhs[r]
        T[:, q] = 0.0
        T[r, q] = 1.0
        self.basis[r] = q
        self.iterations += 1

    def run(self, cost, allowed, max_iter, bland_after):
        """Minimize ``cost`` over the current tableau.  Returns a status."""
        m = len(self.basis)
        while True:
            if self.iterations >= max_iter:
                return LpStatus.NUMERICAL_FAILURE
            cb = cost[self.basis]
            red = cost - cb @ self.T if m else cost.copy()
            red[~allowed] = 0.0
            red[self.basis] = 0.0
            cand = np.flatnonzero(red < -PIVOT_TOL)
            if cand.size == 0:
                return LpStatus.OPTIMAL
            if self.bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmin(red[cand])])
            col = self.T[:, q]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return LpStatus.UNBOUNDED
            ratios = self.rhs[rows] / col[rows]
            best = ratios.min()
            tied = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
            if self.bland:
                r = int(min(tied, key=lambda i: self.basis[i]))
            else:
                r = int(tied[np.argmax(col[tied])])
            if best <= PIVOT_TOL:
                self.degenerate += 1
                if not self.bland and self.degenerate > bland_after:
                    log.debug("simplex: switching to Bland's rule after %d degenerate pivots", self.degenerate)
                    self.bland = True
            self.pivot(r, q)


def _standardize(p: LpProblem):
    """Rewrite as ``min c'z, A'z = b', z >= 0``.

    Returns the standard data plus a map back to the original variables:
    ``x = offset + M @ z[:n_struct]``.
    """
    n = p.c.size
    cols, signs, offset = [], [], np.zeros(n)
    extra_rows = []
    for j in range(n):
        lo, hi = p.lb[j], p.ub[j]
        if np.isfinite(lo):
            offset[j] = lo
            cols.append(j)
            signs.append(1.0)
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append(j)
            signs.append(-1.0)
        else:
            cols.append(j)
            signs.append(1.0)
            cols.append(j)
            signs.append(-1.0)
    k = len(cols)
    M = np.zeros((n, k))
    M[cols, np.arange(k)] = signs
    sense = -1.0 if p.maximize else 1.0
    c = sense * (p.c @ M)
    A = p.A @ M
    b = p.b - p.A @ offset
    senses = list(p.senses)
    if extra_rows:
        E = np.zeros((len(extra_rows), k))
        for i, (col, ub) in enumerate(extra_rows):
            E[i, col] = 1.0
        A = np.vstack([A, E])
        b = np.concatenate([b, [ub for _, ub in extra_rows]])
        senses += [LE] * len(extra_rows)
    m = A.shape[0]
    n_slack = sum(s != EQ for s in senses)
    S = np.zeros((m, n_slack))
    j = 0
    for i, s in enumerate(senses):
        if s == LE:
            S[i, j] = 1.0
            j += 1
        elif s == GE:
            S[i, j] = -1.0
            j += 1
    A = np.hstack([A, S])
    c = np.concatenate([c, np.zeros(n_slack)])
    flip = b < 0
    A[flip] *= -1
    b = np.where(flip, -b, b)
    return A, b, c, M, offset, flip, k


def solve_lp(p: LpProblem, max_iter: int | None = None) -> LpSolution:
    """Solve ``p``; deterministic for identical input."""
    A, b, c, M, offset, flip, k = _standardize(p)
    m, N = A.shape
    m_orig = p.A.shape[0]
    if max_iter is None:
        max_iter = 50 * (m + N) + 1000
    bland_after = 10 * (m + N)

    # initial basis: a slack with +1 where available, else an artificial
    basis = []
    art_rows = []
    unit_col = np.abs(A).sum(axis=0) == 1.0
    for i in range(m):
        cand = np.flatnonzero((A[i] == 1.0) & unit_col)
        cand = cand[cand >= k]
        if cand.size:
            basis.append(int(cand[0]))
        else:
            basis.append(N + len(art_rows))
            art_rows.append(i)
    n_art = len(art_rows)
    Art = np.zeros((m, n_art))
    Art[art_rows, np.arange(n_art)] = 1.0
    tab = _Tableau(np.hstack([A, Art]), b, basis, N)
    total = N + n_art

    if n_art:
        cost1 = np.concatenate([np.zeros(N), np.ones(n_art)])
        status = tab.run(cost1, np.ones(total, bool), max_iter, bland_after)
        if status is LpStatus.NUMERICAL_FAILURE:
            return LpSolution(status, iterations=tab.iterations)
        infeas = float(cost1[tab.basis] @ tab.rhs)
        if infeas > FEAS_TOL * (1 + np.abs(b).max(initial=0.0)):
            return LpSolution(LpStatus.INFEASIBLE, iterations=tab.iterations, info={"phase1": infeas})
        # drive remaining artificials out of the basis
        keep = np.ones(m, bool)
        for i in range(m):
            if tab.basis[i] >= N:
                row = tab.T[i, :N]
                j = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if j.size:
                    tab.pivot(i, int(j[np.argmax(np.abs(row[j]))]))
                else:
                    keep[i] = False
        if not keep.all():
            tab.T = tab.T[keep]
            tab.rhs = tab.rhs[keep]
            tab.basis = [bi for bi, kp in zip(tab.basis, keep) if kp]
        rows_kept = np.flatnonzero(keep)
    else:
        rows_kept = np.arange(m)

    cost2 = np.concatenate([c, np.zeros(n_art)])
    allowed = np.zeros(total, bool)
    allowed[:N] = True
    status = tab.run(cost2, allowed, max_iter, bland_after)
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status, iterations=tab.iterations)

    basis = np.array(tab.basis)
    B = A[rows_kept][:, basis]
    z = np.zeros(N)
    try:
        zb = np.linalg.solve(B, b[rows_kept])
        y_std = np.linalg.solve(B.T, c[basis])
        if np.abs(zb).max(initial=0) > 1e12 or np.any(zb < -1e-6 * (1 + np.abs(zb).max(initial=0))):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        zb = tab.rhs
        y_std = np.zeros(len(rows_kept))
        log.debug("simplex: basis refactorization failed; using tableau values")
    z[basis] = np.maximum(zb, 0.0)

    x = offset + M @ z[:k]
    y = np.zeros(m)
    y[rows_kept] = y_std
    y[flip] *= -1
    if p.maximize:
        y = -y
    obj = float(p.c @ x)
    return LpSolution(LpStatus.OPTIMAL, x, obj, y[:m_orig], tab.iterations)


def certificate_residuals(p: LpProblem, sol: LpSolution) -> dict:
    """Primal feasibility, dual feasibility, complementary slackness and
    duality gap for an optimal solution (all as nonnegative numbers)."""
    x, y = sol.x, sol.duals
    s = -1.0 if p.maximize else 1.0
    # convert to a minimization with shadow prices yy
    c = s * p.c
    yy = s * y
    Ax = p.A @ x
    slack = Ax - p.b
    prim = 0.0
    dual_sign = 0.0
    for i, rel in enumerate(p.senses):
        if rel == LE:
            prim = max(prim, slack[i])
            dual_sign = max(dual_sign, yy[i])
        elif rel == GE:
            prim = max(prim, -slack[i])
            dual_sign = max(dual_sign, -yy[i])
        else:
            prim = max(prim, abs(slack[i]))
    prim = max(prim, np.max(p.lb - x, initial=0.0), np.max(x - p.ub, initial=0.0))
    d = c - p.A.T @ yy
    dual_obj = float(yy @ p.b)
    bound_dual_infeas = 0.0
    cs = float(np.max(np.abs(yy * slack), initial=0.0))
    for j in range(x.size):
        if d[j] > 0:
            if np.isfinite(p.lb[j]):
                dual_obj += d[j] * p.lb[j]
                cs = max(cs, abs(d[j] * (x[j] - p.lb[j])))
            else:
                bound_dual_infeas = max(bound_dual_infeas, d[j])
        elif d[j] < 0:
            if np.isfinite(p.ub[j]):
                dual_obj += d[j] * p.ub[j]
                cs = max(cs, abs(d[j] * (x[j] - p.ub[j])))
            else:
                bound_dual_infeas = max(bound_dual_infeas, -d[j])
    primal_obj = float(c @ x)
    return {
        "primal_infeasibility": float(prim),
        "dual_infeasibility": float(max(dual_sign, bound_dual_infeas)),
        "complementary_slackness": float(cs),
        "duality_gap": float(abs(primal_obj - dual_obj)),
    }


def write_lp(p: LpProblem, path, names=None) -> None:
    """Dump ``p`` in CPLEX LP text format for cross-checking elsewhere."""
    n = p.c.size
    names = names or [f"x{j}" for j in range(n)]

    def expr(row):
        terms = [f"{'+' if v >= 0 else '-'} {float(abs(v))!r} {names[j]}" for j, v in enumerate(row) if v != 0]
        return " ".join(terms) if terms else "0 " + names[0]

    out = ["Maximize" if p.maximize else "Minimize", " obj: " + expr(p.c), "Subject To"]
    for i, row in enumerate(p.A):
        out.append(f" c{i}: {expr(row)} {p.senses[i]} {float(p.b[i])!r}")
    out.append("Bounds")
    for j in range(n):
        lo, hi = p.lb[j], p.ub[j]
        if not np.isfinite(lo) and not np.isfinite(hi):
            out.append(f" {names[j]} free")
        else:
            lo_s = repr(float(lo)) if np.isfinite(lo) else "-inf"
            hi_s = repr(float(hi)) if np.isfinite(hi) else "+inf"
            out.append(f" {lo_s} <= {names[j]} <= {hi_s}")
    out.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
