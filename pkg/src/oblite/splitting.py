"""In-DAG splitting-ratio optimization by successive monomial approximation.

Each outer iteration replaces the non-posynomial "ratios at a node sum to one"
condition by its tangent monomial at the current point.  The resulting
problem is convex in log variables and goes to :mod:`oblite.convex`.  The new
point is kept only if the exact (LP-based) evaluation does not get worse, so
the outer loop is a descent method on the true objective.
"""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .convex import ConvexProblem, solve_convex
from .demands import DemandSpec
from .flowlp import allowed_arcs
from .oracles import _spec_bounds, certify_oblivious_ratio, normalize_demand
from .routing import SplittingConfig, ecmp_config, max_link_utilization

log = logging.getLogger(__name__)


LOWER_BOUND = 1.0


@dataclass
class OptimizerOptions:
    max_iter: int = 50
    tol: float = 1e-4          # |delta alpha| counted as "no progress"
    patience: int = 3          # consecutive no-progress iterations before stopping
    floor: float = 1e-6        # smallest ratio while in the log domain
    threshold: float = 1e-4    # output ratios below this become exact zeros
    halvings: int = 6          # trust-region halvings before declaring a stall
    normalization: str = "in-dag"
    t_max: float = 1e8


@dataclass
class GpIterate:
    iteration: int
    alpha: float
    surrogate: float
    step: float
    accepted: bool


@dataclass
class OptimizeResult:
    config: SplittingConfig
    alpha: float
    trace: list = field(default_factory=list)
    status: str = "converged"
    certificate: object = None
    fallback: str | None = None

    def accepted_alphas(self) -> list:
        return [it.alpha for it in self.trace if it.accepted]

    def trace_csv(self) -> str:
        out = io.StringIO()
        out.write("iteration,alpha,surrogate,step,accepted\n")
        for it in self.trace:
            out.write(f"{it.iteration},{float(it.alpha)!r},{float(it.surrogate)!r},{float(it.step)!r},{int(it.accepted)}\n")
        return out.getvalue()


# -- monomial approximation -------------------------------------------------------

def monomial_approx(phi0):
    """Exponents ``a`` and constant ``k`` of the monomial ``k * prod(phi**a)``
    touching ``sum(phi)`` at ``phi0``."""
    phi0 = np.asarray(phi0, float)
    if phi0.size == 0 or np.any(phi0 <= 0):
        raise ValueError("monomial approximation needs strictly positive ratios")
    total = phi0.sum()
    a = phi0 / total
    k = total / np.prod(phi0 ** a)
    return a, float(k)


def _floored(dags, ratios, floor):
    """Clip every DAG ratio to at least ``floor`` and renormalize per node."""
    topo = dags.topo
    out = {}
    for t, dag in dags.items():
        out[t] = {}
        by_node = {}
        for a in dag.edges:
            by_node.setdefault(int(topo.src[a]), []).append(a)
        for arcs in by_node.values():
            v = np.array([max(ratios.get(t, {}).get(a, 0.0), floor) for a in arcs])
            v /= v.sum()
            out[t].update(zip(arcs, v.tolist()))
    return out


def seed_from_ecmp(dags, floor: float = 1e-6) -> dict:
    """Uniform split over every out-arc of each DAG (augmented arcs included)."""
    topo = dags.topo
    ratios = {}
    for t, dag in dags.items():
        deg = np.bincount([topo.src[a] for a in dag.edges], minlength=topo.n)
        ratios[t] = {a: 1.0 / deg[topo.src[a]] for a in dag.edges}
    return _floored(dags, ratios, floor)


def _thresholded(dags, ratios, threshold):
    topo = dags.topo
    out = {}
    for t, dag in dags.items():
        out[t] = {}
        by_node = {}
        for a in dag.edges:
            by_node.setdefault(int(topo.src[a]), []).append(a)
        for arcs in by_node.values():
            v = np.array([ratios[t].get(a, 0.0) for a in arcs])
            v = np.where(v < threshold, 0.0, v)
            if v.sum() <= 0:
                v = np.array([ratios[t].get(a, 0.0) for a in arcs])
            v /= v.sum()
            out[t].update(zip(arcs, v.tolist()))
    return out


# -- subproblem structure -----------------------------------------------------------

class _Layout:
    """Variable layout shared by every outer iteration of one run."""

    def __init__(self, dags, pairs):
        topo = dags.topo
        self.dags, self.topo, self.pairs = dags, topo, pairs
        self.groups = []  # (t, node, arcs) with at least two arcs
        self.fixed = {}   # (t, arc) -> 1.0 for single-arc nodes
        for t in sorted(dags):
            by_node = {}
            for a in sorted(dags[t].edges):
                by_node.setdefault(int(topo.src[a]), []).append(a)
            for u in sorted(by_node):
                arcs = by_node[u]
                if len(arcs) == 1:
                    self.fixed[(t, arcs[0])] = True
                else:
                    self.groups.append((t, u, arcs))
        self.reach = {}
        for s, t in pairs:
            dag = dags[t]
            seen, stack = {s}, [s]
            while stack:
                u = stack.pop()
                for a in dag.out_edges(topo, u):
                    w = int(topo.dst[a])
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            self.reach[(s, t)] = [v for v in dag.order if v in seen]

    def new_problem(self):
        p = ConvexProblem()
        self.phi = {}
        for t, u, arcs in self.groups:
            for a in arcs:
                self.phi[(t, a)] = p.add_var(("phi", t, a), log_domain=True)
        self.f = {}
        for (s, t), nodes in self.reach.items():
            for v in nodes:
                if v not in (s, t):
                    self.f[(s, t, v)] = p.add_var(("f", s, t, v), log_domain=True)
        return p

    def exponent(self, s, t, a):
        """Coefficients of ``log f_st(src a) + log phi_t(a)``."""
        u = int(self.topo.src[a])
        co = {}
        if u != s:
            co[self.f[(s, t, u)]] = 1.0
        if (t, a) in self.phi:
            co[self.phi[(t, a)]] = 1.0
        return co

    def loaded_arcs(self, s, t):
        """DAG arcs toward t that can carry part of the s->t demand."""
        topo, reach = self.topo, set(self.reach[(s, t)])
        return [a for a in sorted(self.dags[t].edges) if topo.src[a] in reach]

    def add_common(self, p, ratios, floor):
        for (t, a), j in self.phi.items():
            p.add_linear({j: 1.0}, 0.0)
            p.add_linear({j: -1.0}, -math.log(floor))
        for t, u, arcs in self.groups:
            phi0 = np.array([ratios[t][a] for a in arcs])
            a_exp, k = monomial_approx(phi0)
            p.add_linear({self.phi[(t, a)]: -e for a, e in zip(arcs, a_exp)}, math.log(k))
        topo = self.topo
        for (s, t), nodes in self.reach.items():
            for v in nodes:
                if v in (s, t):
                    continue
                ins = [a for a in self.dags[t].in_edges(topo, v) if int(topo.src[a]) in set(nodes)]
                p.add_lse([(self.exponent(s, t, a), 0.0) for a in ins], {self.f[(s, t, v)]: 1.0})

    def lift(self, ratios):
        """Log ratios nudged strictly inside ``phi <= 1`` and the monomial
        splitting rows, plus the largest nudge applied."""
        out, top = {}, 0.0
        for t, u, arcs in self.groups:
            lg = np.log([ratios[t][a] for a in arcs])
            d = min(1e-3, -0.5 * lg.max())
            top = max(top, d)
            out.update({(t, a): v + d for a, v in zip(arcs, lg)})
        return out, top

    def start_point(self, p, ratios, lifted):
        """Log flows at the lifted ratios, each raised a little more so the
        recursion rows are strict.  Returns the point and the total lift
        along any path, which bounds how much every load term grew."""
        z = np.zeros(p.n)
        for key, j in self.phi.items():
            z[j] = lifted[key]
        topo = self.topo
        for (s, t), nodes in self.reach.items():
            val = {s: 0.0}
            for v in nodes:
                if v in (s, t):
                    continue
                ins = [a for a in self.dags[t].in_edges(topo, v) if int(topo.src[a]) in val]
                terms = [val[int(topo.src[a])] + lifted.get((t, a), 0.0) for a in ins]
                val[v] = float(np.logaddexp.reduce(terms)) + 1e-3
                z[self.f[(s, t, v)]] = val[v]
        return z

    def read_ratios(self, z, ratios0):
        out = {t: dict(r) for t, r in ratios0.items()}
        for t, u, arcs in self.groups:
            v = np.exp([z[self.phi[(t, a)]] for a in arcs])
            v /= v.sum()
            out[t].update(zip(arcs, v.tolist()))
        for (t, a) in self.fixed:
            out[t][a] = 1.0
        return out

    def interpolate(self, r0, r1, step):
        out = {t: dict(r) for t, r in r0.items()}
        for t, u, arcs in self.groups:
            v = np.exp([(1 - step) * math.log(r0[t][a]) + step * math.log(r1[t][a]) for a in arcs])
            v /= v.sum()
            out[t].update(zip(arcs, v.tolist()))
        return out


class _DiscreteModel:
    """Standard-form GP: minimize log(alpha) with one log-sum-exp row per
    (arc, matrix)."""

    def __init__(self, layout, matrices):
        self.layout, self.matrices = layout, matrices

    def build(self, ratios, floor, current_alpha):
        L = self.layout
        p = L.new_problem()
        la = p.add_var("log_alpha", log_domain=True)
        p.minimize({la: 1.0})
        L.add_common(p, ratios, floor)
        cap = L.topo.capacity
        for D in self.matrices:
            rows = {}
            for (s, t), d in sorted(D.items()):
                if d <= 0 or (s, t) not in L.reach:
                    continue
                for a in L.loaded_arcs(s, t):
                    rows.setdefault(a, []).append((L.exponent(s, t, a), math.log(d / cap[a])))
            for a in sorted(rows):
                p.add_lse(rows[a], {la: 1.0})
        lifted, top = L.lift(ratios)
        z = L.start_point(p, ratios, lifted)
        z[la] = math.log(current_alpha) + 2 * (top + 1e-3) * L.topo.n + 1e-2
        return p, z

    @staticmethod
    def objective(value):
        return math.exp(value)


class _ObliviousModel:
    """Per-edge dual blocks coupled to the log-domain load terms."""

    def __init__(self, layout, spec, normalization):
        self.layout, self.spec, self.normalization = layout, spec, normalization
        pairs, lo, hi = _spec_bounds(spec)
        if lo is not None and not any(lo.values()):
            # a box with zero lower bounds spans the same cone as the
            # unbounded set, and its slack row would have no interior
            lo = hi = None
        self.lo, self.hi = lo, hi
        dests = sorted({t for _, t in pairs})
        self.arcs_for = allowed_arcs(layout.topo, dests, layout.dags if normalization == "in-dag" else None)
        topo = layout.topo
        self.edges = sorted({a for s, t in pairs for a in layout.loaded_arcs(s, t)})
        self.pnodes = {}
        for t, arcs in self.arcs_for.items():
            nodes = {int(topo.src[a]) for a in arcs} | {int(topo.dst[a]) for a in arcs}
            nodes |= {s for s, tt in pairs if tt == t}
            self.pnodes[t] = sorted(nodes - {t})

    def build(self, ratios, floor, current_alpha):
        L = self.layout
        topo = L.topo
        p = L.new_problem()
        r = p.add_var("r")
        p.minimize({r: 1.0})
        L.add_common(p, ratios, floor)
        start = {}
        cert = certify_oblivious_ratio(topo, L.dags, _config(L.dags, ratios), self.spec, self.normalization)
        lifted, top = L.lift(ratios)
        gamma = math.exp(2 * (top + 1e-3) * topo.n + 1e-3)
        eps = 1e-4 * (1.0 + cert.ratio)
        used = sorted({a for arcs in self.arcs_for.values() for a in arcs})
        blocks = []
        for e in self.edges:
            pi = {h: p.add_var(("pi", e, h)) for h in used}
            pot = {(s, t): p.add_var(("p", e, s, t)) for t in self.arcs_for for s in self.pnodes[t]}
            sp, sm = {}, {}
            if self.lo is not None:
                for q in L.pairs:
                    if np.isfinite(self.hi[q]):
                        sp[q] = p.add_var(("s+", e) + q)
                    if self.lo[q] > 0:
                        sm[q] = p.add_var(("s-", e) + q)
            for j in list(pi.values()) + list(pot.values()) + list(sp.values()) + list(sm.values()):
                p.add_linear({j: -1.0}, 0.0)
            # strictly feasible start from the exact certificate at ``ratios``:
            # scale by gamma (covers the lifted loads), then shift everything
            ce = cert.edges.get(e)
            eps_m = eps * (sum(self.hi[q] for q in sp) + 1.0) / max(sum(self.lo[q] for q in sm), 1e-300) if sm else 0.0
            shift = eps + eps_m + (ce.ratio if ce is None else 0.0)
            for q, j in sp.items():
                start[j] = gamma * (ce.s_plus.get(q, 0.0) if ce else 0.0) + eps
            for q, j in sm.items():
                start[j] = gamma * (ce.s_minus.get(q, 0.0) if ce else 0.0) + eps_m
            for q, j in pot.items():
                start[j] = gamma * (ce.potential.get(q, 0.0) if ce else 1.0) + shift
            for h, j in pi.items():
                start[j] = gamma * (ce.pi[h] if ce else 0.0) + shift + eps
            r1 = sum(float(topo.capacity[h]) * start[j] for h, j in pi.items())
            start[r] = max(start.get(r, 0.0), r1 + eps)
            # R1: sum_h c_h pi_e(h) <= r
            row = {j: float(topo.capacity[h]) for h, j in pi.items()}
            row[r] = -1.0
            p.add_linear(row, 0.0)
            for t, arcs in self.arcs_for.items():
                for a in arcs:
                    j, k = int(topo.src[a]), int(topo.dst[a])
                    row = {pi[a]: -1.0}
                    if k != t:
                        row[pot[(k, t)]] = row.get(pot[(k, t)], 0.0) - 1.0
                    if j != t:
                        row[pot[(j, t)]] = row.get(pot[(j, t)], 0.0) + 1.0
                    p.add_linear(row, 0.0)
            if sp or sm:
                row = {j: self.hi[q] for q, j in sp.items()}
                for q, j in sm.items():
                    row[j] = row.get(j, 0.0) - self.lo[q]
                p.add_linear(row, 0.0)
            for (s, t) in L.pairs:
                lin = {pot[(s, t)]: 1.0}
                if (s, t) in sp:
                    lin[sp[(s, t)]] = 1.0
                if (s, t) in sm:
                    lin[sm[(s, t)]] = -1.0
                if e not in L.dags[t].edges or int(topo.src[e]) not in set(L.reach[(s, t)]):
                    # pair never loads e: the coupling row has right-hand side zero
                    p.add_linear({j: -v for j, v in lin.items()}, 0.0)
                    continue
                p.add_exp([(L.exponent(s, t, e), -math.log(topo.capacity[e]))], lin)
            blocks.append((pot, sp, sm))
        # Upper bounds that keep an optimum: potentials are at most r / c_min
        # along any path to t, and min(s+, s-) may be taken as zero.  They
        # remove the directions along which the barrier has no minimum.
        p_max = 2.0 * start[r] / float(topo.capacity.min())
        lo_sum = sum(self.lo.values()) if self.lo is not None else 0.0
        for pot, sp, sm in blocks:
            for j in pot.values():
                p.add_linear({j: 1.0}, max(p_max, 2.0 * start[j]))
            for q, j in sm.items():
                p.add_linear({j: 1.0}, max(p_max, 2.0 * start[j]))
            for q, j in sp.items():
                p.add_linear({j: 1.0}, max(lo_sum * p_max / self.hi[q], 2.0 * start[j]))
        z = L.start_point(p, ratios, lifted)
        for j, v in start.items():
            z[j] = v
        return p, z

    @staticmethod
    def objective(value):
        return value


# -- outer loop -------------------------------------------------------------------------

def _config(dags, ratios):
    return SplittingConfig(dags, ratios, validate=False)


def _run(layout, model, dags, ratios0, evaluate, opts: OptimizerOptions, seeds=()):
    ratios = ratios0
    alpha = evaluate(ratios)
    for extra in seeds:
        a2 = evaluate(extra)
        if a2 < alpha:
            ratios, alpha = extra, a2
    trace = [GpIterate(0, alpha, math.nan, 0.0, True)]
    quiet, status = 0, "max_iter"
    for it in range(1, opts.max_iter + 1):
        # every objective here is a ratio to the demands-aware optimum, so 1 is a lower bound
        if alpha <= LOWER_BOUND + 1e-9:
            status = "converged"
            break
        prob, z0 = model.build(ratios, opts.floor, alpha)
        sol = solve_convex(prob, z0, t_max=opts.t_max)
        if not sol.ok:
            log.warning("convex subproblem failed (%s) at iteration %d", sol.status.value, it)
            status = "solver_failure"
            break
        proposal = _floored(dags, layout.read_ratios(sol.z, ratios), opts.floor)
        step, accepted = 1.0, None
        for _ in range(opts.halvings + 1):
            cand = proposal if step == 1.0 else layout.interpolate(ratios, proposal, step)
            a_new = evaluate(cand)
            if a_new <= alpha + 1e-12:
                accepted = (cand, a_new)
                break
            trace.append(GpIterate(it, a_new, model.objective(sol.objective), step, False))
            step /= 2
        if accepted is None:
            status = "stalled"
            break
        delta = alpha - accepted[1]
        ratios, alpha = accepted
        trace.append(GpIterate(it, alpha, model.objective(sol.objective), step, True))
        quiet = quiet + 1 if delta <= opts.tol else 0
        if quiet >= opts.patience:
            status = "converged"
            break
    return ratios, alpha, trace, status


def _finish(dags, ratios, alpha, evaluate, opts, ecmp):
    cut = _thresholded(dags, ratios, opts.threshold)
    a_cut = evaluate(cut)
    if a_cut <= alpha + 1e-6:
        ratios, alpha = cut, a_cut
    fallback = None
    if ecmp is not None:
        a_ecmp = evaluate(ecmp.ratios)
        if a_ecmp < alpha - 1e-12:
            log.info("optimizer result %.6g is worse than ECMP %.6g; returning ECMP", alpha, a_ecmp)
            ratios, alpha, fallback = ecmp.ratios, a_ecmp, "ecmp"
    return SplittingConfig(dags, ratios), alpha, fallback


def _ecmp_or_none(dags, spf):
    if spf is None:
        return None
    try:
        return ecmp_config(dags, spf)
    except ValueError:
        return None


def optimize_discrete(topo, dags, spec: DemandSpec, phi_init=None, opts: OptimizerOptions | None = None,
                      spf=None) -> OptimizeResult:
    """Minimize the worst utilization over a finite list of demand matrices,
    each scaled to demands-aware optimum one.

    ``spf`` (the shortest-path DAGs) enables the ECMP safeguard: ECMP is also
    tried as a starting point and returned if nothing better is found.
    """
    opts = opts or OptimizerOptions()
    if not spec.is_discrete:
        raise ValueError("optimize_discrete needs a discrete demand spec")
    restrict = dags if opts.normalization == "in-dag" else None
    mats = [normalize_demand(topo, D, restrict) for D in spec.matrices]
    mats = [D for D in mats if D]
    init = _floored(dags, phi_init.ratios if isinstance(phi_init, SplittingConfig) else (phi_init or seed_from_ecmp(dags)),
                    opts.floor)
    if not mats:
        cfg = SplittingConfig(dags, _thresholded(dags, init, opts.threshold))
        return OptimizeResult(cfg, 0.0, [GpIterate(0, 0.0, math.nan, 0.0, True)], "converged")
    pairs = sorted({p for D in mats for p in D})
    missing = [q for q in pairs if q[1] not in dags]
    if missing:
        raise ValueError(f"no DAG toward the destination of pairs {missing}")
    layout = _Layout(dags, pairs)

    def evaluate(ratios):
        cfg = _config(dags, ratios)
        return max(max_link_utilization(cfg, D).max_utilization for D in mats)

    ecmp = _ecmp_or_none(dags, spf)
    seeds = [_floored(dags, ecmp.ratios, opts.floor)] if ecmp is not None else []
    ratios, alpha, trace, status = _run(layout, _DiscreteModel(layout, mats), dags, init, evaluate, opts, seeds)
    cfg, alpha, fallback = _finish(dags, ratios, alpha, evaluate, opts, ecmp)
    return OptimizeResult(cfg, alpha, trace, status, fallback=fallback)


def optimize_oblivious(topo, dags, spec: DemandSpec, phi_init=None, opts: OptimizerOptions | None = None,
                       spf=None, warm_starts=()) -> OptimizeResult:
    """Minimize the certified worst-case ratio over a box or unbounded demand set.

    ``warm_starts`` are extra candidate configurations; the best of them and
    the seed starts the outer loop.
    """
    opts = opts or OptimizerOptions()
    if spec.is_discrete:
        raise ValueError("optimize_oblivious needs a box or unbounded demand spec")
    pairs = spec.pairs()
    missing = [q for q in pairs if q[1] not in dags]
    if missing:
        raise ValueError(f"no DAG toward the destination of pairs {missing}")
    init = _floored(dags, phi_init.ratios if isinstance(phi_init, SplittingConfig) else (phi_init or seed_from_ecmp(dags)),
                    opts.floor)
    layout = _Layout(dags, pairs)

    def evaluate(ratios):
        return certify_oblivious_ratio(topo, dags, _config(dags, ratios), spec, opts.normalization).ratio

    ecmp = _ecmp_or_none(dags, spf)
    seeds = [_floored(dags, c.ratios if isinstance(c, SplittingConfig) else c, opts.floor) for c in warm_starts]
    if ecmp is not None:
        seeds.append(_floored(dags, ecmp.ratios, opts.floor))
    model = _ObliviousModel(layout, spec, opts.normalization)
    ratios, alpha, trace, status = _run(layout, model, dags, init, evaluate, opts, seeds)
    cfg, alpha, fallback = _finish(dags, ratios, alpha, evaluate, opts, ecmp)
    cert = certify_oblivious_ratio(topo, dags, cfg, spec, opts.normalization)
    if abs(cert.ratio - alpha) > 1e-6:
        log.warning("re-certified ratio %.9g differs from the tracked %.9g", cert.ratio, alpha)
    return OptimizeResult(cfg, cert.ratio, trace, status, certificate=cert, fallback=fallback)
