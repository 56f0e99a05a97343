"""Certified global minimization of quadratics over a block feasible set.

Spatial branch and bound on the box implied by the ball (and the equalities
where they bound single coordinates).  Node bounds come from an LP in the
variables z and the lifted products X_kl ~ z_k z_l, k <= l, with McCormick
envelopes for every product; equalities z'D_j z = rhs_j become linear in X.
One HiGHS model is kept per solve and its envelope coefficients rewritten at
each node, so consecutive node LPs are warm started.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import highspy
import numpy as np

from .model import INF, BlockFeasibleSet, QuadraticForm, check_membership, symmetrize

log = logging.getLogger(__name__)

DEFAULT_GAP_TOL = 1e-5
DEFAULT_NODE_BUDGET = 200_000


class InfeasibleSetError(RuntimeError):
    """The ground set is empty (or no feasible point could be located)."""


@dataclass
class GlobalResult:
    lower_bound: float
    incumbent: Optional[np.ndarray]
    incumbent_value: float
    node_count: int
    status: str = "optimal"         # optimal | budget | infeasible
    others: List[np.ndarray] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.incumbent_value - self.lower_bound


# --------------------------------------------------------------------------
# feasible points
# --------------------------------------------------------------------------

def project_to_set(F: BlockFeasibleSet, z0, tol: float = 1e-11, max_iter: int = 60,
                   hold=None):
    """Gauss-Newton restoration of the equalities from ``z0``; None on failure.

    ``hold`` is an optional boolean mask of coordinates kept at their
    starting values.
    """
    z = np.array(z0, dtype=float)
    n = F.n
    fixed = np.zeros(n, dtype=bool) if hold is None else np.array(hold, dtype=bool)
    if F.nonneg:
        z[~fixed] = np.maximum(z[~fixed], 0.0)
    Ds = [D for D, _ in F.quad_eqs]
    rhs = np.array([b for _, b in F.quad_eqs])
    r = F.ball_radius
    for _ in range(max_iter):
        h = np.array([z @ D @ z for D in Ds]) - rhs if Ds else np.zeros(0)
        J = np.array([2.0 * D @ z for D in Ds]).reshape(-1, n)
        over = z @ z - r
        if over > 0:
            h = np.append(h, over)
            J = np.vstack([J, 2.0 * z])
        if h.size == 0 or np.abs(h).max() <= tol:
            break
        free = ~fixed
        Jf = J[:, free]
        if Jf.size == 0:
            return None
        dz, *_ = np.linalg.lstsq(Jf, -h, rcond=None)
        step = np.zeros(n)
        step[free] = dz
        z = z + step
        if F.nonneg:
            hit = (z < 0) & ~fixed
            if np.any(hit):
                z[hit] = 0.0
                fixed |= hit
    if not check_membership(F, z, max(tol * 10, 1e-10)):
        return None
    return z


def sample_feasible(F: BlockFeasibleSet, k: int, rng=None, max_tries: Optional[int] = None):
    """Up to ``k`` points of F from random box points pulled onto the set."""
    rng = np.random.default_rng(rng)
    lb, ub = F.box()
    out = []
    tries = 0
    max_tries = max_tries or 50 * k + 100
    while len(out) < k and tries < max_tries:
        tries += 1
        z = project_to_set(F, rng.uniform(lb, ub))
        if z is not None:
            out.append(z)
    return np.array(out).reshape(-1, F.n)


# --------------------------------------------------------------------------
# node relaxation
# --------------------------------------------------------------------------

class _Relaxation:
    def __init__(self, form: QuadraticForm, F: BlockFeasibleSet):
        n = F.n
        self.n = n
        self.pairs = [(k, l) for k in range(n) for l in range(k, n)]
        self.pidx = {p: n + i for i, p in enumerate(self.pairs)}
        nv = n + len(self.pairs)
        self.nv = nv
        inf = highspy.kHighsInf
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("primal_feasibility_tolerance", 1e-10)
        h.setOptionValue("dual_feasibility_tolerance", 1e-10)
        cost = np.zeros(nv)
        cost[:n] = 2.0 * form.q
        for (k, l), j in self.pidx.items():
            cost[j] = form.Q[k, k] if k == l else 2.0 * form.Q[k, l]
        self.cost = cost
        self.const = form.c
        h.addVars(nv, np.full(nv, -inf), np.full(nv, inf))
        h.changeColsCost(nv, np.arange(nv, dtype=np.int32), cost)
        # four envelope rows per product, coefficients rewritten per node
        self.env_rows = {}
        row = 0
        for (k, l), j in self.pidx.items():
            rows = []
            for _ in range(4):
                idx = sorted({j, k, l})
                h.addRow(-inf, inf, len(idx), np.array(idx, dtype=np.int32), np.zeros(len(idx)))
                rows.append(row)
                row += 1
            self.env_rows[(k, l)] = rows
        # fixed rows: lifted equalities, linear equalities and their products, ball
        for D, rhs in F.quad_eqs:
            self._add_lifted(h, D, rhs, rhs)
            row += 1
        for g, s in F.linear_equalities():
            idx = np.flatnonzero(g).astype(np.int32)
            h.addRow(s, s, idx.size, idx, g[idx])
            row += 1
            for k in range(n):
                coef = {}
                for l in np.flatnonzero(g):
                    j = self.pidx[(min(k, l), max(k, l))]
                    coef[j] = coef.get(j, 0.0) + g[l]
                coef[k] = coef.get(k, 0.0) - s
                ids = np.array(sorted(coef), dtype=np.int32)
                h.addRow(0.0, 0.0, ids.size, ids, np.array([coef[i] for i in ids]))
                row += 1
        self._add_lifted(h, np.eye(n), -inf, F.ball_radius)
        self.h = h

    def _add_lifted(self, h, D, lo, hi):
        D = symmetrize(D)
        idx, val = [], []
        for (k, l), j in self.pidx.items():
            c = D[k, k] if k == l else 2.0 * D[k, l]
            if c != 0.0:
                idx.append(j)
                val.append(c)
        h.addRow(lo, hi, len(idx), np.array(idx, dtype=np.int32), np.array(val))

    def solve(self, lb, ub):
        h = self.h
        n = self.n
        inf = highspy.kHighsInf
        col_lo = np.empty(self.nv)
        col_hi = np.empty(self.nv)
        col_lo[:n], col_hi[:n] = lb, ub
        rlo, rhi, rows = [], [], []
        for (k, l), j in self.pidx.items():
            lk, uk, ll, ul = lb[k], ub[k], lb[l], ub[l]
            prods = (lk * ll, lk * ul, uk * ll, uk * ul)
            col_lo[j], col_hi[j] = min(prods), max(prods)
            if k == l:
                if lk >= 0 or uk <= 0:
                    col_lo[j] = min(lk * lk, uk * uk) if lk * uk >= 0 else 0.0
                else:
                    col_lo[j] = 0.0
                mk = 0.5 * (lk + uk)
                rows_def = [(2 * lk, -lk * lk, inf), (2 * uk, -uk * uk, inf),
                            (lk + uk, -inf, -lk * uk), (2 * mk, -mk * mk, inf)]
                for r, (a, lo, hi) in zip(self.env_rows[(k, l)], rows_def):
                    h.changeCoeff(r, k, -a)
                    rows.append(r)
                    rlo.append(lo)
                    rhi.append(hi)
            else:
                rows_def = [(lk, ll, -lk * ll, inf), (uk, ul, -uk * ul, inf),
                            (uk, ll, -inf, -uk * ll), (lk, ul, -inf, -lk * ul)]
                # row: X - a z_l - b z_k  (a multiplies z_l, b multiplies z_k)
                for r, (a, b, lo, hi) in zip(self.env_rows[(k, l)], rows_def):
                    h.changeCoeff(r, l, -a)
                    h.changeCoeff(r, k, -b)
                    rows.append(r)
                    rlo.append(lo)
                    rhi.append(hi)
        for (k, l), rs in self.env_rows.items():
            j = self.pidx[(k, l)]
            for r in rs:
                h.changeCoeff(r, j, 1.0)
        h.changeColsBounds(self.nv, np.arange(self.nv, dtype=np.int32), col_lo, col_hi)
        h.changeRowsBounds(len(rows), np.array(rows, dtype=np.int32), np.array(rlo), np.array(rhi))
        h.run()
        ms = h.getModelStatus()
        if ms == highspy.HighsModelStatus.kInfeasible:
            return None
        if ms != highspy.HighsModelStatus.kOptimal:
            # fall back to a cold solve once before giving up on the node
            h.clearSolver()
            h.run()
            ms = h.getModelStatus()
            if ms == highspy.HighsModelStatus.kInfeasible:
                return None
            if ms != highspy.HighsModelStatus.kOptimal:
                raise RuntimeError(f"node LP failed: {h.modelStatusToString(ms)}")
        sol = np.array(h.getSolution().col_value)
        value = float(h.getInfo().objective_function_value) + self.const
        return value, sol[:n], sol

    def mismatch(self, sol, z, weights):
        n = self.n
        score = np.zeros(n)
        for (k, l), j in self.pidx.items():
            err = weights[k, l] * abs(sol[j] - z[k] * z[l])
            score[k] += err
            if k != l:
                score[l] += err
        return score


def _tighten(F: BlockFeasibleSet, lb, ub, lin, passes: int = 3):
    """Interval bound tightening from the equalities and the ball (nonneg sets).

    Returns tightened copies or None when the box provably misses F.
    """
    lb = lb.copy()
    ub = ub.copy()
    n = F.n
    slack = 1e-12
    for _ in range(passes):
        before = ub - lb
        for g, s in lin:
            lo_sum = g @ lb
            hi_sum = g @ ub
            for k in np.flatnonzero(g > 0):
                rest_lo = lo_sum - g[k] * lb[k]
                rest_hi = hi_sum - g[k] * ub[k]
                ub[k] = min(ub[k], (s - rest_lo) / g[k] + slack)
                lb[k] = max(lb[k], (s - rest_hi) / g[k] - slack)
        for D, rhs in F.quad_eqs:
            for k in range(n):
                d = D[k, k]
                if d <= 0:
                    continue
                # D_kk z^2 + 2 z s + R = rhs with s, R over the other coordinates
                s_lo = s_hi = 0.0
                R_lo = R_hi = 0.0
                for l in range(n):
                    if l == k:
                        continue
                    c = D[k, l]
                    if c != 0.0:
                        a, b = c * lb[l], c * ub[l]
                        s_lo += min(a, b)
                        s_hi += max(a, b)
                    for m in range(l, n):
                        if m == k:
                            continue
                        c = D[l, m] if l == m else 2.0 * D[l, m]
                        if c == 0.0:
                            continue
                        if l == m:
                            sq = (lb[l] ** 2, ub[l] ** 2)
                            lo, hi = min(sq), max(sq)
                            if lb[l] < 0 < ub[l]:
                                lo = 0.0
                        else:
                            pr = (lb[l] * lb[m], lb[l] * ub[m], ub[l] * lb[m], ub[l] * ub[m])
                            lo, hi = min(pr), max(pr)
                        R_lo += min(c * lo, c * hi)
                        R_hi += max(c * lo, c * hi)
                t_lo, t_hi = rhs - R_hi, rhs - R_lo
                disc = s_lo * s_lo + d * t_hi
                if disc < 0:
                    return None
                root = np.sqrt(disc)
                ub[k] = min(ub[k], (-s_lo + root) / d + slack)
                lb[k] = max(lb[k], (-s_lo - root) / d - slack)
                disc = s_hi * s_hi + d * t_lo
                if disc > 0:
                    root = np.sqrt(disc)
                    r_minus, r_plus = (-s_hi - root) / d, (-s_hi + root) / d
                    if lb[k] > r_minus + slack:
                        lb[k] = max(lb[k], r_plus - slack)
                    elif ub[k] < r_plus - slack:
                        ub[k] = min(ub[k], r_minus + slack)
                if lb[k] > ub[k]:
                    return None
        room = F.ball_radius - np.sum(lb ** 2)
        if room < -slack:
            return None
        for k in range(n):
            ub[k] = min(ub[k], np.sqrt(max(room + lb[k] ** 2, 0.0)) + slack)
        if np.any(lb > ub):
            return None
        if np.all(before - (ub - lb) <= 1e-3 * np.maximum(before, 1e-12)):
            break
    return lb, ub


def _local_refine(form: QuadraticForm, F: BlockFeasibleSet, z0):
    """SLSQP polish of a feasible point; returns a feasible point or None."""
    from scipy.optimize import minimize
    cons = [{"type": "eq", "fun": (lambda z, D=D, b=b: z @ D @ z - b),
             "jac": (lambda z, D=D: 2.0 * D @ z)} for D, b in F.quad_eqs]
    cons.append({"type": "ineq", "fun": lambda z: F.ball_radius - z @ z, "jac": lambda z: -2.0 * z})
    bounds = [(0.0, None)] * F.n if F.nonneg else None
    try:
        res = minimize(lambda z: form(z), z0, jac=lambda z: 2.0 * (form.Q @ z + form.q),
                       bounds=bounds, constraints=cons, method="SLSQP",
                       options={"maxiter": 100, "ftol": 1e-13})
    except (ValueError, np.linalg.LinAlgError):
        return None
    return project_to_set(F, res.x)


def _relevance(form: QuadraticForm, F: BlockFeasibleSet) -> np.ndarray:
    W = np.abs(form.Q).copy()
    for D, _ in F.quad_eqs:
        W += np.abs(D)
    W += np.eye(F.n) * 1e-3
    return W


def solve_global(form: QuadraticForm, F: BlockFeasibleSet, gap_tol: float = DEFAULT_GAP_TOL,
                 node_budget: int = DEFAULT_NODE_BUDGET, *, cutoff: Optional[float] = None,
                 rel_gap: float = 0.0, seeds: Optional[Sequence] = None,
                 time_limit: Optional[float] = None, collect: int = 0,
                 max_refines: int = 25) -> GlobalResult:
    """Minimize ``form`` over F with a certified lower bound.

    ``cutoff`` prunes every node whose bound is at least the cutoff: the
    search then only certifies ``min >= cutoff`` or finds a point below it.
    ``rel_gap`` loosens termination to ``max(gap_tol, rel_gap*|incumbent|)``.
    ``collect`` keeps up to that many extra distinct feasible points with
    value below the cutoff in ``others``.
    """
    if form.n != F.n:
        raise ValueError("form and set dimensions differ")
    t0 = time.perf_counter()
    relax = _Relaxation(form, F)
    weights = _relevance(form, F)
    lin = F.linear_equalities() if F.nonneg else []
    lb0, ub0 = F.box()
    best_z, best_v = None, np.inf
    others: list = []

    refines = [0]

    def offer(z, polish=False):
        nonlocal best_z, best_v
        if z is None:
            return
        v = float(z @ form.Q @ z + 2 * form.q @ z + form.c)
        if v < best_v:
            if best_z is not None and collect:
                others.append((best_v, best_z))
            best_z, best_v = z, v
            if polish and refines[0] < max_refines:
                refines[0] += 1
                offer(_local_refine(form, F, z))
        elif collect and (cutoff is None or v < cutoff):
            others.append((v, z))

    for s in seeds if seeds is not None else ():
        s = np.asarray(s, dtype=float)
        if check_membership(F, s, 1e-10):
            offer(s, polish=True)
    heap = []
    counter = itertools.count()
    nodes = 0
    pruned_lb = np.inf
    box = _tighten(F, lb0, ub0, lin) if F.nonneg else (lb0, ub0)
    root = None if box is None else relax.solve(*box)
    nodes += 1
    if root is None:
        if best_z is None:
            return GlobalResult(np.inf, None, np.inf, nodes, "infeasible")
        raise InfeasibleSetError("root relaxation infeasible despite a feasible seed")
    heapq.heappush(heap, (root[0], next(counter), box[0], box[1], root))
    status = "optimal"

    def threshold():
        tgap = max(gap_tol, rel_gap * abs(best_v)) if np.isfinite(best_v) else 0.0
        thr = best_v - tgap
        if cutoff is not None:
            thr = min(thr, cutoff)
        return thr

    while heap:
        bound, _, lb, ub, (val, z, sol) = heapq.heappop(heap)
        offer(project_to_set(F, z), polish=True)
        if bound >= threshold():
            heapq.heappush(heap, (bound, next(counter), lb, ub, (val, z, sol)))
            break
        if nodes >= node_budget or (time_limit and time.perf_counter() - t0 > time_limit):
            heapq.heappush(heap, (bound, next(counter), lb, ub, (val, z, sol)))
            status = "budget"
            break
        score = relax.mismatch(sol, z, weights) * (ub - lb > 1e-12)
        width = ub - lb
        if score.max() <= 1e-14:
            k = int(np.argmax(width))
            if width[k] <= 1e-9:
                pruned_lb = min(pruned_lb, bound)
                continue
        else:
            k = int(np.argmax(score))
        lo, hi = lb[k], ub[k]
        split = z[k] if lo + 0.1 * (hi - lo) < z[k] < hi - 0.1 * (hi - lo) else 0.5 * (lo + hi)
        for part in ((lo, split), (split, hi)):
            cl, cu = lb.copy(), ub.copy()
            cl[k], cu[k] = part
            if F.nonneg:
                tight = _tighten(F, cl, cu, lin)
                nodes += tight is None
                if tight is None:
                    continue
                cl, cu = tight
            res = relax.solve(cl, cu)
            nodes += 1
            if res is None:
                continue
            child_bound = max(res[0], bound)
            if child_bound >= threshold():
                pruned_lb = min(pruned_lb, child_bound)
                continue
            heapq.heappush(heap, (child_bound, next(counter), cl, cu, res))
    open_lb = min((b for b, *_ in heap), default=np.inf)
    lower = min(open_lb, pruned_lb, best_v)
    if best_z is None and not np.isfinite(lower):
        return GlobalResult(np.inf, None, np.inf, nodes, "infeasible")
    keep = []
    if collect:
        others.sort(key=lambda t: t[0])
        for v, z in others:
            if cutoff is not None and v >= cutoff:
                continue
            if all(np.linalg.norm(z - o) > 1e-3 for o in keep + [best_z]):
                keep.append(z)
            if len(keep) >= collect:
                break
    if status != "budget" and best_v - lower > max(gap_tol, rel_gap * abs(best_v)):
        # only reachable through the cutoff: the bound certifies min >= cutoff
        status = "cutoff"
    return GlobalResult(float(lower), best_z, float(best_v), nodes, status, keep)


# --------------------------------------------------------------------------
# copositivity over cone({1} x F)
# --------------------------------------------------------------------------

@dataclass
class CopositivityVerdict:
    nonnegative: bool
    certified_min: float
    z: Optional[np.ndarray] = None          # (1+n)-vector with leading 1 when violated
    value: Optional[float] = None
    others: List[np.ndarray] = field(default_factory=list)
    minimizer: Optional[np.ndarray] = None  # best feasible point found, always set
    nodes: int = 0


def check_set_copositivity(M, F: BlockFeasibleSet, tol: float = 1e-6, *,
                           gap_tol: Optional[float] = None, seeds=None, collect: int = 0,
                           node_budget: int = DEFAULT_NODE_BUDGET,
                           rel_gap: float = 0.1) -> CopositivityVerdict:
    """Decide ``[1,z]' M [1,z] >= -tol`` for all z in F.

    On violation the returned z is an (approximate, within ``rel_gap``)
    minimizer lifted to ``[1, z]``.
    """
    M = symmetrize(M)
    if M.shape != (F.n + 1, F.n + 1):
        raise ValueError("matrix size must be 1 + F.n")
    form = QuadraticForm.from_homogeneous(M)
    gap_tol = tol / 10.0 if gap_tol is None else gap_tol
    res = solve_global(form, F, gap_tol, node_budget, cutoff=-tol, rel_gap=rel_gap,
                       seeds=seeds, collect=collect)
    if res.status == "infeasible":
        raise InfeasibleSetError("ground set is empty; copositivity would be vacuous")
    if res.incumbent_value < -tol:
        zt = np.concatenate(([1.0], res.incumbent))
        others = [np.concatenate(([1.0], o)) for o in res.others]
        return CopositivityVerdict(False, res.lower_bound, zt, float(zt @ M @ zt), others,
                                   res.incumbent, res.node_count)
    if res.status == "budget":
        raise RuntimeError("copositivity check exhausted its node budget without a verdict")
    return CopositivityVerdict(True, res.lower_bound, minimizer=res.incumbent,
                               nodes=res.node_count)


# --------------------------------------------------------------------------
# grid reference
# --------------------------------------------------------------------------

@dataclass
class BruteForceResult:
    value: object               # float, or INF when no grid point qualifies
    error_bound: float
    argmin: Optional[np.ndarray] = None

    def __float__(self):
        return float("inf") if self.value is INF else float(self.value)


def _grid(F: BlockFeasibleSet, resolution: int):
    lb, ub = F.box()
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(lb, ub)]
    h = float(max((hi - lo) / (resolution - 1) for lo, hi in zip(lb, ub)))
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, F.n)
    return pts, h


def project_batch(F: BlockFeasibleSet, Z, iters: int = 40, tol: float = 1e-10):
    """Vectorized Gauss-Newton restoration of many points; returns (points, ok mask)."""
    Z = np.array(Z, dtype=float)
    if F.nonneg:
        Z = np.maximum(Z, 0.0)
    if not F.quad_eqs:
        ok = np.einsum("ij,ij->i", Z, Z) <= F.ball_radius + tol
        return Z, ok
    Ds = np.array([D for D, _ in F.quad_eqs])
    rhs = np.array([b for _, b in F.quad_eqs])
    fixed = np.zeros(Z.shape, dtype=bool)
    for _ in range(iters):
        H = np.einsum("pi,jik,pk->pj", Z, Ds, Z) - rhs
        if np.abs(H).max(initial=0.0) <= tol:
            break
        J = 2.0 * np.einsum("jik,pk->pji", Ds, Z)
        J[np.repeat(fixed[:, None, :], len(rhs), axis=1)] = 0.0
        step = -np.einsum("pij,pj->pi", np.linalg.pinv(J, rcond=1e-12), H)
        Z = Z + step
        if F.nonneg:
            neg = Z < 0
            Z[neg] = 0.0
            fixed |= neg
    H = np.einsum("pi,jik,pk->pj", Z, Ds, Z) - rhs
    ok = (np.abs(H).max(axis=1) <= 1e-9) & (np.einsum("ij,ij->i", Z, Z) <= F.ball_radius + 1e-9)
    return Z, ok


def grid_points(F: BlockFeasibleSet, resolution: int):
    """Feasible points obtained by pulling near-feasible grid points onto F.

    Returns (points, delta): every point of F lies within ``delta`` of some
    returned point (grid covering radius plus the largest kept pull).
    """
    if F.n > 4:
        raise ValueError("grid reference is limited to n <= 4")
    if resolution < 10:
        raise ValueError("resolution must be at least 10")
    pts, h = _grid(F, resolution)
    cover = 0.5 * h * np.sqrt(F.n)
    R = np.sqrt(F.ball_radius)
    keep = np.ones(len(pts), dtype=bool)
    for D, rhs in F.quad_eqs:
        nD = np.linalg.norm(D, 2)
        slack = 2 * nD * R * cover + nD * cover ** 2
        vals = np.einsum("ij,jk,ik->i", pts, D, pts)
        keep &= np.abs(vals - rhs) <= slack
    keep &= np.einsum("ij,ij->i", pts, pts) <= F.ball_radius + 2 * R * cover + cover ** 2
    near = pts[keep]
    proj, ok = project_batch(F, near)
    disp = np.linalg.norm(proj - near, axis=1)
    # far pulls are redundant: the grid point nearest any z in F sits within
    # ``cover`` of F and its first-order pull is about that distance
    ok &= disp <= 2.0 * cover
    pull = float(disp[ok].max(initial=0.0))
    return proj[ok], cover + pull


def brute_force_min(form: QuadraticForm, F: BlockFeasibleSet, resolution: int = 60,
                    points=None) -> BruteForceResult:
    """Grid-based minimum of ``form`` over F with its error bound.

    The value is attained at a feasible point, so it never undercuts the true
    minimum; it exceeds it by at most ``error_bound`` = Lipschitz constant on
    the ball times the covering distance.  ``points`` may pass a precomputed
    ``grid_points`` pair.
    """
    pts, delta = grid_points(F, resolution) if points is None else points
    L = form.lipschitz_bound(np.sqrt(F.ball_radius))
    err = L * delta
    if len(pts) == 0:
        log.warning("no grid point passed the membership test")
        return BruteForceResult(INF, err)
    vals = np.einsum("ij,jk,ik->i", pts, form.Q, pts) + 2 * pts @ form.q + form.c
    i = int(np.argmin(vals))
    return BruteForceResult(float(vals[i]), float(err), pts[i])
