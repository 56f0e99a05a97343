"""Cutting-plane solution of set-copositive duals.

Every dual handled here has the shape

    maximize  c'y - 2 eps ||y_N||   s.t.  M0 + sum_i y_i M_i  in COP(cone({1} x F))

with ``y_N`` an optional subset of the variables.  The cone is replaced by
the cuts ``z' M(y) z >= 0`` for the points z = [1, zeta] of a CutPool; each
master iterate goes to the copositivity oracle, which either certifies it
or hands back violated points that become new cuts.  The pool is the only
state carried between calls, so Benders keeps one per block.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.optimize import OptimizeResult, linprog

from .convex import CyclingGuardExceeded, LinearProgram, max_over_cone_ball, solve_lp
from .model import (CutPool, EnvelopeCertificate, LiftedProgram, QuadraticCertificate,
                    QuadraticForm, symmetrize)
from .oracle import check_set_copositivity, project_to_set, sample_feasible

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
TRUST = 1e4
SEED_SAMPLES = 20


class CuttingPlaneFailed(RuntimeError):
    """Iteration budget exhausted or the oracle kept returning known points."""


class NoImprovingRay(RuntimeError):
    """The point is (numerically) inside the envelope's domain."""


class UnboundedDual(RuntimeError):
    """The dual master stays on its trust box after certification."""


class InfeasibleSearch(RuntimeError):
    """No certificate meets the side constraints inside the outer approximation."""


@dataclass
class TraceRecord:
    k: int
    master_value: float
    oracle_min: float
    pool_size: int
    event: str


@dataclass
class DualMasterState:
    pool: CutPool
    S: Optional[np.ndarray] = None
    k: int = 0
    values: List[float] = field(default_factory=list)
    trace: List[TraceRecord] = field(default_factory=list)


@dataclass
class EnvelopeOutcome:
    status: str                                  # value | unbounded | failed
    value: Optional[float] = None
    certificate: Optional[EnvelopeCertificate] = None
    trace: List[TraceRecord] = field(default_factory=list)
    incumbent: Optional[np.ndarray] = None       # oracle minimizer z_K on F
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "value"


def seed_pool(pool: CutPool, k: int = SEED_SAMPLES, rng=0) -> None:
    """Initial outer approximation: projected axis points and random points of F."""
    F = pool.F
    R = np.sqrt(F.ball_radius)
    for j in range(F.n):
        z = project_to_set(F, R * np.eye(F.n)[j])
        if z is not None:
            pool.add(np.concatenate(([1.0], z)))
    for z in sample_feasible(F, k, rng):
        pool.add(np.concatenate(([1.0], z)))
    if len(pool) == 0:
        raise ValueError("could not find any point of the ground set")


def _row_violation(res, A, b, bounds):
    x = res.x
    lo = np.array([-np.inf if l is None else l for l, _ in bounds])
    hi = np.array([np.inf if h is None else h for _, h in bounds])
    scale = 1.0 + np.abs(x).max(initial=0.0)
    return max(float(np.max(A @ x - b, initial=0.0)),
               float(np.max(lo - x, initial=0.0)), float(np.max(x - hi, initial=0.0))) / scale


def _linprog(cost, A, b, bounds, tol=1e-9, dense_rows=300):
    """Solve a master LP; results are checked because large iterates strain HiGHS.

    Order: HiGHS dual simplex, HiGHS IPM, then the dense Bland simplex when
    the LP has at most ``dense_rows`` rows.  Otherwise the least violating
    HiGHS answer is returned with status 4 so callers can decide.  Tighter
    HiGHS tolerances were tried and made matters worse on these problems.
    """
    best, best_v = None, np.inf
    for method in ("highs-ds", "highs-ipm"):
        res = linprog(cost, A_ub=A, b_ub=b, bounds=bounds, method=method)
        if res.status == 2:
            return res
        if res.x is not None:
            v = _row_violation(res, A, b, bounds)
            if res.status == 0 and v <= tol:
                return res
            if v < best_v:
                best, best_v = res, v
    if A.shape[0] <= dense_rows:
        log.debug("HiGHS master unreliable; using the dense simplex")
        lo = np.array([-np.inf if l is None else l for l, _ in bounds])
        hi = np.array([np.inf if h is None else h for _, h in bounds])
        try:
            own = solve_lp(LinearProgram(-np.asarray(cost), A_le=A, b_le=b, lb=lo, ub=hi))
        except CyclingGuardExceeded:
            log.debug("dense simplex hit its iteration guard")
        else:
            if own.optimal:
                return OptimizeResult(x=own.x, fun=-own.value, status=0, message="dense simplex")
            if own.status == "infeasible":
                return OptimizeResult(x=None, fun=None, status=2, message="dense simplex: infeasible")
    if best is None:
        return OptimizeResult(x=None, fun=None, status=4, message="no usable LP solution")
    log.debug("accepting a master solution with relative row violation %.2g", best_v)
    best.status = 4
    return best


class _Dual:
    """LP master plus oracle loop for one affine copositive constraint."""

    def __init__(self, M0, basis, c, pool: CutPool, *, norm_index=(), eps=0.0,
                 tol=DEFAULT_TOL, trust=TRUST, collect=5, state=None):
        self.M0 = symmetrize(M0)
        self.basis = np.array([symmetrize(B) for B in basis])
        self.c = np.asarray(c, dtype=float)
        self.pool = pool
        self.norm_index = np.asarray(norm_index, dtype=int)
        self.eps = float(eps)
        self.tol = tol
        self.trust = trust
        self.collect = collect
        self.extra_A: List[np.ndarray] = []
        self.extra_b: List[float] = []
        p = self.c.size
        self.p = p
        self.norm_cuts = []
        if self.eps > 0:
            for j in self.norm_index:
                for sgn in (1.0, -1.0):
                    u = np.zeros(p)
                    u[j] = sgn
                    self.norm_cuts.append(u)
        self._rows = np.zeros((0, p))
        self._rhs = np.zeros(0)
        self.state = state or DualMasterState(pool)
        self.hint = None
        # a basis element that is a multiple of E00 shifts every cut value alike
        B0 = self.basis[0] if p else None
        self.shift = None
        if B0 is not None and B0[0, 0] != 0 and np.count_nonzero(B0) == 1:
            self.shift = float(B0[0, 0])

    # -- cut bookkeeping ---------------------------------------------------
    def matrix(self, y) -> np.ndarray:
        return self.M0 + np.tensordot(y, self.basis, axes=1)

    def _sync_rows(self):
        cuts = self.pool.cuts
        if len(cuts) > self._rows.shape[0]:
            Z = np.array(cuts[self._rows.shape[0]:])
            coef = np.einsum("ki,pij,kj->kp", Z, self.basis, Z)
            rhs = np.einsum("ki,ij,kj->k", Z, self.M0, Z)
            self._rows = np.vstack([self._rows, -coef])
            self._rhs = np.concatenate([self._rhs, rhs])

    def add_row(self, a, b):
        self.extra_A.append(np.asarray(a, dtype=float))
        self.extra_b.append(float(b))

    # -- master ------------------------------------------------------------
    def _lp_data(self):
        self._sync_rows()
        p = self.p
        has_t = int(self.eps > 0)
        nv = p + has_t
        rows = [np.hstack([self._rows, np.zeros((self._rows.shape[0], has_t))])]
        rhs = [self._rhs]
        if self.extra_A:
            E = np.array(self.extra_A)
            rows.append(np.hstack([E, np.zeros((E.shape[0], has_t))]))
            rhs.append(np.array(self.extra_b))
        if has_t and self.norm_cuts:
            U = np.array(self.norm_cuts)
            rows.append(np.hstack([U, -np.ones((U.shape[0], 1))]))
            rhs.append(np.zeros(U.shape[0]))
        A = np.vstack(rows)
        b = np.concatenate(rhs)
        cost = np.concatenate([-self.c, [2.0 * self.eps] if has_t else []])
        bounds = [(-self.trust, self.trust)] * p + ([(0.0, None)] if has_t else [])
        return A, b, cost, bounds, nv

    def solve_master(self):
        while True:
            A, b, cost, bounds, nv = self._lp_data()
            res = _linprog(cost, A, b, bounds)
            if res.status == 2:
                raise InfeasibleSearch("dual master is infeasible")
            if res.x is None:
                raise RuntimeError(f"dual master failed: {res.message}")
            best = float(res.fun)
            # among optimal masters prefer the smallest certificate (L1)
            delta = 1e-9 * (1.0 + abs(best))
            A2 = np.vstack([np.hstack([A, np.zeros((A.shape[0], self.p))]),
                            np.hstack([cost, np.zeros(self.p)])[None, :],
                            np.hstack([np.eye(self.p), np.zeros((self.p, nv - self.p)), -np.eye(self.p)]),
                            np.hstack([-np.eye(self.p), np.zeros((self.p, nv - self.p)), -np.eye(self.p)])])
            b2 = np.concatenate([b, [best + delta], np.zeros(2 * self.p)])
            cost2 = np.concatenate([np.zeros(nv), np.ones(self.p)])
            res2 = _linprog(cost2, A2, b2, bounds + [(0.0, None)] * self.p)
            v = res2.x[:nv] if res2.status == 0 and res.status == 0 else res.x
            y = v[:self.p]
            if self.eps > 0:
                t = v[self.p]
                wn = float(np.linalg.norm(y[self.norm_index]))
                # value_of uses the exact norm, so a looser tangent set only
                # costs master optimality, never certificate validity
                if wn > t + 1e-8 * (1.0 + t) and len(self.norm_cuts) < 400:
                    u = np.zeros(self.p)
                    u[self.norm_index] = y[self.norm_index] / wn
                    self.norm_cuts.append(u)
                    continue
            return y, self.value_of(y)

    def value_of(self, y) -> float:
        val = float(self.c @ y)
        if self.eps > 0:
            val -= 2.0 * self.eps * float(np.linalg.norm(y[self.norm_index]))
        return val

    def on_box(self, y) -> bool:
        return bool(np.abs(y).max(initial=0.0) >= (1.0 - 1e-6) * self.trust)

    # -- loop --------------------------------------------------------------
    def run(self, max_iter: int, box_hook: Optional[Callable] = None,
            side_check: Optional[Callable] = None):
        """Iterate until certified.  Returns (status, y, verdict)."""
        st = self.state
        for _ in range(max_iter):
            y, val = self.solve_master()
            st.k += 1
            st.values.append(val)
            if side_check is not None and side_check(self, y):
                st.trace.append(TraceRecord(st.k, val, np.nan, len(self.pool), "side"))
                continue
            S = self.matrix(y)
            st.S = S
            boxed = self.on_box(y)
            if boxed and box_hook is not None:
                size = len(self.pool)
                out = box_hook(y)
                if out is not None:
                    st.trace.append(TraceRecord(st.k, val, np.nan, len(self.pool), "box"))
                    return "hook", y, out
                if len(self.pool) > size:
                    # the hook shares the pool; its new points already cut off y
                    st.trace.append(TraceRecord(st.k, val, np.nan, len(self.pool), "cut"))
                    continue
            verdict = self._check(S)
            if verdict.nonnegative:
                st.trace.append(TraceRecord(st.k, val, verdict.certified_min, len(self.pool),
                                            "certified"))
                return ("boxed" if boxed else "value"), y, verdict
            added = self._absorb(verdict)
            if not added:
                verdict = self._check(S, deep=True)
                if verdict.nonnegative:
                    st.trace.append(TraceRecord(st.k, val, verdict.certified_min,
                                                len(self.pool), "certified"))
                    return ("boxed" if boxed else "value"), y, verdict
                if not self._absorb(verdict):
                    fixed = self._repair(y, verdict)
                    if fixed is not None:
                        y, verdict = fixed
                        st.trace.append(TraceRecord(st.k, self.value_of(y), verdict.certified_min,
                                                    len(self.pool), "repair"))
                        return ("boxed" if boxed else "value"), y, verdict
                    st.trace.append(TraceRecord(st.k, val, verdict.value, len(self.pool), "stall"))
                    return "stall", y, verdict
            st.trace.append(TraceRecord(st.k, val, verdict.value, len(self.pool), "cut"))
        return "budget", y, None

    def _repair(self, y, verdict, max_shift=100.0):
        """Shift the E00 coordinate by the certified deficit of S(y).

        Used when the oracle only re-finds pooled points, which happens when
        y is large enough that near-duplicate pool points differ in value.
        [1,z]'(S + mu E00)[1,z] = [1,z]'S[1,z] + mu, so the shifted matrix is
        certified copositive once mu covers the certified minimum.
        """
        need = -float(verdict.certified_min)
        if self.shift is None or not np.isfinite(need) or need > max_shift * self.tol:
            return None
        y2 = np.array(y, dtype=float)
        y2[0] += max(need, 0.0) / self.shift
        if self.extra_A and np.any(np.array(self.extra_A) @ y2 > np.array(self.extra_b) + 1e-9):
            return None
        check = self._check(self.matrix(y2))
        if not check.nonnegative:
            return None
        log.debug("repaired a stalled master by shifting E00 by %.3g", need)
        return y2, check

    def _check(self, S, deep=False):
        kw = dict(gap_tol=self.tol / 100.0, rel_gap=0.0) if deep else {}
        seeds = [self.hint] if self.hint is not None else None
        v = check_set_copositivity(S, self.pool.F, self.tol, seeds=seeds,
                                   collect=self.collect, **kw)
        if v.minimizer is not None:
            self.hint = v.minimizer
        return v

    def _absorb(self, verdict) -> int:
        added = 0
        for z in [verdict.z] + list(verdict.others):
            try:
                added += self.pool.add(z)
            except ValueError:
                log.debug("oracle point rejected by the pool")
        return added


# --------------------------------------------------------------------------
# envelope dual
# --------------------------------------------------------------------------

def _objective_matrix(A_or_form, n: int) -> np.ndarray:
    if isinstance(A_or_form, QuadraticForm):
        if A_or_form.n != n:
            raise ValueError("objective and ground set dimensions differ")
        return A_or_form.homogenized()
    A = symmetrize(A_or_form)
    if A.shape != (n, n):
        raise ValueError("objective and ground set dimensions differ")
    M = np.zeros((n + 1, n + 1))
    M[1:, 1:] = A
    return M


def _affine_basis(n: int, n_x: int):
    d = n + 1
    basis = [np.zeros((d, d))]
    basis[0][0, 0] = 1.0
    for j in range(n_x):
        B = np.zeros((d, d))
        B[0, 1 + j] = B[1 + j, 0] = 1.0
        basis.append(B)
    return basis


class EnvelopeSolver:
    """Evaluates the closed convex envelope of one block at varying points.

    The objective may be an n x n matrix (pure quadratic block) or a
    QuadraticForm on the joint space, in which case only the first ``n_x``
    coordinates are the envelope argument.
    """

    def __init__(self, objective, F, n_x: Optional[int] = None, tol: float = DEFAULT_TOL,
                 pool: Optional[CutPool] = None, rng=0, collect: int = 5):
        self.F = F
        self.n_x = F.n if n_x is None else int(n_x)
        if not 1 <= self.n_x <= F.n:
            raise ValueError("n_x must lie in 1..F.n")
        self.M0 = _objective_matrix(objective, F.n)
        self.tol = tol
        self.collect = collect
        self.pool = pool if pool is not None else CutPool(F)
        if len(self.pool) == 0:
            seed_pool(self.pool, rng=rng)

    def evaluate(self, x, eps: float = 0.0, max_iter: int = 200,
                 ray_on_box: bool = True) -> EnvelopeOutcome:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.n_x,):
            raise ValueError(f"x must have length {self.n_x}")
        if eps < 0:
            raise ValueError("eps must be nonnegative")
        c = np.concatenate([[-1.0], -2.0 * x])
        dual = _Dual(self.M0, _affine_basis(self.F.n, self.n_x), c, self.pool,
                     norm_index=np.arange(1, 1 + self.n_x), eps=eps, tol=self.tol,
                     collect=self.collect)

        def hook(y):
            if not ray_on_box:
                return None
            try:
                return self.improving_ray(x, eps=eps, max_iter=max_iter)
            except NoImprovingRay:
                return None

        status, y, extra = dual.run(max_iter, box_hook=hook)
        trace = dual.state.trace
        if status == "hook":
            return EnvelopeOutcome("unbounded", certificate=extra, trace=trace,
                                   message="master unbounded; improving ray found")
        if status in ("value", "boxed"):
            cert = EnvelopeCertificate(float(y[0]), y[1:].copy(), eps)
            if status == "boxed":
                # certified but pinned to the trust region: treat as unbounded
                try:
                    ray = self.improving_ray(x, eps=eps, max_iter=max_iter)
                    return EnvelopeOutcome("unbounded", certificate=ray, trace=trace)
                except NoImprovingRay:
                    log.warning("trust region active at a certified envelope dual")
            return EnvelopeOutcome("value", dual.value_of(y), cert, trace, extra.minimizer)
        msg = "oracle repeated a pooled point" if status == "stall" else "iteration budget exhausted"
        return EnvelopeOutcome("failed", dual.state.values[-1] if dual.state.values else None,
                               EnvelopeCertificate(float(y[0]), y[1:].copy(), eps), trace,
                               message=msg)

    def improving_ray(self, x, eps: float = 0.0, max_iter: int = 200,
                      tol: Optional[float] = None) -> EnvelopeCertificate:
        """Direction (alpha, w), ||(alpha, w)|| <= 1, improving the dual at x."""
        tol = self.tol if tol is None else tol
        x = np.asarray(x, dtype=float).reshape(-1)
        n_x = self.n_x
        d = self.F.n + 1
        basis = _affine_basis(self.F.n, n_x)
        coef_cache = {}
        norm_cuts = []
        if eps > 0:
            for j in range(n_x):
                for sgn in (1.0, -1.0):
                    u = np.zeros(n_x)
                    u[j] = sgn
                    norm_cuts.append(u)
        hint = None
        nv = 1 + n_x + (eps > 0)
        cost = np.concatenate([[1.0], 2.0 * x, [2.0 * eps] if eps > 0 else []])
        for _ in range(max_iter):
            rows = []
            for z in self.pool.cuts:
                key = z.tobytes()
                if key not in coef_cache:
                    coef_cache[key] = -np.array([z @ B @ z for B in basis])
                rows.append(np.concatenate([coef_cache[key], [0.0] if eps > 0 else []]))
            for u in norm_cuts:
                rows.append(np.concatenate([[0.0], u, [-1.0]]))
            A = np.array(rows)
            # the rows are homogeneous, so this is a cone-times-ball problem
            res = max_over_cone_ball(-cost, np.array(rows))
            if res.value <= tol:
                # the outer approximation already caps the gain
                raise NoImprovingRay(f"no improving ray at x (relaxed gain {res.value:.3g})")
            y = res.x
            alpha, w = float(y[0]), y[1:1 + n_x]
            if eps > 0:
                wn = float(np.linalg.norm(w))
                if wn > y[-1] + 1e-10:
                    norm_cuts.append(w / wn)
                    continue
            S = np.zeros((d, d))
            S[0, 0] = alpha
            S[0, 1:1 + n_x] = S[1:1 + n_x, 0] = w
            verdict = check_set_copositivity(S, self.F, tol, seeds=[hint] if hint is not None else None,
                                             collect=self.collect)
            if verdict.minimizer is not None:
                hint = verdict.minimizer
            if verdict.nonnegative:
                gain = -alpha - 2.0 * x @ w - 2.0 * eps * float(np.linalg.norm(w))
                if gain > tol:
                    return EnvelopeCertificate(alpha, w.copy(), eps)
                raise NoImprovingRay(f"no improving ray at x (best gain {gain:.3g})")
            added = 0
            for z in [verdict.z] + list(verdict.others):
                try:
                    added += self.pool.add(z)
                except ValueError:
                    pass
            if not added:
                raise CuttingPlaneFailed("ray search stalled on a pooled point")
        raise CuttingPlaneFailed("ray search exhausted its iteration budget")


def evaluate_envelope(A_i, F, x, eps: float = 0.0, tol: float = DEFAULT_TOL,
                      max_iter: int = 200, *, n_x: Optional[int] = None,
                      pool: Optional[CutPool] = None) -> EnvelopeOutcome:
    """Closed convex envelope of the block value function at ``x``."""
    return EnvelopeSolver(A_i, F, n_x=n_x, tol=tol, pool=pool).evaluate(x, eps, max_iter)


def find_improving_ray(F, x, tol: float = DEFAULT_TOL, max_iter: int = 200, eps: float = 0.0,
                       *, pool: Optional[CutPool] = None, n_x: Optional[int] = None
                       ) -> EnvelopeCertificate:
    """Feasibility-cut direction separating ``x`` from conv F.

    Raises NoImprovingRay when x is (numerically) inside the domain.
    """
    solver = EnvelopeSolver(np.zeros((F.n, F.n)), F, n_x=n_x, tol=tol, pool=pool)
    return solver.improving_ray(x, eps=eps, max_iter=max_iter)


# --------------------------------------------------------------------------
# quadratic cuts
# --------------------------------------------------------------------------

def _quadratic_layout(lp: LiftedProgram):
    d = lp.dim
    n_x = lp.n_x
    basis = [-H for H, _ in lp.constraints]
    for j in range(n_x):
        B = np.zeros((d, d))
        B[0, 1 + j] = B[1 + j, 0] = -0.5
        basis.append(B)
    pairs = [(j, l) for j in range(n_x) for l in range(j, n_x)]
    for j, l in pairs:
        B = np.zeros((d, d))
        B[1 + j, 1 + l] = B[1 + l, 1 + j] = -1.0
        basis.append(B)
    return basis, pairs


def _quad_coeffs(x, pairs):
    return np.array([x[j] * x[l] * (1.0 if j == l else 2.0) for j, l in pairs])


def _unpack(lp: LiftedProgram, y, pairs) -> QuadraticCertificate:
    K = len(lp.constraints)
    n_x = lp.n_x
    lam = y[:K].copy()
    w = y[K:K + n_x].copy()
    W = np.zeros((n_x, n_x))
    for v, (j, l) in zip(y[K + n_x:], pairs):
        W[j, l] = W[l, j] = v
    return QuadraticCertificate(lam, w, W, lp.b)


def _quadratic_pool(lp, pool, rng=0):
    pool = pool if pool is not None else CutPool(lp.ground)
    if len(pool) == 0:
        seed_pool(pool, rng=rng)
    return pool


def seed_slice(pool: CutPool, n_x: int, x, k: int = 5, rng=0) -> int:
    """Add points of F whose first n_x coordinates equal x.

    Without such a point the quadratic dual is unbounded at x: a steep
    concave quadratic can peak at x while staying below every pooled value.
    """
    F = pool.F
    rng = np.random.default_rng(rng)
    lb, ub = F.box()
    hold = np.zeros(F.n, dtype=bool)
    hold[:n_x] = True
    added = 0
    for _ in range(10 * k):
        z0 = rng.uniform(lb, ub)
        z0[:n_x] = x
        z = project_to_set(F, z0, hold=hold)
        if z is not None:
            try:
                added += pool.add(np.concatenate(([1.0], z)))
            except ValueError:
                continue
            if added >= k:
                break
    return added


def solve_quadratic_dual(lp: LiftedProgram, x, tol: float = DEFAULT_TOL, max_iter: int = 300,
                         *, pool: Optional[CutPool] = None) -> QuadraticCertificate:
    """Quadratic underestimator of the value function, tight at ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (lp.n_x,):
        raise ValueError(f"x must have length {lp.n_x}")
    basis, pairs = _quadratic_layout(lp)
    c = np.concatenate([lp.b, x, _quad_coeffs(x, pairs)])
    pool = _quadratic_pool(lp, pool)
    seed_slice(pool, lp.n_x, x)
    dual = _Dual(lp.objective, basis, c, pool, tol=tol)
    status, y, _ = dual.run(max_iter)
    if status == "boxed":
        raise UnboundedDual("quadratic dual unbounded (x outside the domain?)")
    if status != "value":
        raise CuttingPlaneFailed(f"quadratic dual stopped: {status}")
    cert = _unpack(lp, y, pairs)
    object.__setattr__(cert, "trace", dual.state.trace)
    return cert


def search_convex_quadratic(lp: LiftedProgram, x1, target_value: float, x2,
                            tol: float = DEFAULT_TOL, max_iter: int = 500, *,
                            target_tol: float = 1e-5,
                            pool: Optional[CutPool] = None) -> QuadraticCertificate:
    """Convex quadratic underestimator supporting the envelope at ``x1``.

    Among certificates with q(x1) = target_value (within ``target_tol``) and
    W PSD, maximize x2'Wx2.  PSD-ness is imposed by eigenvector cuts.
    """
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    basis, pairs = _quadratic_layout(lp)
    K = len(lp.constraints)
    n_x = lp.n_x
    p = len(basis)
    c = np.zeros(p)
    c[K + n_x:] = _quad_coeffs(x2, pairs)
    at_x1 = np.concatenate([lp.b, x1, _quad_coeffs(x1, pairs)])
    pool = _quadratic_pool(lp, pool)
    seed_slice(pool, lp.n_x, x1)
    dual = _Dual(lp.objective, basis, c, pool, tol=tol)
    dual.add_row(at_x1, target_value + target_tol)
    dual.add_row(-at_x1, -target_value + target_tol)

    def psd_cut(d, y):
        W = _unpack(lp, y, pairs).W
        vals, vecs = np.linalg.eigh(W)
        if vals[0] >= -tol:
            return False
        v = vecs[:, 0]
        row = np.zeros(p)
        row[K + n_x:] = -_quad_coeffs(v, pairs)
        d.add_row(row, 0.0)
        return True

    status, y, _ = dual.run(max_iter, side_check=psd_cut)
    if status not in ("value", "boxed"):
        raise CuttingPlaneFailed(f"convex search stopped: {status}")
    if status == "boxed":
        log.warning("convex search certificate sits on the trust region")
    cert = _unpack(lp, y, pairs)
    object.__setattr__(cert, "trace", dual.state.trace)
    return cert
