"""Dense LP and ball-constrained convex QP solvers.

``solve_lp`` is a two-phase revised simplex with Bland's rule.  A HiGHS
backend (through scipy) is available for the many small node LPs of the
branch-and-bound oracle.  ``solve_ball_qp`` handles a convex quadratic with
linear rows and a single Euclidean ball on a subset of coordinates by an
active-set QP and a one-dimensional search on the ball multiplier.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq, linprog, lsq_linear

from .model import QuadraticForm


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-7
    optimality: float = 1e-7
    pivot: float = 1e-11


DEFAULT_TOLS = Tolerances()


class CyclingGuardExceeded(RuntimeError):
    """The simplex iteration cap was hit; reported instead of looping."""


@dataclass
class SolveStatus:
    """Outcome of an LP or ball-QP solve.

    ``status`` is ``"optimal"``, ``"unbounded"`` or ``"infeasible"``.  For an
    optimal point ``x``/``value``/``duals`` are set; ``ray`` holds an
    improving recession direction when unbounded and ``certificate`` a
    Farkas-type row combination when infeasible.
    """

    status: str
    x: Optional[np.ndarray] = None
    value: Optional[float] = None
    duals: dict = field(default_factory=dict)
    ray: Optional[np.ndarray] = None
    certificate: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class LinearProgram:
    """maximize c'v  s.t.  A_eq v = b_eq,  A_le v <= b_le,  lb <= v <= ub."""

    c: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    A_le: Optional[np.ndarray] = None
    b_le: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n)
        self.A_le, self.b_le = _rows(self.A_le, self.b_le, n)
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float).copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).copy()
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("bounds have wrong length")
        for arr in (self.c, self.A_eq, self.b_eq, self.A_le, self.b_le):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP data must be finite")

    @property
    def n(self) -> int:
        return self.c.size


def _rows(A, b, n):
    if A is None or len(A) == 0:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape != (b.size, n):
        raise ValueError(f"row block has shape {A.shape}, expected ({b.size}, {n})")
    return A, b


# --------------------------------------------------------------------------
# revised simplex
# --------------------------------------------------------------------------

class _Standard:
    """max c's  s.t. As = b, s >= 0, with a map back to the original space."""

    def __init__(self, lp: LinearProgram):
        n = lp.n
        cols = []          # (orig index, sign) per structural standard column
        shift = np.zeros(n)
        ub_rows = []
        for j in range(n):
            lo, hi = lp.lb[j], lp.ub[j]
            if np.isfinite(lo):
                shift[j] = lo
                cols.append((j, 1.0))
                if np.isfinite(hi):
                    ub_rows.append((len(cols) - 1, hi - lo))
            elif np.isfinite(hi):
                shift[j] = hi
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        T = np.zeros((n, len(cols)))
        for k, (j, s) in enumerate(cols):
            T[j, k] = s
        self.T, self.shift = T, shift
        ns = len(cols)
        m_eq, m_le, m_ub = lp.A_eq.shape[0], lp.A_le.shape[0], len(ub_rows)
        m = m_eq + m_le + m_ub
        nslack = m_le + m_ub
        A = np.zeros((m, ns + nslack))
        b = np.zeros(m)
        A[:m_eq, :ns] = lp.A_eq @ T
        b[:m_eq] = lp.b_eq - lp.A_eq @ shift
        A[m_eq:m_eq + m_le, :ns] = lp.A_le @ T
        b[m_eq:m_eq + m_le] = lp.b_le - lp.A_le @ shift
        A[m_eq:, ns:] = np.eye(nslack)
        for r, (k, cap) in enumerate(ub_rows):
            A[m_eq + m_le + r, k] = 1.0
            b[m_eq + m_le + r] = cap
        c = np.zeros(ns + nslack)
        c[:ns] = T.T @ lp.c
        self.A, self.b, self.c = A, b, c
        self.const = float(lp.c @ shift)
        self.ns, self.m_eq, self.m_le = ns, m_eq, m_le

    def to_original(self, s):
        return self.shift + self.T @ s[:self.ns]

    def ray_to_original(self, d):
        return self.T @ d[:self.ns]


def _simplex_phase(A, b, c, basis, tols, max_iter, allowed=None):
    """Bland-rule revised simplex for max c's, As = b, s >= 0 from a feasible basis."""
    m, N = A.shape
    basis = list(basis)
    it = 0
    while True:
        if it >= max_iter:
            raise CyclingGuardExceeded(f"simplex exceeded {max_iter} iterations")
        it += 1
        B = A[:, basis]
        lu = sla.lu_factor(B)
        xb = sla.lu_solve(lu, b)
        y = sla.lu_solve(lu, c[basis], trans=1)
        d = c - A.T @ y
        in_basis = np.zeros(N, dtype=bool)
        in_basis[basis] = True
        cand = np.flatnonzero((d > tols.optimality) & ~in_basis)
        if allowed is not None:
            cand = cand[allowed[cand]]
        if cand.size == 0:
            return "optimal", basis, xb, y, None, it
        j = int(cand[0])
        u = sla.lu_solve(lu, A[:, j])
        pos = u > tols.pivot
        if not np.any(pos):
            return "unbounded", basis, xb, y, (j, u), it
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(xb[pos], 0.0) / u[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-13 * max(1.0, best))
        leave = min(ties, key=lambda i: basis[i])
        basis[leave] = j


def solve_lp(lp: LinearProgram, method: str = "simplex", tols: Tolerances = DEFAULT_TOLS,
             max_iter: int = 50_000) -> SolveStatus:
    """Maximize ``lp``.  ``method`` is ``"simplex"`` (default) or ``"highs"``."""
    if method == "highs":
        return _solve_lp_highs(lp)
    if method != "simplex":
        raise ValueError(f"unknown LP method {method!r}")
    st = _Standard(lp)
    A, b = st.A.copy(), st.b.copy()
    m, N = A.shape
    if m == 0:
        if np.any(st.c > tols.optimality):
            j = int(np.flatnonzero(st.c > tols.optimality)[0])
            d = np.zeros(N)
            d[j] = 1.0
            return SolveStatus("unbounded", ray=st.ray_to_original(d))
        s = np.zeros(N)
        return SolveStatus("optimal", x=st.to_original(s), value=st.const,
                           duals={"eq": np.zeros(0), "le": np.zeros(0), "value": st.const})
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    # phase 1 with one artificial per row
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(N), -np.ones(m)])
    basis = list(range(N, N + m))
    status, basis, xb, y1, _, it1 = _simplex_phase(A1, b, c1, basis, tols, max_iter)
    infeas = float(-c1[basis] @ xb)
    if infeas > tols.feasibility * max(1.0, np.abs(b).max()):
        cert = y1.copy()
        cert[neg] *= -1
        return SolveStatus("infeasible", certificate=cert, iterations=it1)
    # drive zero-level artificials out of the basis, dropping redundant rows
    keep = np.ones(m, dtype=bool)
    B = A1[:, basis]
    for pos in range(m):
        if basis[pos] < N:
            continue
        row = np.linalg.solve(B, A1)[pos, :N]
        nz = np.flatnonzero(np.abs(row) > 1e-9)
        nz = [j for j in nz if j not in basis]
        if nz:
            basis[pos] = int(nz[0])
            B = A1[:, basis]
        else:
            keep[pos] = False
    rows = np.flatnonzero(keep)
    basis2 = [basis[i] for i in rows]
    A2, b2 = A[rows], b[rows]
    status, basis2, xb, y, extra, it2 = _simplex_phase(A2, b2, st.c, basis2, tols, max_iter)
    if status == "unbounded":
        j, u = extra
        d = np.zeros(N)
        d[j] = 1.0
        d[basis2] -= u
        return SolveStatus("unbounded", ray=st.ray_to_original(d), iterations=it1 + it2)
    s = np.zeros(N)
    s[basis2] = xb
    x = st.to_original(s)
    yfull = np.zeros(m)
    yfull[rows] = y
    yfull[neg] *= -1
    dual_value = float(yfull @ st.b) + st.const
    duals = {"eq": yfull[:st.m_eq], "le": yfull[st.m_eq:st.m_eq + st.m_le],
             "value": dual_value}
    return SolveStatus("optimal", x=x, value=float(lp.c @ x), duals=duals,
                       iterations=it1 + it2)


def _solve_lp_highs(lp: LinearProgram) -> SolveStatus:
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
              for lo, hi in zip(lp.lb, lp.ub)]
    res = linprog(-lp.c,
                  A_ub=lp.A_le if lp.A_le.shape[0] else None,
                  b_ub=lp.b_le if lp.A_le.shape[0] else None,
                  A_eq=lp.A_eq if lp.A_eq.shape[0] else None,
                  b_eq=lp.b_eq if lp.A_eq.shape[0] else None,
                  bounds=bounds, method="highs")
    if res.status == 0:
        duals = {}
        if getattr(res, "eqlin", None) is not None:
            duals["eq"] = -np.asarray(res.eqlin.marginals)
        if getattr(res, "ineqlin", None) is not None:
            duals["le"] = -np.asarray(res.ineqlin.marginals)
        return SolveStatus("optimal", x=res.x, value=float(lp.c @ res.x), duals=duals,
                           iterations=int(res.nit))
    if res.status == 2:
        return SolveStatus("infeasible")
    if res.status == 3:
        return SolveStatus("unbounded")
    raise RuntimeError(f"HiGHS failed: {res.message}")


# --------------------------------------------------------------------------
# convex QP with linear rows (primal active set)
# --------------------------------------------------------------------------

def _null_space(A, n):
    if A.shape[0] == 0:
        return np.eye(n)
    return sla.null_space(A, rcond=1e-12)


def _active_set(G, g, A_eq, b_eq, A_le, b_le, x, work, tols, max_iter=5000):
    """min 1/2 x'Gx + g'x over the polyhedron, from feasible ``x``.

    Returns (status, x, work, lam_eq, mu_le, ray).
    """
    n = x.size
    work = list(work)
    m_le = A_le.shape[0]
    for _ in range(max_iter):
        gx = G @ x + g
        AW = np.vstack([A_eq, A_le[work]]) if work else A_eq
        Z = _null_space(AW, n)
        p = np.zeros(n)
        zero_curv = False
        if Z.shape[1]:
            H = Z.T @ G @ Z
            r = Z.T @ gx
            vals, V = np.linalg.eigh(0.5 * (H + H.T))
            scale = max(1.0, np.abs(vals).max(initial=0.0))
            null = vals <= 1e-10 * scale
            r_null = V[:, null] @ (V[:, null].T @ r)
            if np.linalg.norm(r_null) > 1e-12 * max(1.0, np.linalg.norm(gx)):
                p = -Z @ r_null
                zero_curv = True
            else:
                rng = ~null
                p = -Z @ (V[:, rng] @ ((V[:, rng].T @ r) / vals[rng]))
        if not zero_curv and np.linalg.norm(p) <= 1e-12 * max(1.0, np.linalg.norm(x)):
            # multipliers from g + A_eq' lam + A_W' mu = 0
            if AW.shape[0]:
                sol, *_ = np.linalg.lstsq(AW.T, -gx, rcond=None)
            else:
                sol = np.zeros(0)
            lam = sol[:A_eq.shape[0]]
            mu = sol[A_eq.shape[0]:]
            if mu.size == 0 or mu.min() >= -tols.optimality:
                mu_full = np.zeros(m_le)
                mu_full[work] = np.maximum(mu, 0.0)
                return "optimal", x, work, lam, mu_full, None
            neg = np.flatnonzero(mu < -tols.optimality)
            drop = min(neg, key=lambda k: work[k])
            work.pop(int(drop))
            continue
        # ratio test
        step = np.inf if zero_curv else 1.0
        block = None
        if m_le:
            slope = A_le @ p
            inactive = np.ones(m_le, dtype=bool)
            inactive[work] = False
            cand = np.flatnonzero(inactive & (slope > 1e-14 * max(1.0, np.linalg.norm(p))))
            if cand.size:
                gaps = np.maximum(b_le[cand] - A_le[cand] @ x, 0.0) / slope[cand]
                k = int(np.argmin(gaps))
                if gaps[k] < step:
                    step, block = gaps[k], int(cand[k])
        if not np.isfinite(step):
            return "unbounded", x, work, None, None, p
        x = x + step * p
        if block is not None:
            work.append(block)
    raise CyclingGuardExceeded("active-set QP exceeded its iteration cap")


@dataclass
class BallQp:
    """minimize a convex form subject to linear rows and ||v_B||^2 <= rho."""

    form: QuadraticForm
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    A_le: Optional[np.ndarray] = None
    b_le: Optional[np.ndarray] = None
    ball_index: Optional[np.ndarray] = None
    rho: float = 1.0

    def __post_init__(self):
        n = self.form.n
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n)
        self.A_le, self.b_le = _rows(self.A_le, self.b_le, n)
        self.ball_index = (np.arange(n) if self.ball_index is None
                           else np.asarray(self.ball_index, dtype=int))
        if not self.rho > 0:
            raise ValueError("ball radius must be positive")
        if np.linalg.eigvalsh(self.form.Q)[0] < -1e-8 * max(1.0, np.abs(self.form.Q).max()):
            raise ValueError("BallQp objective must be convex")

    @property
    def n(self):
        return self.form.n


class _BallSolver:
    def __init__(self, qp: BallQp, tols):
        self.qp = qp
        self.tols = tols
        n = qp.n
        self.G = 2.0 * qp.form.Q
        self.g = 2.0 * qp.form.q
        self.P = np.zeros(n)
        self.P[qp.ball_index] = 1.0
        self.x = None
        self.work = []

    def norm2(self, x):
        return float(np.sum(x[self.qp.ball_index] ** 2))

    def solve_mu(self, mu, x0=None):
        qp = self.qp
        x0 = self.x if x0 is None else x0
        G = self.G + 2.0 * mu * np.diag(self.P)
        st, x, work, lam, mu_le, ray = _active_set(G, self.g, qp.A_eq, qp.b_eq, qp.A_le,
                                                   qp.b_le, x0.copy(), self.work, self.tols)
        if st == "optimal":
            self.x, self.work = x, work
        return st, x, lam, mu_le, ray


def _phase1_point(qp: BallQp, tols, lp_method="simplex"):
    n = qp.n
    lp = LinearProgram(np.zeros(n), qp.A_eq, qp.b_eq, qp.A_le, qp.b_le,
                       lb=np.full(n, -np.inf), ub=np.full(n, np.inf))
    res = solve_lp(lp, method=lp_method, tols=tols)
    return res


def solve_ball_qp(qp: BallQp, tols: Tolerances = DEFAULT_TOLS, x0=None,
                  lp_method: str = "simplex") -> SolveStatus:
    """Globally minimize the convex ball QP; ``x0`` may warm start a feasible point.

    ``lp_method`` selects the LP backend for the phase-1 feasible point.
    """
    n = qp.n
    rho = qp.rho
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        ok = (np.all(np.abs(qp.A_eq @ x0 - qp.b_eq) <= 1e-9)
              and np.all(qp.A_le @ x0 <= qp.b_le + 1e-9))
        if not ok:
            x0 = None
    if x0 is None:
        p1 = _phase1_point(qp, tols, lp_method)
        if p1.status == "infeasible":
            return SolveStatus("infeasible", certificate=p1.certificate)
        x0 = p1.x
    solver = _BallSolver(qp, tols)
    solver.x = x0
    st, x, lam, mu_le, ray = solver.solve_mu(0.0)
    feas_tol = 1e-12 * max(1.0, rho)
    if st == "optimal" and solver.norm2(x) <= rho + feas_tol:
        return _finish(qp, x, lam, mu_le, 0.0)
    # ball is binding: find mu > 0 with ||x_B(mu)||^2 = rho
    lo, hi = 0.0, 1.0
    checked_far = False
    while True:
        st, x, lam, mu_le, ray = solver.solve_mu(hi)
        if st != "optimal":
            return SolveStatus("unbounded", ray=ray)
        if solver.norm2(x) <= rho:
            break
        lo, hi = hi, hi * 4.0
        if hi > 1e8 and not checked_far:
            checked_far = True
            Gn = np.diag(2.0 * solver.P)
            s, xf, *_ = _active_set(Gn, np.zeros(n), qp.A_eq, qp.b_eq, qp.A_le, qp.b_le,
                                    solver.x.copy(), [], tols)
            if s == "optimal" and solver.norm2(xf) > rho + tols.feasibility * max(1.0, rho):
                return SolveStatus("infeasible")
        if hi > 1e18:
            return SolveStatus("infeasible")
    if solver.norm2(x) >= rho - feas_tol:
        return _finish(qp, x, lam, mu_le, hi)

    def g_of(mu):
        s, xx, *_ = solver.solve_mu(mu)
        if s != "optimal":
            return 1.0
        return solver.norm2(xx) - rho

    mu_star = brentq(g_of, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    st, x, lam, mu_le, _ = solver.solve_mu(mu_star)
    if solver.norm2(x) > rho:
        # step to the feasible side of the root
        mu_star = np.nextafter(mu_star, np.inf)
        for _ in range(60):
            st, x, lam, mu_le, _ = solver.solve_mu(mu_star)
            if solver.norm2(x) <= rho + feas_tol:
                break
            mu_star *= 1.0 + 1e-12
    return _finish(qp, x, lam, mu_le, mu_star)


def _finish(qp, x, lam, mu_le, mu_ball):
    value = float(x @ qp.form.Q @ x + 2.0 * qp.form.q @ x + qp.form.c)
    return SolveStatus("optimal", x=x, value=value,
                       duals={"eq": lam, "le": mu_le, "ball": float(mu_ball)})


def max_over_cone_ball(c, A, zero_tol: float = 1e-9) -> SolveStatus:
    """maximize c'y  s.t.  A y <= 0,  ||y|| <= 1.

    The maximizer is the normalized projection of c onto the cone; the
    projection comes from the polar decomposition c = P_C(c) + A'lam with
    lam = argmin_{lam >= 0} ||c - A'lam|| (a bounded least-squares problem).  This avoids the
    fully degenerate vertex at the origin an active-set method would face.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    A = np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, c.size)
    if A.shape[0]:
        # bvls: scipy's nnls can report a zero residual at a wrong point here
        sol = lsq_linear(A.T, c, bounds=(0.0, np.inf), method="bvls", tol=1e-15)
        lam = sol.x
        y = c - A.T @ lam
    else:
        lam, y = np.zeros(0), c.copy()
    norm = float(np.linalg.norm(y))
    if norm <= zero_tol * max(1.0, float(np.linalg.norm(c))):
        return SolveStatus("optimal", x=np.zeros_like(c), value=0.0, duals={"le": lam})
    return SolveStatus("optimal", x=y / norm, value=norm, duals={"le": lam / norm})


def kkt_residual(qp: BallQp, res: SolveStatus) -> float:
    """Max violation among stationarity, feasibility and complementarity."""
    x = res.x
    lam, mu, nu = res.duals["eq"], res.duals["le"], res.duals["ball"]
    P = np.zeros(qp.n)
    P[qp.ball_index] = 1.0
    grad = 2.0 * qp.form.Q @ x + 2.0 * qp.form.q + 2.0 * nu * P * x
    if qp.A_eq.shape[0]:
        grad = grad + qp.A_eq.T @ lam
    if qp.A_le.shape[0]:
        grad = grad + qp.A_le.T @ mu
    ball = float(np.sum(x[qp.ball_index] ** 2) - qp.rho)
    parts = [np.abs(grad).max(initial=0.0),
             np.abs(qp.A_eq @ x - qp.b_eq).max(initial=0.0),
             np.maximum(qp.A_le @ x - qp.b_le, 0.0).max(initial=0.0),
             max(ball, 0.0),
             abs(nu * ball),
             np.abs(mu * (qp.A_le @ x - qp.b_le)).max(initial=0.0),
             max(-nu, 0.0), np.maximum(-mu, 0.0).max(initial=0.0)]
    return float(max(parts))


def farkas_holds(lp: LinearProgram, certificate, tol: float = 1e-9) -> bool:
    """Check y with A'y >= 0 and b'y < 0 on the standardized rows of ``lp``."""
    st = _Standard(lp)
    y = np.asarray(certificate, dtype=float)
    return bool(np.all(st.A.T @ y >= -tol) and st.b @ y < -tol)
