"""Benders loop for the block QCQP: convex master plus per-block envelope cuts.

Each block keeps one EnvelopeSolver (and hence one cut pool) for the whole
run, so later envelope evaluations start from every ground-set point found
so far.  Optimality cuts are stored as (alpha, w) with the meaning
``phi_i >= -alpha - 2 w'x_i``; feasibility cuts as ``-alpha - 2 w'x_i <= 0``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .convex import BallQp, solve_ball_qp
from .envelope import DEFAULT_TOL, EnvelopeOutcome, EnvelopeSolver
from .model import BlockQcqpInstance, EnvelopeCertificate, QuadraticForm, check_membership
from .oracle import sample_feasible, solve_global

log = logging.getLogger(__name__)

REPORT_COLUMNS = ("k", "LB", "UB", "gap", "n_opt_cuts", "n_feas_cuts", "t_total_s", "t_parallel_s")


class BendersAbort(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class BendersConfig:
    eps: float = 0.05
    tol: float = DEFAULT_TOL
    stop_rel: float = 1e-4
    max_iter: int = 100
    envelope_max_iter: int = 200
    jobs: int = 1
    x_nonneg: bool = False        # the two-stage master drops x >= 0; blocks enforce it
    time_limit: Optional[float] = None


@dataclass
class BendersState:
    k: int = 0
    x: Optional[np.ndarray] = None
    x_blocks: List[np.ndarray] = field(default_factory=list)
    phi: Optional[np.ndarray] = None
    opt_cuts: List[List[EnvelopeCertificate]] = field(default_factory=list)
    feas_cuts: List[List[EnvelopeCertificate]] = field(default_factory=list)
    lower_bounds: List[float] = field(default_factory=list)
    ub: Optional[float] = None
    x_ub: Optional[np.ndarray] = None
    incumbents: List[Optional[np.ndarray]] = field(default_factory=list)
    block_times: List[List[float]] = field(default_factory=list)
    phi_floor: Optional[np.ndarray] = None

    @property
    def t_total(self) -> float:
        return float(sum(sum(ts) for ts in self.block_times))

    @property
    def t_parallel(self) -> float:
        return float(sum(max(ts) for ts in self.block_times if ts))


@dataclass
class BendersReport:
    status: str
    lower_bound: float
    upper_bound: Optional[float]
    rows: List[dict]
    state: BendersState
    wall_time: float

    @property
    def gap(self) -> Optional[float]:
        if self.upper_bound is None:
            return None
        return self.upper_bound - self.lower_bound

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: ("" if row[k] is None else row[k]) for k in REPORT_COLUMNS})
        return buf.getvalue()

    def to_json(self) -> str:
        st = self.state
        doc = {
            "status": self.status,
            "LB": self.lower_bound,
            "UB": self.upper_bound,
            "gap": self.gap,
            "t_total_s": st.t_total,
            "t_parallel_s": st.t_parallel,
            "wall_time_s": self.wall_time,
            "iterations": self.rows,
            "x": None if st.x is None else [float(v) for v in st.x],
            "cuts": cuts_to_list(st),
        }
        return json.dumps(doc, indent=1)


def cuts_to_list(state: BendersState) -> List[dict]:
    out = []
    for kind, pools in (("opt", state.opt_cuts), ("feas", state.feas_cuts)):
        for i, pool in enumerate(pools):
            for cut in pool:
                out.append({"block": i, "kind": kind, "alpha": float(cut.alpha),
                            "w": [float(v) for v in cut.w]})
    return out


def state_from_cuts(cuts, S: int) -> BendersState:
    """Rebuild the cut pools of a state from ``cuts_to_list`` output."""
    state = BendersState(opt_cuts=[[] for _ in range(S)], feas_cuts=[[] for _ in range(S)])
    for c in cuts:
        cert = EnvelopeCertificate(float(c["alpha"]), np.array(c["w"], dtype=float))
        (state.opt_cuts if c["kind"] == "opt" else state.feas_cuts)[int(c["block"])].append(cert)
    return state


def phi_floor(instance: BlockQcqpInstance) -> np.ndarray:
    """Trivial lower bounds -(||A_i||_F r + 1) on the block values."""
    return np.array([-(np.linalg.norm(A_i, "fro") * instance.r + 1.0) for A_i, _ in instance.blocks])


def initial_point(instance: BlockQcqpInstance) -> np.ndarray:
    """Concatenated block feasible points (stored witnesses when present)."""
    if instance.witnesses:
        return np.concatenate(instance.witnesses)
    parts = []
    n = instance.n
    for i, (_, F) in enumerate(instance.blocks):
        res = solve_global(QuadraticForm(np.zeros((n, n))), F, gap_tol=1.0)
        if res.incumbent is None:
            raise ValueError(f"block {i} has an empty feasible set")
        parts.append(res.incumbent)
    return np.concatenate(parts)


def solve_master(instance: BlockQcqpInstance, state: BendersState,
                 config: Optional[BendersConfig] = None):
    """Convex master over (x, phi) with every pooled cut; returns (x, blocks, phi, value)."""
    config = config or BendersConfig()
    S, n = instance.S, instance.n
    N = S * n
    nv = N + S
    Q = np.zeros((nv, nv))
    Q[:N, :N] = instance.A
    q = np.concatenate([instance.a, 0.5 * np.ones(S)])
    rows, rhs = [], []
    for i in range(S):
        sl = slice(i * n, (i + 1) * n)
        for cut in state.opt_cuts[i]:
            row = np.zeros(nv)
            row[sl] = -2.0 * cut.w
            row[N + i] = -1.0
            rows.append(row)
            rhs.append(cut.alpha)
        for cut in state.feas_cuts[i]:
            row = np.zeros(nv)
            row[sl] = -2.0 * cut.w
            rows.append(row)
            rhs.append(cut.alpha)
        row = np.zeros(nv)
        row[N + i] = -1.0
        rows.append(row)
        rhs.append(-state.phi_floor[i])
    if config.x_nonneg:
        for j in range(N):
            row = np.zeros(nv)
            row[j] = -1.0
            rows.append(row)
            rhs.append(0.0)
    qp = BallQp(QuadraticForm(Q, q), A_le=np.array(rows), b_le=np.array(rhs),
                ball_index=np.arange(N), rho=instance.r)
    res = solve_ball_qp(qp, lp_method="highs")
    if not res.optimal:
        raise BendersAbort(f"master {res.status}; check feasibility cuts with audit_cuts")
    v = res.x
    x = v[:N]
    return x, instance.split(x), v[N:], float(res.value)


def cut_free_master_value(instance: BlockQcqpInstance) -> float:
    """Master value before any cut: convex part over the ball plus the phi floors."""
    state = BendersState(opt_cuts=[[] for _ in range(instance.S)],
                         feas_cuts=[[] for _ in range(instance.S)],
                         phi_floor=phi_floor(instance))
    return solve_master(instance, state)[3]


def upper_bound_heuristic(state: BendersState, instance: BlockQcqpInstance):
    """Objective at the concatenated oracle incumbents, when inside the ball."""
    if not state.incumbents or any(z is None for z in state.incumbents):
        return None
    x_ub = np.concatenate(state.incumbents)
    if x_ub @ x_ub > instance.r:
        return None
    if not all(check_membership(F, z, F.tol) for (_, F), z in zip(instance.blocks, state.incumbents)):
        return None
    return float(instance.objective(x_ub)), x_ub


def _evaluate_block(solver: EnvelopeSolver, x_i, config: BendersConfig):
    t0 = time.perf_counter()
    out = solver.evaluate(x_i, eps=config.eps, max_iter=config.envelope_max_iter)
    if out.status == "unbounded" and config.eps > 0:
        # the regularized dual is often still unbounded near the domain edge
        retry = solver.evaluate(x_i, eps=2.0 * config.eps, max_iter=config.envelope_max_iter)
        if retry.status != "failed":
            out = retry
    return out, time.perf_counter() - t0


def run_benders(instance: BlockQcqpInstance, config: Optional[BendersConfig] = None,
                progress=None) -> BendersReport:
    config = config or BendersConfig()
    t_start = time.perf_counter()
    S = instance.S
    solvers = [EnvelopeSolver(A_i, F, tol=config.tol, rng=i) for i, (A_i, F) in enumerate(instance.blocks)]
    state = BendersState(opt_cuts=[[] for _ in range(S)], feas_cuts=[[] for _ in range(S)],
                         incumbents=[None] * S, phi_floor=phi_floor(instance))
    rows: List[dict] = []
    pool_exec = ThreadPoolExecutor(max_workers=config.jobs) if config.jobs > 1 else None

    def batch(points):
        if pool_exec is None:
            return [_evaluate_block(s, p, config) for s, p in zip(solvers, points)]
        futs = [pool_exec.submit(_evaluate_block, s, p, config) for s, p in zip(solvers, points)]
        return [f.result() for f in futs]

    def absorb(results, x_blocks, phi):
        added = 0
        for i, (out, _) in enumerate(results):
            if out.status == "value":
                cert = out.certificate
                cut_val = cert.affine(x_blocks[i])
                state.incumbents[i] = out.incumbent
                target = -np.inf if phi is None else phi[i]
                if cut_val > target + config.stop_rel * max(1.0, abs(cut_val)):
                    state.opt_cuts[i].append(EnvelopeCertificate(cert.alpha, cert.w, 0.0))
                    added += 1
            elif out.status == "unbounded":
                state.feas_cuts[i].append(out.certificate)
                added += 1
            else:
                raise BendersAbort(f"block {i}: envelope evaluation failed ({out.message})",
                                   _report("aborted"))
        return added

    def _report(status):
        lb = state.lower_bounds[-1] if state.lower_bounds else -np.inf
        return BendersReport(status, lb, state.ub, rows, state, time.perf_counter() - t_start)

    def update_ub(candidate):
        if candidate is not None and (state.ub is None or candidate[0] < state.ub):
            state.ub, state.x_ub = candidate

    try:
        x1 = initial_point(instance)
        probe = batch(instance.split(x1))
        state.block_times.append([t for _, t in probe])
        absorb(probe, instance.split(x1), None)
        if x1 @ x1 <= instance.r:
            update_ub((float(instance.objective(x1)), x1))
        update_ub(upper_bound_heuristic(state, instance))
        status = "budget"
        for k in range(1, config.max_iter + 1):
            x, xb, phi, value = solve_master(instance, state, config)
            state.k, state.x, state.x_blocks, state.phi = k, x, xb, phi
            if state.lower_bounds and value < state.lower_bounds[-1] - 1e-9:
                log.warning("master value decreased by %.3g", state.lower_bounds[-1] - value)
            state.lower_bounds.append(value)
            results = batch(xb)
            state.block_times.append([t for _, t in results])
            added = absorb(results, xb, phi)
            update_ub(upper_bound_heuristic(state, instance))
            if instance.is_feasible(x):
                update_ub((float(instance.objective(x)), x))
            rows.append({
                "k": k, "LB": value, "UB": state.ub,
                "gap": None if state.ub is None else state.ub - value,
                "n_opt_cuts": sum(len(c) for c in state.opt_cuts),
                "n_feas_cuts": sum(len(c) for c in state.feas_cuts),
                "t_total_s": state.t_total, "t_parallel_s": state.t_parallel,
            })
            if progress is not None:
                progress(rows[-1])
            if added == 0:
                status = "converged"
                break
            if config.time_limit and time.perf_counter() - t_start > config.time_limit:
                status = "time"
                break
    finally:
        if pool_exec is not None:
            pool_exec.shutdown()
    return _report(status)


# --------------------------------------------------------------------------
# audit
# --------------------------------------------------------------------------

@dataclass
class CutAudit:
    checked: int
    violations: List[tuple]

    @property
    def ok(self) -> bool:
        return not self.violations


def audit_cuts(instance: BlockQcqpInstance, state: BendersState, n_points: int = 200,
               tol: float = 1e-5, rng=0) -> CutAudit:
    """Check every pooled cut at sampled points of its block's feasible set.

    Optimality cuts must underestimate phi_i (the unregularized form, which
    implies the regularized one); feasibility cuts must be <= tol.
    """
    rng = np.random.default_rng(rng)
    checked = 0
    bad = []
    for i, (A_i, F) in enumerate(instance.blocks):
        U = sample_feasible(F, n_points, rng)
        if len(U) == 0:
            continue
        phi = np.einsum("ki,ij,kj->k", U, A_i, U)
        for j, cut in enumerate(state.opt_cuts[i]):
            vals = -cut.alpha - 2.0 * U @ cut.w
            excess = float(np.max(vals - phi))
            checked += len(U)
            if excess > tol:
                bad.append(("opt", i, j, excess))
        for j, cut in enumerate(state.feas_cuts[i]):
            vals = -cut.alpha - 2.0 * U @ cut.w
            excess = float(np.max(vals))
            checked += len(U)
            if excess > tol:
                bad.append(("feas", i, j, excess))
    return CutAudit(checked, bad)
