import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from copocut.benders import (REPORT_COLUMNS, BendersConfig, BendersState, audit_cuts,
                             cut_free_master_value, cuts_to_list, initial_point, phi_floor,
                             run_benders, solve_master, state_from_cuts, upper_bound_heuristic)
from copocut.envelope import EnvelopeSolver
from copocut.instances import GeneratorConfig, generate_instance
from copocut.model import BlockQcqpInstance, EnvelopeCertificate, check_membership
from copocut.oracle import solve_global

from conftest import simplex_set


def _ball_qp_min(A, a, r):
    """min x'Ax + 2a'x over |x|^2 <= r for PSD A, by the secular equation."""
    lam, V = np.linalg.eigh(A)
    g = V.T @ a

    def x_of(mu):
        return -g / (lam + mu)

    if lam[0] > 1e-12 and x_of(0.0) @ x_of(0.0) <= r:
        y = x_of(0.0)
    else:
        lo, hi = max(0.0, -lam[0]) + 1e-14, 1.0
        while x_of(hi) @ x_of(hi) > r:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if x_of(mid) @ x_of(mid) > r:
                lo = mid
            else:
                hi = mid
        y = x_of(hi)
    return float(y @ (lam * y) + 2.0 * g @ y)


@pytest.fixture(scope="module")
def desk():
    inst = generate_instance(GeneratorConfig(2, 2, 1, seed=3))
    rep = run_benders(inst, BendersConfig(eps=0.0))
    return inst, rep


def test_cut_free_master_is_convex_part_plus_floors():
    for seed in range(3):
        inst = generate_instance(GeneratorConfig(3, 3, 1, seed=seed))
        floors = [-(np.linalg.norm(A_i, "fro") * inst.r + 1.0) for A_i, _ in inst.blocks]
        assert phi_floor(inst) == pytest.approx(floors)
        expected = _ball_qp_min(inst.A, inst.a, inst.r) + sum(floors)
        assert cut_free_master_value(inst) == pytest.approx(expected, abs=1e-6)


def test_initial_point_uses_witnesses_or_global_solves():
    inst = generate_instance(GeneratorConfig(2, 3, 2, seed=0))
    assert np.array_equal(initial_point(inst), np.concatenate(inst.witnesses))
    bare = BlockQcqpInstance(inst.S, inst.n, inst.A, inst.a, inst.blocks, inst.r)
    x1 = initial_point(bare)
    for (_, F), x_i in zip(bare.blocks, bare.split(x1)):
        assert check_membership(F, x_i, 1e-6)


def test_one_exact_cut_per_block_raises_master_value():
    inst = generate_instance(GeneratorConfig(2, 2, 1, seed=1))
    state = BendersState(opt_cuts=[[], []], feas_cuts=[[], []], phi_floor=phi_floor(inst))
    x, xb, _, v0 = solve_master(inst, state)
    for i, (A_i, F) in enumerate(inst.blocks):
        out = EnvelopeSolver(A_i, F).evaluate(inst.witnesses[i])
        assert out.status == "value"
        state.opt_cuts[i].append(out.certificate)
    assert solve_master(inst, state)[3] >= v0 - 1e-9


def test_desk_instance_terminates_consistently(desk):
    inst, rep = desk
    assert rep.status == "converged"
    st_ = rep.state
    lbs = st_.lower_bounds
    assert all(b >= a - 1e-9 for a, b in zip(lbs, lbs[1:]))
    # recompute the master value at the final point from fresh envelope evaluations
    total = inst.convex_part(st_.x)
    for (A_i, F), x_i in zip(inst.blocks, st_.x_blocks):
        out = EnvelopeSolver(A_i, F).evaluate(x_i)
        assert out.status == "value"
        total += out.value
    assert rep.lower_bound == pytest.approx(total, abs=1e-4)


def test_desk_instance_bounds_bracket_global_optimum(desk):
    inst, rep = desk
    obj, F = inst.monolithic()
    ref = solve_global(obj, F, gap_tol=1e-7)
    assert ref.status == "optimal"
    # the global optimum lies in [ref.lower_bound, ref.incumbent_value]
    assert rep.lower_bound <= ref.incumbent_value + 1e-4
    assert rep.upper_bound is not None
    assert rep.upper_bound >= ref.lower_bound - 1e-4
    assert rep.upper_bound >= rep.lower_bound - 1e-6
    assert inst.is_feasible(rep.state.x_ub)
    assert inst.objective(rep.state.x_ub) == pytest.approx(rep.upper_bound)


def test_stopping_rule_adds_no_cut_on_reevaluation(desk):
    inst, rep = desk
    st_ = rep.state
    for i, ((A_i, F), x_i) in enumerate(zip(inst.blocks, st_.x_blocks)):
        out = EnvelopeSolver(A_i, F, rng=i).evaluate(x_i)
        assert out.status == "value"
        cut_val = out.certificate.affine(x_i)
        assert cut_val <= st_.phi[i] + 1e-4 * max(1.0, abs(cut_val)) + 1e-6


def test_cut_audit_passes_and_detects_a_bad_cut(desk):
    inst, rep = desk
    audit = audit_cuts(inst, rep.state)
    assert audit.ok and audit.checked > 0
    broken = state_from_cuts(cuts_to_list(rep.state), inst.S)
    broken.opt_cuts[0].append(EnvelopeCertificate(-100.0, np.zeros(inst.n)))
    assert not audit_cuts(inst, broken).ok


def test_convex_blocks_match_direct_convex_solve():
    rng = np.random.default_rng(4)
    S, n = 2, 2
    blocks = []
    for _ in range(S):
        R = rng.uniform(-1, 1, (n, n))
        blocks.append((R @ R.T, simplex_set(n)))
    R = rng.uniform(-0.5, 0.5, (S * n, S * n))
    A, a = R @ R.T / 4.0, rng.uniform(-1, 1, S * n)
    inst = BlockQcqpInstance(S, n, A, a, tuple(blocks), 10.0,
                             witnesses=tuple(np.full(n, 1.0 / n) for _ in range(S)))
    rep = run_benders(inst, BendersConfig(eps=0.0))
    assert rep.status == "converged"
    # every phi_i is convex on the simplex, so the relaxation is the problem itself:
    # minimize over x_i = (t_i, 1 - t_i) on a fine grid (error O(h^2) at an interior optimum)
    ts = np.linspace(0.0, 1.0, 401)
    T1, T2 = np.meshgrid(ts, ts, indexing="ij")
    X = np.stack([T1, 1 - T1, T2, 1 - T2], axis=-1).reshape(-1, 4)
    Qfull = A.copy()
    Qfull[:2, :2] += blocks[0][0]
    Qfull[2:, 2:] += blocks[1][0]
    vals = np.einsum("ki,ij,kj->k", X, Qfull, X) + 2 * X @ a
    best = float(vals.min())
    assert rep.lower_bound == pytest.approx(best, abs=2e-4)
    assert rep.lower_bound <= best + 1e-6


def test_single_block_envelope_embedding_reaches_minus_one():
    # phi(u) = -(u_2)^2 on the segment u_1 + u_2 = 1; its envelope is -u_2
    block = (np.array([[0.0, 0.0], [0.0, -1.0]]), simplex_set(2))
    inst = BlockQcqpInstance(1, 2, np.zeros((2, 2)), np.zeros(2), (block,), 10.0,
                             witnesses=(np.array([0.5, 0.5]),))
    rep = run_benders(inst, BendersConfig())
    assert rep.status == "converged"
    assert rep.lower_bound == pytest.approx(-1.0, abs=1e-3)
    assert rep.lower_bound <= -1.0 + 1e-4


def test_parallel_jobs_give_the_same_bounds(desk):
    inst, rep = desk
    rep2 = run_benders(inst, BendersConfig(eps=0.0, jobs=2))
    assert rep2.lower_bound == pytest.approx(rep.lower_bound, abs=1e-9)
    assert rep2.state.t_parallel <= rep2.state.t_total + 1e-12


def test_report_serialization(desk):
    _, rep = desk
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert tuple(rows[0]) == REPORT_COLUMNS
    assert len(rows) == len(rep.rows) + 1
    doc = json.loads(rep.to_json())
    assert doc["status"] == "converged"
    assert doc["LB"] == pytest.approx(rep.lower_bound)
    assert doc["t_parallel_s"] <= doc["t_total_s"] + 1e-12


def test_upper_bound_heuristic_rejects_points_outside_ball():
    inst = generate_instance(GeneratorConfig(2, 2, 1, seed=0))
    state = BendersState(opt_cuts=[[], []], feas_cuts=[[], []], incumbents=list(inst.witnesses))
    val, x = upper_bound_heuristic(state, inst)
    assert val == pytest.approx(inst.objective(x))
    small = BlockQcqpInstance(inst.S, inst.n, inst.A, inst.a, inst.blocks,
                              0.5 * float(np.concatenate(inst.witnesses) @ np.concatenate(inst.witnesses)))
    assert upper_bound_heuristic(state, small) is None


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.booleans(),
                          st.floats(-5, 5), st.lists(st.floats(-5, 5), min_size=2, max_size=2)),
                max_size=8))
def test_cut_list_round_trip(cuts):
    state = BendersState(opt_cuts=[[], [], []], feas_cuts=[[], [], []])
    for blk, opt, alpha, w in cuts:
        pool = state.opt_cuts if opt else state.feas_cuts
        pool[blk].append(EnvelopeCertificate(alpha, np.array(w)))
    back = state_from_cuts(cuts_to_list(state), 3)
    assert cuts_to_list(back) == cuts_to_list(state)
