import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from copocut.instances import GeneratorConfig, generate_instance
from copocut.model import (INF, CutPool, EnvelopeCertificate, LiftedProgram, QuadraticForm,
                           check_membership, eval_phi_block, is_inf)

from conftest import simplex_set


def test_constant_form():
    f = QuadraticForm(np.zeros((3, 3)), np.zeros(3), 5.0)
    assert f(np.array([1.0, -2.0, 7.0])) == 5.0


def test_identity_form():
    assert QuadraticForm(np.eye(2))(np.array([1.0, 1.0])) == 2.0


def test_bilinear_form_on_simplex_point():
    # 2Bxy + Cy^2 with B = 0, C = 1 at (1/2, 1/2), i.e. (1-x)^2 at x = 1/2
    B, C = 0.0, 1.0
    f = QuadraticForm(np.array([[0.0, B], [B, C]]))
    assert f(np.array([0.5, 0.5])) == pytest.approx(0.25)
    assert f(np.array([0.5, 0.5])) == pytest.approx((C - 2 * B) * 0.25 + 2 * (B - C) * 0.5 + C)


def test_homogenized_roundtrip():
    f = QuadraticForm(np.array([[1.0, 2.0], [0.0, 3.0]]), np.array([0.5, -1.0]), 2.0)
    g = QuadraticForm.from_homogeneous(f.homogenized())
    np.testing.assert_array_equal(f.Q, g.Q)
    z = np.array([0.3, -0.7])
    assert f(z) == pytest.approx(np.concatenate([[1.0], z]) @ f.homogenized() @ np.concatenate([[1.0], z]))


def test_membership_simplex():
    F = simplex_set(2, radius=2.0)
    assert check_membership(F, np.array([0.5, 0.5]), 1e-8)
    assert not check_membership(F, np.array([2.0, -1.0]), 1e-8)


def test_membership_generated_witness():
    inst = generate_instance(GeneratorConfig(2, 3, 2, seed=3))
    for (_, F), w in zip(inst.blocks, inst.witnesses):
        assert check_membership(F, w, F.tol)


def test_phi_block_simplex():
    F = simplex_set(2)
    assert eval_phi_block(np.eye(2), F, np.array([0.5, 0.5])) == pytest.approx(0.5)
    assert eval_phi_block(np.eye(2), F, np.array([0.7, 0.7])) is INF


def test_phi_block_generated_witness():
    inst = generate_instance(GeneratorConfig(2, 3, 1, seed=1))
    for (A_i, F), w in zip(inst.blocks, inst.witnesses):
        assert eval_phi_block(A_i, F, w) == pytest.approx(float(w @ A_i @ w), abs=1e-14)


def test_infinity_is_a_sentinel():
    assert is_inf(INF) and not is_inf(float("inf"))
    with pytest.raises(TypeError):
        INF + 1.0


def test_lifted_program_inserts_normalization_row():
    F = simplex_set(2)
    g = np.ones(2)
    H = np.zeros((3, 3))
    H[0, 1:] = H[1:, 0] = 0.5 * g
    lp = LiftedProgram(np.eye(3), ((H, 1.0),), F, (1, 1))
    H0, b0 = lp.constraints[0]
    assert b0 == 1.0 and H0[0, 0] == 1.0 and np.count_nonzero(H0) == 1


def test_envelope_certificate_values():
    cert = EnvelopeCertificate(0.5, np.array([3.0, 4.0]), 0.1)
    u = np.array([1.0, 0.0])
    assert cert.affine(u) == pytest.approx(-0.5 - 6.0)
    assert cert.value(u) == pytest.approx(-6.5 - 2 * 0.1 * 5.0)


sym = arrays(np.float64, (3, 3), elements=st.floats(-10, 10, allow_nan=False, width=64))


@given(sym)
def test_symmetrization_idempotent(M):
    a = QuadraticForm(M).Q
    b = QuadraticForm(M).Q
    assert a.tobytes() == b.tobytes()
    assert QuadraticForm(a).Q.tobytes() == a.tobytes()


@given(arrays(np.float64, 2, elements=st.floats(-2, 2, allow_nan=False)))
def test_phi_infinite_exactly_outside(x):
    F = simplex_set(2)
    val = eval_phi_block(np.eye(2), F, x)
    assert is_inf(val) == (not check_membership(F, x, F.tol))


@settings(max_examples=50)
@given(arrays(np.float64, 2, elements=st.floats(-2, 2, allow_nan=False)))
def test_cut_pool_rejects_nonmembers(u):
    F = simplex_set(2)
    pool = CutPool(F)
    z = np.concatenate([[1.0], u])
    if check_membership(F, u, pool.tol):
        assert pool.add(z)
        assert not pool.add(z)          # duplicate
    else:
        with pytest.raises(ValueError):
            pool.add(z)
        assert len(pool) == 0
