import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from copocut import instances
from copocut.instances import (SENTINEL, GeneratorConfig, fixture, generate_instance, grid_envelope,
                               sample_surface, surface_csv, triangle_grid)
from copocut.model import QuadraticCertificate, check_membership, is_inf

FIVE_EIGHTHS = (-0.25, 0.75, 0.125)


def test_small_generated_instance_is_valid():
    inst = generate_instance(GeneratorConfig(1, 2, 1, seed=0))
    assert inst.S == 1 and inst.n == 2 and len(inst.witnesses) == 1
    (A_i, F), w = inst.blocks[0], inst.witnesses[0]
    assert F.m == 1
    assert check_membership(F, w)
    assert np.linalg.eigvalsh(A_i)[0] >= -1e-12
    assert np.linalg.eigvalsh(inst.A)[0] >= -1e-12
    assert inst.r == pytest.approx(2.0 * float(w @ w))
    assert inst.is_feasible(w)


def test_entry_ranges():
    inst = generate_instance(GeneratorConfig(2, 3, 2, seed=1))
    # A = R R'/4 with |R_ij| <= 1/2 gives |A_ij| <= n/16
    assert np.abs(inst.A).max() <= inst.dim / 16 + 1e-12
    for A_i, F in inst.blocks:
        assert np.abs(A_i).max() <= inst.n / 16 + 1e-12
        for D, _ in F.quad_eqs:
            assert np.count_nonzero(D - np.diag(np.diag(D))) == 0
            assert np.all((np.diag(D) >= 2.0) & (np.diag(D) <= 3.0))


def test_generation_aborts_on_inconsistent_constraints():
    # two equalities d z^2 = 1 in one variable need identical d
    with pytest.raises(instances.GenerationError, match="after 50 draws"):
        generate_instance(GeneratorConfig(1, 1, 2, seed=0))


def test_negated_blocks():
    plain = generate_instance(GeneratorConfig(1, 3, 1, seed=4))
    neg = generate_instance(GeneratorConfig(1, 3, 1, seed=4, negate_blocks=True))
    assert np.allclose(neg.blocks[0][0], -plain.blocks[0][0])


def test_generation_is_deterministic():
    cfg = GeneratorConfig(2, 3, 2, seed=9)
    assert instances.dumps(generate_instance(cfg)) == instances.dumps(generate_instance(cfg))
    other = GeneratorConfig(2, 3, 2, seed=10)
    assert instances.dumps(generate_instance(cfg)) != instances.dumps(generate_instance(other))


@settings(max_examples=10, deadline=None)
@given(S=st.integers(1, 2), n=st.integers(1, 3), m=st.integers(1, 2), seed=st.integers(0, 10_000))
def test_round_trip_and_feasible_witnesses(S, n, m, seed):
    # m >= n diagonal equalities through a common point are almost surely inconsistent
    m = min(m, max(1, n - 1))
    inst = generate_instance(GeneratorConfig(S, n, m, seed=seed))
    text = instances.dumps(inst)
    assert instances.dumps(instances.loads(text)) == text
    assert inst.r > 0
    for (_, F), w in zip(inst.blocks, inst.witnesses):
        assert check_membership(F, w)


def test_file_round_trip_and_schema(tmp_path):
    inst = generate_instance(GeneratorConfig(2, 2, 1, seed=2))
    path = tmp_path / "inst.json"
    instances.save(inst, path)
    doc = json.loads(path.read_text())
    assert doc["schema_version"] == instances.SCHEMA_VERSION
    assert doc["rng"]["algorithm"] == instances.RNG_ALGORITHM
    assert doc["rng"]["seed"] == 2
    back = instances.load(path)
    assert instances.dumps(back) == instances.dumps(inst)
    assert np.array_equal(back.A, inst.A)


def test_bad_schema_version_is_rejected():
    doc = instances.instance_to_dict(generate_instance(GeneratorConfig(1, 2, 1, seed=0)))
    doc["schema_version"] = 99
    with pytest.raises(ValueError):
        instances.instance_from_dict(doc)


def test_fixture_references():
    env = fixture("env-simplex", b=-1.0)
    for x in np.linspace(0, 1, 11):
        assert env.envelope([x]) == pytest.approx(-(1 - x))
    assert is_inf(env.envelope([1.2]))
    quad = fixture("quad-1d", B=0.0, C=1.0)
    for x in np.linspace(0, 1, 11):
        assert quad.phi([x]) == pytest.approx((1 - x) ** 2)
    q2 = fixture("quad-2d")
    assert q2.n_x == 2 and q2.ground.n == 4
    assert np.allclose(q2.program.objective[3:, 3:], [[1.5566, 0.5781], [0.5781, 0.2557]])
    assert np.allclose(q2.program.objective[1:3, 3:], -np.eye(2))


def test_unknown_fixture():
    with pytest.raises(ValueError, match="unknown fixture"):
        fixture("nope")


def test_quad_2d_phi_against_dense_slice_sampling():
    fix = fixture("quad-2d")
    C = np.array(instances.QUAD_2D_C)
    ts = np.linspace(0, 1, 2001)
    for x in ([0.25, 0.25], [0.1, 0.6], [0.0, 0.0], [0.5, 0.5]):
        x = np.array(x)
        s = 1 - x.sum()
        Y = s * np.stack([ts, 1 - ts], axis=1)
        vals = -2 * Y @ x + np.einsum("ki,ij,kj->k", Y, C, Y)
        assert fix.phi(x) == pytest.approx(vals.min(), abs=1e-6)
        assert fix.phi(x) <= vals.min() + 1e-12


def test_grid_envelope_of_convex_function_is_itself():
    pts = np.linspace(0, 1, 51)[:, None]
    assert grid_envelope(lambda p: (p[0] - 0.3) ** 2, pts, [0.3]) == pytest.approx(0.0, abs=1e-12)
    assert grid_envelope(lambda p: -p[0] ** 2, pts, [0.5]) == pytest.approx(-0.5)
    assert is_inf(grid_envelope(lambda p: 0.0, pts, [2.0]))
    assert len(triangle_grid(4)) == 15


@pytest.fixture(scope="module")
def quad1d_surface():
    fix = fixture("quad-1d", B=0.0, C=1.0)
    cert = QuadraticCertificate(np.array(FIVE_EIGHTHS), np.array([-0.5]), np.array([[-0.5]]),
                                fix.program.b)
    grid = np.linspace(0.0, 1.0, 101)[:, None]
    return fix, cert, sample_surface(fix, grid, certificates=[cert])


def test_surface_phi_matches_closed_form(quad1d_surface):
    _, _, rows = quad1d_surface
    for x, phi, env, qs, status in rows:
        assert status == "ok"
        assert phi == pytest.approx((1 - x[0]) ** 2, abs=1e-6)


def test_surface_envelope_never_exceeds_phi(quad1d_surface):
    _, _, rows = quad1d_surface
    assert all(env <= phi + 1e-4 for _, phi, env, _, _ in rows)


def test_surface_certificate_column(quad1d_surface):
    _, cert, rows = quad1d_surface
    for x, _, _, qs, _ in rows:
        u = x[0]
        assert qs[0] == pytest.approx(5 / 8 - u / 2 - u * u / 2, abs=1e-12)
        assert qs[0] == pytest.approx(cert(np.array(x)))


def test_surface_csv_discipline():
    fix = fixture("env-simplex", b=1.0)
    grid = np.linspace(-0.25, 1.25, 13)[:, None]
    rows = sample_surface(fix, grid, phi_method="closed")
    text = surface_csv(rows, 1, 0)
    table = list(csv.DictReader(io.StringIO(text)))
    assert list(table[0]) == ["x1", "phi", "envelope", "status"]
    xs = [float(r["x1"]) for r in table]
    assert xs == sorted(xs)
    for r in table:
        inside = 0.0 <= float(r["x1"]) <= 1.0
        for col in ("phi", "envelope"):
            assert r[col] != "nan"
            if inside:
                assert np.isfinite(float(r[col]))
            else:
                assert r[col] == SENTINEL
        assert r["status"] == "ok"
