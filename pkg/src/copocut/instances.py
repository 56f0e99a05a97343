"""Instance generation, small analytic fixtures and JSON serialization."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .model import (INF, BlockFeasibleSet, BlockQcqpInstance, LiftedProgram, QuadraticForm,
                    is_inf)
from .oracle import solve_global

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RNG_ALGORITHM = "PCG64"


class GenerationError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# generator
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorConfig:
    S: int
    n: int
    m: int
    seed: int = 0
    negate_blocks: bool = False
    max_retries: int = 50

    def __post_init__(self):
        if min(self.S, self.n, self.m) < 1:
            raise ValueError("S, n and m must be at least 1")


def _psd_from_raw(rng, k):
    raw = rng.uniform(-0.5, 0.5, size=(k, k))
    return raw @ raw.T / 4.0


def _probe(n, eqs, probe_radius):
    """Feasible point of the candidate block, or None if certified empty."""
    F = BlockFeasibleSet(n, tuple(eqs), probe_radius)
    res = solve_global(QuadraticForm(np.zeros((n, n))), F, gap_tol=1.0, node_budget=5000)
    if res.incumbent is not None:
        return res.incumbent
    if res.status == "infeasible":
        return None
    raise GenerationError("feasibility probe was inconclusive")


def generate_instance(cfg: GeneratorConfig) -> BlockQcqpInstance:
    """Random block QCQP with PSD coupling, diagonal block equalities and witnesses."""
    rng = np.random.default_rng(cfg.seed)
    S, n = cfg.S, cfg.n
    A = _psd_from_raw(rng, S * n)
    a = rng.uniform(-0.5, 0.5, size=S * n)
    block_A = []
    block_eqs = []
    witnesses = []
    # z'Qz = 1 with Q >= 2I keeps ||z||^2 <= 1/2, so this radius never binds
    probe_radius = float(n)
    for i in range(S):
        A_i = _psd_from_raw(rng, n)
        if cfg.negate_blocks:
            A_i = -A_i
        eqs = []
        witness = None
        for j in range(cfg.m):
            for attempt in range(cfg.max_retries):
                D = np.diag(rng.uniform(2.0, 3.0, size=n))
                z = _probe(n, eqs + [(D, 1.0)], probe_radius)
                if z is not None:
                    eqs.append((D, 1.0))
                    witness = z
                    break
            else:
                raise GenerationError(
                    f"block {i}: constraint {j} infeasible after {cfg.max_retries} draws")
        block_A.append(A_i)
        block_eqs.append(eqs)
        witnesses.append(witness)
    x_feas = np.concatenate(witnesses)
    r = 2.0 * float(x_feas @ x_feas)
    blocks = tuple((A_i, BlockFeasibleSet(n, tuple(eqs), r)) for A_i, eqs in zip(block_A, block_eqs))
    meta = {"generator": {"algorithm": RNG_ALGORITHM, "seed": cfg.seed, "S": S, "n": n,
                          "m": cfg.m, "negate_blocks": cfg.negate_blocks}}
    return BlockQcqpInstance(S, n, A, a, blocks, r, tuple(witnesses), meta)


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

def _mat(M):
    return [[float(v) for v in row] for row in np.asarray(M)]


def instance_to_dict(inst: BlockQcqpInstance) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "rng": inst.meta.get("generator", {}),
        "dimensions": {"S": inst.S, "n": inst.n, "m": [F.m for _, F in inst.blocks]},
        "r": inst.r,
        "A": _mat(inst.A),
        "a": [float(v) for v in inst.a],
        "blocks": [
            {"A_i": _mat(A_i),
             "constraints": [{"D": _mat(D), "rhs": rhs} for D, rhs in F.quad_eqs],
             "witness": [float(v) for v in w] if inst.witnesses else None}
            for (A_i, F), w in zip(inst.blocks, inst.witnesses or [None] * inst.S)
        ],
    }


def instance_from_dict(data: dict) -> BlockQcqpInstance:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version!r}")
    dims = data["dimensions"]
    S, n = int(dims["S"]), int(dims["n"])
    r = float(data["r"])
    blocks = []
    witnesses = []
    for blk in data["blocks"]:
        eqs = tuple((np.array(c["D"], dtype=float), float(c["rhs"])) for c in blk["constraints"])
        blocks.append((np.array(blk["A_i"], dtype=float), BlockFeasibleSet(n, eqs, r)))
        if blk.get("witness") is not None:
            witnesses.append(np.array(blk["witness"], dtype=float))
    meta = {"generator": dict(data.get("rng", {}))}
    return BlockQcqpInstance(S, n, np.array(data["A"], dtype=float), np.array(data["a"], dtype=float),
                             tuple(blocks), r, tuple(witnesses), meta)


def dumps(inst: BlockQcqpInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1) + "\n"


def loads(text: str) -> BlockQcqpInstance:
    return instance_from_dict(json.loads(text))


def save(inst: BlockQcqpInstance, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(inst))


def load(path) -> BlockQcqpInstance:
    with open(path) as fh:
        return loads(fh.read())


# --------------------------------------------------------------------------
# fixtures
# --------------------------------------------------------------------------

@dataclass
class Fixture:
    """A small lifted program with reference value functions attached.

    ``phi`` and ``envelope`` take the first-stage point and return a float
    or INF outside the domain.  ``envelope`` is None when no closed form or
    cheap reference exists.
    """

    name: str
    params: Dict[str, float]
    program: LiftedProgram
    phi: Callable
    envelope: Optional[Callable] = None
    in_domain: Callable = field(default=lambda x: True)

    @property
    def ground(self) -> BlockFeasibleSet:
        return self.program.ground

    @property
    def objective(self) -> QuadraticForm:
        return self.program.objective_form()

    @property
    def n_x(self) -> int:
        return self.program.n_x


def _simplex_program(Qhat, weights, rhs, n_x, radius):
    """Ground {z >= 0, (g'z)^2 = rhs^2} with g'z = rhs also listed as a lifted row."""
    g = np.asarray(weights, dtype=float)
    n = g.size
    H_lin = np.zeros((n + 1, n + 1))
    H_lin[0, 1:] = H_lin[1:, 0] = 0.5 * g
    H_sq = np.zeros((n + 1, n + 1))
    H_sq[1:, 1:] = np.outer(g, g)
    ground = BlockFeasibleSet(n, ((np.outer(g, g), rhs * rhs),), radius)
    return LiftedProgram(Qhat, ((H_lin, rhs), (H_sq, rhs * rhs)), ground, (n_x, n - n_x))


def _quadratic_in_x_envelope(phi0, phi1, kappa, lo, hi):
    """Envelope of a 1-D quadratic on [lo, hi]: itself if convex, else the chord."""
    def env(x):
        x = float(np.ravel(x)[0])
        if not lo - 1e-12 <= x <= hi + 1e-12:
            return INF
        if kappa >= 0:
            return None
        t = (x - lo) / (hi - lo)
        return (1 - t) * phi0 + t * phi1
    return env


def _env_simplex(a=0.0, b=1.0, c=0.0, f=1.0, g=1.0, d=1.0):
    if min(f, g, d) <= 0:
        raise ValueError("only the compact case f, g, d > 0 is supported")
    Qhat = np.array([[0.0, 0.0, 0.5 * c], [0.0, 0.0, a], [0.5 * c, a, b]])
    hi = d / f
    radius = 2.0 * max(hi, d / g) ** 2
    prog = _simplex_program(Qhat, [f, g], d, 1, radius)

    def in_domain(x):
        x = float(np.ravel(x)[0])
        return -1e-12 <= x <= hi + 1e-12

    def phi(x):
        x = float(np.ravel(x)[0])
        if not in_domain(x):
            return INF
        y = max((d - f * x) / g, 0.0)
        return 2 * a * x * y + b * y * y + c * y

    kappa = -2 * a * f / g + b * f * f / (g * g)
    chord = _quadratic_in_x_envelope(phi(0.0), phi(hi), kappa, 0.0, hi)

    def envelope(x):
        v = chord(x)
        return phi(x) if v is None else v

    return Fixture("env-simplex", dict(a=a, b=b, c=c, f=f, g=g, d=d), prog, phi, envelope, in_domain)


def _quad_program(B, C):
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n_x, n_y = B.shape
    n = n_x + n_y
    Qhat = np.zeros((n + 1, n + 1))
    Qhat[1:1 + n_x, 1 + n_x:] = B
    Qhat[1 + n_x:, 1:1 + n_x] = B.T
    Qhat[1 + n_x:, 1 + n_x:] = C
    return _simplex_program(Qhat, np.ones(n), 1.0, n_x, 2.0), B, C


def _quad_1d(B=0.0, C=1.0):
    prog, *_ = _quad_program([[B]], [[C]])

    def in_domain(x):
        x = float(np.ravel(x)[0])
        return -1e-12 <= x <= 1 + 1e-12

    def phi(x):
        x = float(np.ravel(x)[0])
        if not in_domain(x):
            return INF
        return (C - 2 * B) * x * x + 2 * (B - C) * x + C

    chord = _quadratic_in_x_envelope(C, 0.0, C - 2 * B, 0.0, 1.0)

    def envelope(x):
        v = chord(x)
        return phi(x) if v is None else v

    return Fixture("quad-1d", dict(B=B, C=C), prog, phi, envelope, in_domain)


QUAD_2D_C = ((1.5566, 0.5781), (0.5781, 0.2557))


def _segment_min(lin, quad):
    """min over t in [0,1] of lin(t) + quad(t), both given as polynomial coefficient triples."""
    c0, c1, c2 = (p + q for p, q in zip(lin, quad))
    cands = [0.0, 1.0]
    if c2 > 0:
        t = -c1 / (2 * c2)
        if 0 < t < 1:
            cands.append(t)
    return min(c0 + c1 * t + c2 * t * t for t in cands)


def _quad_2d(B=None, C=None):
    B = -np.eye(2) if B is None else np.asarray(B, dtype=float)
    C = np.array(QUAD_2D_C) if C is None else np.asarray(C, dtype=float)
    prog, B, C = _quad_program(B, C)

    def in_domain(x):
        x = np.ravel(np.asarray(x, dtype=float))
        return bool(np.all(x >= -1e-12) and x.sum() <= 1 + 1e-12)

    def phi(x):
        x = np.ravel(np.asarray(x, dtype=float))
        if not in_domain(x):
            return INF
        s = max(1.0 - x.sum(), 0.0)
        # y = s * (t, 1 - t): 2 x'B y + y'C y as a quadratic in t
        u0, u1 = np.array([0.0, 1.0]), np.array([1.0, -1.0])
        bx = 2.0 * s * (B.T @ x)
        lin = (bx @ u0, bx @ u1, 0.0)
        quad = (s * s * u0 @ C @ u0, 2 * s * s * u0 @ C @ u1, s * s * u1 @ C @ u1)
        return float(_segment_min(lin, quad))

    return Fixture("quad-2d", {"B": B.tolist(), "C": C.tolist()}, prog, phi, None, in_domain)


FIXTURES = {"env-simplex": _env_simplex, "quad-1d": _quad_1d, "quad-2d": _quad_2d}


def fixture(name: str, **params) -> Fixture:
    try:
        build = FIXTURES[name]
    except KeyError:
        raise ValueError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    return build(**params)


def grid_envelope(phi, points, x):
    """Convex envelope at ``x`` from function values on a point cloud (an LP).

    This is the lower convex hull of the sampled graph, which approaches the
    true envelope from above as the cloud refines.
    """
    from scipy.optimize import linprog

    P = np.asarray(points, dtype=float)
    vals = np.array([phi(p) for p in P], dtype=float)
    A_eq = np.vstack([P.T, np.ones(len(P))])
    b_eq = np.concatenate([np.ravel(x), [1.0]])
    res = linprog(vals, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        return INF
    return float(res.fun)


def triangle_grid(k: int):
    """Points (i/k, j/k) with i + j <= k."""
    return np.array([(i / k, j / k) for i in range(k + 1) for j in range(k + 1 - i)])


# --------------------------------------------------------------------------
# surface sampling
# --------------------------------------------------------------------------

SENTINEL = "inf"


def sample_surface(fix: Fixture, grid, envelope: bool = True, certificates=(),
                   phi_method: str = "global", tol: float = 1e-6):
    """Rows of (x..., phi, envelope, qhat..., status) over the grid.

    ``phi_method`` "global" evaluates phi by solve_global on the slice
    {x fixed}; "closed" uses the fixture's reference function.
    """
    from .envelope import EnvelopeSolver
    from .model import CutPool

    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    if grid.shape[1] != fix.n_x or fix.n_x > 2:
        raise ValueError("grid must match n_x <= 2")
    solver = EnvelopeSolver(fix.objective, fix.ground, n_x=fix.n_x, tol=tol) if envelope else None
    rows = []
    for x in grid:
        status = "ok"
        try:
            phi = _phi_slice(fix, x) if phi_method == "global" else fix.phi(x)
        except Exception as exc:  # flagged, not dropped
            phi, status = np.nan, f"phi-error:{type(exc).__name__}"
        env = None
        if solver is not None:
            if not fix.in_domain(x):
                env = INF
            else:
                out = solver.evaluate(x)
                if out.status == "value":
                    env = out.value
                elif out.status == "unbounded":
                    env = INF
                else:
                    env, status = np.nan, "envelope-failed"
        qs = [float(q(x)) for q in certificates]
        rows.append((tuple(float(v) for v in x), phi, env, qs, status))
    return rows


def _phi_slice(fix: Fixture, x):
    """phi(x) from a global solve with the first n_x coordinates fixed."""
    if not fix.in_domain(x):
        return INF
    G = fix.ground
    n_x = fix.n_x
    n = G.n
    f = fix.objective
    x = np.asarray(x, dtype=float)
    # substitute z = (x, y): a quadratic in y over the restricted set
    Q = f.Q[n_x:, n_x:]
    q = f.q[n_x:] + f.Q[n_x:, :n_x] @ x
    c = f.c + x @ f.Q[:n_x, :n_x] @ x + 2 * f.q[:n_x] @ x
    eqs = []
    for D, rhs in G.quad_eqs:
        Dyy = D[n_x:, n_x:]
        dy = D[n_x:, :n_x] @ x
        const = x @ D[:n_x, :n_x] @ x
        if np.allclose(dy, 0) and np.allclose(Dyy, 0):
            if abs(const - rhs) > 1e-9:
                return INF
            continue
        # (g_y'y + g_x'x)^2 = rhs form only: rank-one with nonneg weights
        vals, vecs = np.linalg.eigh(D)
        g = vecs[:, -1] * np.sqrt(vals[-1])
        g = -g if g.sum() < 0 else g
        s = np.sqrt(rhs) - g[:n_x] @ x
        if s < -1e-12:
            return INF
        gy = g[n_x:]
        eqs.append((np.outer(gy, gy), s * s))
    slack = G.ball_radius - x @ x
    if slack < 0:
        return INF
    sub = BlockFeasibleSet(n - n_x, tuple(eqs), max(slack, 1e-12))
    if all(rhs <= 1e-14 for _, rhs in eqs):
        # y = 0 is the only nonneg solution of (g_y'y)^2 = 0 when g_y > 0
        return float(c)
    res = solve_global(QuadraticForm(Q, q, c), sub, gap_tol=1e-9)
    if res.incumbent is None:
        return INF
    return float(res.incumbent_value)


def surface_csv(rows, n_x, n_q):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = [f"x{i + 1}" for i in range(n_x)] + ["phi", "envelope"]
    header += [f"qhat{j + 1}" if n_q > 1 else "qhat" for j in range(n_q)] + ["status"]
    w.writerow(header)

    def fmt(v):
        if v is None:
            return ""
        if is_inf(v):
            return SENTINEL
        return repr(float(v))

    for x, phi, env, qs, status in rows:
        w.writerow([repr(v) for v in x] + [fmt(phi), fmt(env)] + [fmt(q) for q in qs] + [status])
    return buf.getvalue()
