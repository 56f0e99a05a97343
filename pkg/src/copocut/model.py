"""Problem data, certificates and quadratic-function evaluation.

Everything here is plain dense numpy. Types are frozen after construction
except :class:`CutPool`, which is owned by a single solver loop.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

DEFAULT_MEMBERSHIP_TOL = 1e-6


class _Infinity:
    """Tagged +infinity.  Never mixed into float arithmetic."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


def is_inf(value) -> bool:
    return value is INF


def symmetrize(M) -> np.ndarray:
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return 0.5 * (M + M.T)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QuadraticForm:
    """``x -> x'Qx + 2q'x + c`` with ``Q`` symmetrized on construction."""

    Q: np.ndarray
    q: np.ndarray = None
    c: float = 0.0

    def __post_init__(self):
        Q = _freeze(symmetrize(self.Q))
        n = Q.shape[0]
        if n < 1:
            raise ValueError("QuadraticForm needs n >= 1")
        q = np.zeros(n) if self.q is None else np.array(self.q, dtype=float).reshape(-1)
        if q.shape != (n,):
            raise ValueError(f"q has shape {q.shape}, expected ({n},)")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", _freeze(q))
        object.__setattr__(self, "c", float(self.c))

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    def __call__(self, x) -> float:
        return eval_quadratic(self, x)

    def homogenized(self) -> np.ndarray:
        """The (1+n) matrix M with [1,x]' M [1,x] equal to the form's value."""
        M = np.empty((self.n + 1, self.n + 1))
        M[0, 0] = self.c
        M[0, 1:] = self.q
        M[1:, 0] = self.q
        M[1:, 1:] = self.Q
        return M

    @classmethod
    def from_homogeneous(cls, M) -> "QuadraticForm":
        M = symmetrize(M)
        return cls(M[1:, 1:], M[0, 1:], M[0, 0])

    def lipschitz_bound(self, radius: float) -> float:
        """Bound on the gradient norm over the ball of the given radius."""
        return 2.0 * (np.linalg.norm(self.Q, 2) * radius + np.linalg.norm(self.q))


def eval_quadratic(form: QuadraticForm, x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (form.n,):
        raise ValueError(f"dimension mismatch: form has n={form.n}, x has {x.shape[0]}")
    return float(x @ form.Q @ x + 2.0 * form.q @ x + form.c)


@dataclass(frozen=True)
class BlockFeasibleSet:
    """``{z : z >= 0 (optional), z'D_j z = rhs_j, z'z <= ball_radius}``.

    ``ball_radius`` bounds the squared norm, as in the block model.
    """

    n: int
    quad_eqs: Tuple[Tuple[np.ndarray, float], ...] = ()
    ball_radius: float = 1.0
    nonneg: bool = True
    tol: float = DEFAULT_MEMBERSHIP_TOL

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.ball_radius > 0:
            raise ValueError("ball radius must be positive")
        eqs = []
        for D, rhs in self.quad_eqs:
            D = _freeze(symmetrize(D))
            if D.shape != (self.n, self.n):
                raise ValueError(f"constraint matrix has shape {D.shape}, expected n={self.n}")
            if np.linalg.eigvalsh(D)[0] < -1e-9 * max(1.0, np.abs(D).max()):
                raise ValueError("quadratic equality matrices must be PSD")
            eqs.append((D, float(rhs)))
        object.__setattr__(self, "quad_eqs", tuple(eqs))
        object.__setattr__(self, "ball_radius", float(self.ball_radius))

    @property
    def m(self) -> int:
        return len(self.quad_eqs)

    def residuals(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.array([z @ D @ z - rhs for D, rhs in self.quad_eqs])

    def contains(self, z, tol: Optional[float] = None) -> bool:
        return check_membership(self, z, self.tol if tol is None else tol)

    def box(self) -> Tuple[np.ndarray, np.ndarray]:
        """Variable bounds implied by the ball and, where possible, the equalities."""
        R = np.sqrt(self.ball_radius)
        ub = np.full(self.n, R)
        lb = np.zeros(self.n) if self.nonneg else -ub.copy()
        if self.nonneg:
            # with z >= 0 and D >= 0 entrywise, D_kk z_k^2 <= z'Dz = rhs
            for D, rhs in self.quad_eqs:
                if np.all(D >= 0):
                    d = np.diag(D)
                    pos = d > 0
                    ub[pos] = np.minimum(ub[pos], np.sqrt(max(rhs, 0.0) / d[pos]))
        return lb, ub

    def linear_equalities(self) -> List[Tuple[np.ndarray, float]]:
        """Linear equalities implied by rank-one sign-definite constraints.

        With z >= 0, (g'z)^2 = rhs and g >= 0 give g'z = sqrt(rhs).
        """
        out = []
        if not self.nonneg:
            return out
        for D, rhs in self.quad_eqs:
            vals, vecs = np.linalg.eigh(D)
            if vals[-1] <= 0 or np.sum(vals > 1e-10 * vals[-1]) != 1:
                continue
            g = vecs[:, -1] * np.sqrt(vals[-1])
            if np.all(g <= 1e-12):
                g = -g
            if np.all(g >= -1e-12) and rhs >= 0:
                out.append((np.clip(g, 0.0, None), float(np.sqrt(rhs))))
        return out


def check_membership(F: BlockFeasibleSet, z, tol: float = DEFAULT_MEMBERSHIP_TOL) -> bool:
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape != (F.n,) or not np.all(np.isfinite(z)):
        return False
    if F.nonneg and np.any(z < -tol):
        return False
    for D, rhs in F.quad_eqs:
        if abs(z @ D @ z - rhs) > tol:
            return False
    return bool(z @ z <= F.ball_radius + tol)


def eval_phi_block(A_i, F_i: BlockFeasibleSet, x_i, tol: float = DEFAULT_MEMBERSHIP_TOL):
    """Block value function: ``x'A_i x`` on ``F_i``, ``INF`` elsewhere."""
    x_i = np.asarray(x_i, dtype=float).reshape(-1)
    if not check_membership(F_i, x_i, tol):
        return INF
    A_i = np.asarray(A_i, dtype=float)
    return float(x_i @ A_i @ x_i)


@dataclass(frozen=True)
class BlockQcqpInstance:
    """Block model: convex coupling ``x'Ax + 2a'x`` plus S nonconvex blocks."""

    S: int
    n: int
    A: np.ndarray
    a: np.ndarray
    blocks: Tuple[Tuple[np.ndarray, BlockFeasibleSet], ...]
    r: float
    witnesses: Tuple[np.ndarray, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        N = self.S * self.n
        A = _freeze(symmetrize(self.A))
        a = _freeze(np.array(self.a, dtype=float).reshape(-1))
        if A.shape != (N, N) or a.shape != (N,):
            raise ValueError("coupling data does not match S*n")
        if len(self.blocks) != self.S:
            raise ValueError("need exactly S blocks")
        lam_min = np.linalg.eigvalsh(A)[0] if N else 0.0
        if lam_min < -1e-8:
            raise ValueError(f"coupling matrix is not PSD (min eigenvalue {lam_min:.3g})")
        blocks = []
        for A_i, F_i in self.blocks:
            A_i = _freeze(symmetrize(A_i))
            if A_i.shape != (self.n, self.n) or F_i.n != self.n:
                raise ValueError("all blocks must share dimension n")
            blocks.append((A_i, F_i))
        wit = tuple(_freeze(np.array(w, dtype=float)) for w in self.witnesses)
        if wit:
            if len(wit) != self.S:
                raise ValueError("one witness per block required")
            for (A_i, F_i), w in zip(blocks, wit):
                if not check_membership(F_i, w, F_i.tol):
                    raise ValueError("stored witness is not feasible for its block")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "blocks", tuple(blocks))
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "witnesses", wit)

    @property
    def dim(self) -> int:
        return self.S * self.n

    def split(self, x) -> List[np.ndarray]:
        x = np.asarray(x, dtype=float).reshape(-1)
        return [x[i * self.n:(i + 1) * self.n] for i in range(self.S)]

    def convex_part(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.A @ x + 2.0 * self.a @ x)

    def objective(self, x) -> float:
        val = self.convex_part(x)
        for (A_i, _), x_i in zip(self.blocks, self.split(x)):
            val += float(x_i @ A_i @ x_i)
        return val

    def is_feasible(self, x, tol: float = DEFAULT_MEMBERSHIP_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x @ x > self.r + tol:
            return False
        return all(check_membership(F, x_i, tol) for (_, F), x_i in zip(self.blocks, self.split(x)))

    def monolithic(self) -> Tuple[QuadraticForm, BlockFeasibleSet]:
        """The whole problem as one quadratic over one ground set."""
        N, n = self.dim, self.n
        Q = self.A.copy()
        eqs = []
        for i, (A_i, F_i) in enumerate(self.blocks):
            sl = slice(i * n, (i + 1) * n)
            Q[sl, sl] += A_i
            for D, rhs in F_i.quad_eqs:
                big = np.zeros((N, N))
                big[sl, sl] = D
                eqs.append((big, rhs))
        return QuadraticForm(Q, self.a, 0.0), BlockFeasibleSet(N, tuple(eqs), self.r, True)


@dataclass(frozen=True)
class LiftedProgram:
    """Completely positive reformulation in constraint-list form.

    ``objective`` acts on the lifted matrix P of size 1+n_x+n_y, constraints
    are ``H_k . P = b_k`` and the cone is CPP(cone({1} x ground)).  The first
    constraint is always the normalization ``P_00 = 1``.
    """

    objective: np.ndarray
    constraints: Tuple[Tuple[np.ndarray, float], ...]
    ground: BlockFeasibleSet
    split: Tuple[int, int]

    def __post_init__(self):
        Qh = _freeze(symmetrize(self.objective))
        n_x, n_y = self.split
        dim = 1 + n_x + n_y
        if Qh.shape != (dim, dim) or self.ground.n != n_x + n_y:
            raise ValueError("lifted dimensions are inconsistent")
        E = np.zeros((dim, dim))
        E[0, 0] = 1.0
        cons = []
        for H, b in self.constraints:
            H = _freeze(symmetrize(H))
            if H.shape != (dim, dim):
                raise ValueError("constraint matrix has wrong shape")
            cons.append((H, float(b)))
        if not cons or not (np.array_equal(cons[0][0], E) and cons[0][1] == 1.0):
            cons.insert(0, (_freeze(E), 1.0))
        object.__setattr__(self, "objective", Qh)
        object.__setattr__(self, "constraints", tuple(cons))
        object.__setattr__(self, "split", (int(n_x), int(n_y)))

    @property
    def dim(self) -> int:
        return self.objective.shape[0]

    @property
    def n_x(self) -> int:
        return self.split[0]

    @property
    def b(self) -> np.ndarray:
        return np.array([b for _, b in self.constraints])

    def objective_form(self) -> QuadraticForm:
        return QuadraticForm.from_homogeneous(self.objective)

    def lifted_value(self, z) -> float:
        zt = np.concatenate(([1.0], np.asarray(z, dtype=float)))
        return float(zt @ self.objective @ zt)


@dataclass(frozen=True)
class EnvelopeCertificate:
    """Dual pair (alpha, w) with [[alpha, w'], [w, A]] set-copositive."""

    alpha: float
    w: np.ndarray
    epsilon: float = 0.0

    def affine(self, u) -> float:
        """Cut value ``-alpha - 2 w'u``, valid for the unregularized envelope."""
        return float(-self.alpha - 2.0 * self.w @ np.asarray(u, dtype=float))

    def value(self, u) -> float:
        """Regularized dual objective at ``u``."""
        return self.affine(u) - 2.0 * self.epsilon * float(np.linalg.norm(self.w))

    __call__ = value


@dataclass(frozen=True)
class QuadraticCertificate:
    """Multipliers (lambda, w, W) inducing ``b'lambda + w'u + u'Wu``."""

    lam: np.ndarray
    w: np.ndarray
    W: np.ndarray
    b: np.ndarray
    nu: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "W", _freeze(symmetrize(self.W)))
        nu = float(self.b @ self.lam) if self.nu is None else float(self.nu)
        if nu > float(self.b @ self.lam) + 1e-12:
            raise ValueError("offset nu may not exceed b'lambda")
        object.__setattr__(self, "nu", nu)

    def __call__(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(self.nu + self.w @ u + u @ self.W @ u)

    def dual_matrix(self, lp: LiftedProgram) -> np.ndarray:
        """``Q - A*(lambda) - B2*(w, W)``, which must be set-copositive."""
        M = lp.objective.copy()
        for lam_k, (H, _) in zip(self.lam, lp.constraints):
            M -= lam_k * H
        n_x = lp.n_x
        M[0, 1:1 + n_x] -= 0.5 * self.w
        M[1:1 + n_x, 0] -= 0.5 * self.w
        M[1:1 + n_x, 1:1 + n_x] -= self.W
        return M


class CutPool:
    """Points z = [1, z_F] (or rays [0, d]) defining cuts ``z'Sz >= 0``."""

    def __init__(self, F: BlockFeasibleSet, tol: float = DEFAULT_MEMBERSHIP_TOL,
                 dedup_tol: float = 1e-9):
        self.F = F
        self.tol = tol
        self.dedup_tol = dedup_tol
        self._cuts: List[np.ndarray] = []
        self._rays: List[bool] = []

    def __len__(self):
        return len(self._cuts)

    @property
    def cuts(self) -> List[np.ndarray]:
        return list(self._cuts)

    def points(self) -> np.ndarray:
        """Stored ground-set points (without the leading 1), one per row."""
        pts = [c[1:] for c, ray in zip(self._cuts, self._rays) if not ray]
        return np.array(pts).reshape(-1, self.F.n)

    def contains(self, z) -> bool:
        z = np.asarray(z, dtype=float)
        return any(np.max(np.abs(c - z)) <= self.dedup_tol for c in self._cuts)

    def add(self, z, ray: bool = False) -> bool:
        """Insert a cut vector; return False if it duplicates a stored one."""
        z = np.array(z, dtype=float).reshape(-1)
        if z.shape != (self.F.n + 1,):
            raise ValueError("cut vector has the wrong length")
        if ray:
            d = z[1:]
            if abs(z[0]) > self.tol or not self._is_recession(d):
                raise ValueError("ray cut is not a recession direction of the lifted set")
        else:
            if abs(z[0] - 1.0) > 1e-12 or not check_membership(self.F, z[1:], self.tol):
                raise ValueError("cut point is not in the ground set")
        if self.contains(z):
            return False
        self._cuts.append(_freeze(z))
        self._rays.append(ray)
        return True

    def _is_recession(self, d) -> bool:
        # cone({1} x F) with F compact only recedes along the origin
        return bool(np.linalg.norm(d) <= self.tol)
