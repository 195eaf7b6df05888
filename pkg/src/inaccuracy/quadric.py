"""Quadric model of the second-order inaccuracy hypersurface.

The surface ``y_{n+1} = sum A_i y_i + 1/2 sum_{i<=j} A_ij y_i y_j`` is written
as ``y^T A y + 2 b^T y = 0`` with

    a_ii = A_ii / 2,   a_ij = a_ji = A_ij / 4   (i != j, both <= n)
    b_i  = A_i / 2,    b_{n+1} = -1/2

and a zero last row and column in ``A``.  Because the last basis vector is in
the kernel of ``A``, all rotations here are block-diagonal ``diag(U_n, 1)``,
which pins the rotated last linear coefficient to ``b_{n+1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .measure import InfluenceSet, Mode

DEFAULT_RANK_TOL = 1e-9
MAX_SWEEPS = 100
OFFDIAG_TOL = 1e-12


class QuadricError(Exception):
    pass


class ConvergenceError(QuadricError, ArithmeticError):
    pass


# --------------------------------------------------------------------------
# Symmetric eigendecomposition


def as_symmetric(m) -> np.ndarray:
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise QuadricError(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        raise QuadricError("matrix is not symmetric")
    return a


@dataclass(frozen=True)
class Eigen:
    values: np.ndarray  # descending
    basis: np.ndarray  # columns are eigenvectors
    rank: int
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        return self.basis @ np.diag(self.values) @ self.basis.T


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    for x in v:
        if abs(x) > 1e-14:
            return v if x > 0 else -v
    return v


def _offdiag_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def jacobi_eigh(m, max_sweeps: int = MAX_SWEEPS, tol: float = OFFDIAG_TOL):
    """Cyclic Jacobi: returns (eigenvalues, eigenvectors, sweeps), unsorted."""
    a = as_symmetric(m).copy()
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0 or n == 1:
        return np.diag(a).copy(), v, 0
    for sweep in range(1, max_sweeps + 1):
        off = _offdiag_norm(a)
        if off <= tol * scale:
            return np.diag(a).copy(), v, sweep - 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < abs(diff) * 1e-36:
                    t = apq / diff  # theta would overflow
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    off = _offdiag_norm(a)
    if off <= tol * scale:
        return np.diag(a).copy(), v, max_sweeps
    raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")


def zero_threshold(values, tol: float = DEFAULT_RANK_TOL) -> float:
    values = np.asarray(values, dtype=float)
    top = float(np.max(np.abs(values))) if values.size else 0.0
    return tol * max(1.0, top)


def eigen_symmetric(m, tol: float = DEFAULT_RANK_TOL) -> Eigen:
    """Eigenvalues in descending order with a deterministic orthogonal basis.

    Eigenvectors are sign-normalised so their first nonzero entry is
    positive; equal eigenvalues are ordered by their vectors, largest first.
    """
    values, vectors, sweeps = jacobi_eigh(m)
    cols = [_canonical_sign(vectors[:, k]) for k in range(len(values))]
    order = sorted(range(len(values)), key=lambda k: (-values[k], tuple(-cols[k])))
    vals = np.array([values[k] for k in order])
    basis = np.column_stack([cols[k] for k in order])
    rank = int(np.sum(np.abs(vals) > zero_threshold(vals, tol)))
    return Eigen(vals, basis, rank, sweeps)


class SignatureClass(str, Enum):
    ELLIPTIC = "elliptic"
    HYPERBOLIC = "hyperbolic"
    PARABOLIC = "parabolic"


def signature_class(m, tol: float = DEFAULT_RANK_TOL) -> SignatureClass:
    eig = eigen_symmetric(m, tol)
    if eig.rank < len(eig.values):
        return SignatureClass.PARABOLIC
    if np.all(eig.values > 0) or np.all(eig.values < 0):
        return SignatureClass.ELLIPTIC
    return SignatureClass.HYPERBOLIC


# --------------------------------------------------------------------------
# Model


@dataclass(frozen=True)
class QuadricModel:
    n: int
    A: np.ndarray  # (n+1, n+1)
    b: np.ndarray  # (n+1,)
    mode: Mode = Mode.RELATIVE

    @property
    def quadratic_block(self) -> np.ndarray:
        return self.A[: self.n, : self.n]

    def extended(self) -> np.ndarray:
        return extended_matrix(self.A, self.b)

    def residual(self, y) -> np.ndarray:
        """``y^T A y + 2 b^T y`` for each row of ``y``."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return np.einsum("ki,ij,kj->k", y, self.A, y) + 2.0 * y @ self.b

    def height(self, p) -> np.ndarray:
        """Solve for ``y_{n+1}`` given the first n coordinates (rows of ``p``)."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        a = self.quadratic_block
        quad = np.einsum("ki,ij,kj->k", p, a, p)
        lin = 2.0 * p @ self.b[: self.n]
        return -(quad + lin) / (2.0 * self.b[self.n])


def build_quadric(inf: InfluenceSet, last_coefficient: float = -0.5) -> QuadricModel:
    """Quadric ``y^T A y + 2 b^T y = 0`` for an influence set.

    With the default ``last_coefficient=-1/2`` the zero set is exactly the
    graph ``y_{n+1} = delta_total(y_1..y_n)``.  Passing ``-1`` gives the
    alternative normalisation, whose graph is stretched by 2 along the
    last axis; kind and type are unchanged.
    """
    if last_coefficient >= 0:
        raise QuadricError("last linear coefficient must be negative")
    n = inf.n
    A = np.zeros((n + 1, n + 1))
    for (i, j), a in inf.second.items():
        if i == j:
            A[i, i] = 0.5 * a
        else:
            A[i, j] = A[j, i] = 0.25 * a
    b = np.zeros(n + 1)
    b[:n] = 0.5 * np.asarray(inf.first)
    b[n] = last_coefficient
    return QuadricModel(n, A, b, inf.mode)


def extended_matrix(A, b) -> np.ndarray:
    """``M = [[A, b], [b^T, 0]]``; the surface is ``(y,1)^T M (y,1) = 0``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    k = A.shape[0]
    M = np.zeros((k + 1, k + 1))
    M[:k, :k] = A
    M[:k, k] = M[k, :k] = b
    return M


def rotate_model(A, b, Q) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients after the substitution ``y = Q y'``."""
    Q = np.asarray(Q, dtype=float)
    return Q.T @ A @ Q, Q.T @ b


def translate_extended(M, t) -> np.ndarray:
    """Extended matrix after the substitution ``y = y' + t``."""
    k = M.shape[0] - 1
    T = np.eye(k + 1)
    T[:k, k] = t
    return T.T @ M @ T


# --------------------------------------------------------------------------
# Classification


class Kind(str, Enum):
    HYPERPLANE = "hyperplane"
    LINE = "line"
    PARABOLA = "parabola"
    ELLIPTIC_PARABOLOID = "elliptic paraboloid"
    HYPERBOLIC_PARABOLOID = "hyperbolic paraboloid"
    PARABOLIC_CYLINDER = "parabolic cylinder"


@dataclass(frozen=True)
class SurfaceKind:
    kind: Kind
    n: int
    # nonzero b_i count for hyperplanes, k for hyperbolic paraboloids,
    # rank r for parabolic cylinders; None otherwise
    type: int | None = None

    def __str__(self):
        label = self.kind.value
        if self.kind is Kind.HYPERPLANE:
            return f"{label} ({self.type} nonzero linear coefficients)"
        if self.type is not None:
            return f"{label} of type {self.type}"
        return label


def _check_model(q: QuadricModel):
    if q.A.shape != (q.n + 1, q.n + 1) or q.b.shape != (q.n + 1,):
        raise QuadricError("model dimensions are inconsistent")
    if not np.array_equal(q.A, q.A.T):
        raise QuadricError("quadratic part is not symmetric")
    if np.any(q.A[q.n, :] != 0):
        raise QuadricError("last row of the quadratic part must be zero")
    if not q.b[q.n] < 0:
        raise QuadricError("last linear coefficient must be negative")


def _block_eigen(q: QuadricModel, tol: float):
    """Eigenpairs of the n x n block ordered ranked-first.

    Returns (eigen, order) where ``order`` lists the ranked indices in
    descending eigenvalue order followed by the null indices.
    """
    eig = eigen_symmetric(q.quadratic_block, tol)
    thr = zero_threshold(eig.values, tol)
    ranked = [k for k, lam in enumerate(eig.values) if abs(lam) > thr]
    null = [k for k, lam in enumerate(eig.values) if abs(lam) <= thr]
    return eig, ranked + null, len(ranked)


def _is_zero_quadratic(q: QuadricModel, tol: float) -> bool:
    return float(np.max(np.abs(q.quadratic_block), initial=0.0)) <= tol


def classify(q: QuadricModel, tol: float = DEFAULT_RANK_TOL) -> SurfaceKind:
    _check_model(q)
    n = q.n
    if _is_zero_quadratic(q, tol):
        if n == 1:
            return SurfaceKind(Kind.LINE, n)
        return SurfaceKind(Kind.HYPERPLANE, n, int(np.count_nonzero(q.b[:n])))
    eig, order, r = _block_eigen(q, tol)
    if r == 0:
        return SurfaceKind(Kind.LINE, n) if n == 1 else SurfaceKind(
            Kind.HYPERPLANE, n, int(np.count_nonzero(q.b[:n]))
        )
    if n == 1:
        return SurfaceKind(Kind.PARABOLA, n)
    if r < n:
        return SurfaceKind(Kind.PARABOLIC_CYLINDER, n, r)
    # dividing by -c_{n+1} = -b_{n+1} > 0 keeps the eigenvalue signs
    positive = int(np.sum(eig.values > 0))
    if positive in (0, n):
        return SurfaceKind(Kind.ELLIPTIC_PARABOLOID, n)
    return SurfaceKind(Kind.HYPERBOLIC_PARABOLOID, n, positive)


# --------------------------------------------------------------------------
# Canonical reduction


def householder_to_axis(u) -> tuple[np.ndarray, float]:
    """Orthogonal symmetric ``H`` with ``H u = s e_1`` for a unit vector ``u``.

    ``s`` is the sign of the largest-magnitude entry of ``u``.  The first row
    of ``H`` is ``s u``.  Returns ``(H, s)``.
    """
    u = np.asarray(u, dtype=float)
    d = u.size
    big = int(np.argmax(np.abs(u)))
    s = 1.0 if u[big] >= 0 else -1.0
    v = u.copy()
    if np.all(u[1:] == 0):
        H = np.eye(d)
        if u[0] * s < 0:
            H[0, 0] = -1.0
        return H, s
    # v_1 = u_1 - s without cancellation, using |u| = 1
    tail = float(np.dot(u[1:], u[1:]))
    if u[0] * s > 0:
        v[0] = -s * tail / (1.0 + abs(u[0]))
    else:
        v[0] = u[0] - s
    H = np.eye(d) - 2.0 * np.outer(v, v) / np.dot(v, v)
    return H, s


@dataclass(frozen=True)
class CanonicalForm:
    """``sum_i sigma_i z_i^2 / p_i = 2 z_{r+1}`` with ``z = R y + t``.

    ``rotation`` is R (orthogonal), ``translation`` is t.  ``eigenvalues``,
    ``signs`` and ``parameters`` cover the r ranked axes.  ``linear`` holds
    the rotated linear coefficients ``c = U^T b`` and ``q`` the constant left
    after the ranked translations; ``residual_constant`` is zero after the
    final translation.
    """

    kind: SurfaceKind
    rank: int
    eigenvalues: np.ndarray
    signs: np.ndarray
    parameters: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    linear: np.ndarray
    q: float
    concentrated: float  # linear coefficient on the z_{r+1} axis before division
    residual_constant: float = 0.0
    eigen_rotation: np.ndarray = field(default=None, repr=False)
    tail_rotation: np.ndarray = field(default=None, repr=False)

    def forward(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return y @ self.rotation.T + self.translation

    def inverse(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return (z - self.translation) @ self.rotation

    def equation_residual(self, z) -> np.ndarray:
        """Relative residual of the canonical equation for each row of ``z``."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        r = self.rank
        terms = self.signs * z[:, :r] ** 2 / self.parameters
        lhs = terms.sum(axis=1)
        rhs = 2.0 * z[:, r]
        scale = np.maximum(1.0, np.maximum(np.abs(terms).sum(axis=1), np.abs(rhs)))
        return np.abs(lhs - rhs) / scale

    def sample(self, free) -> np.ndarray:
        """Canonical points from free coordinates.

        ``free`` has rows of length n: the r ranked coordinates followed by
        the n - r coordinates after ``z_{r+1}``; ``z_{r+1}`` is solved for.
        """
        free = np.atleast_2d(np.asarray(free, dtype=float))
        r = self.rank
        head = free[:, :r]
        z_axis = 0.5 * (self.signs * head**2 / self.parameters).sum(axis=1)
        return np.column_stack([head, z_axis, free[:, r:]])

    def describe(self, names=None) -> str:
        r = self.rank
        terms = []
        for k in range(r):
            sign = "+" if self.signs[k] > 0 else "-"
            terms.append(f"{sign} z{k + 1}^2/{self.parameters[k]:.4g}")
        lhs = " ".join(terms).lstrip("+ ")
        if lhs.startswith("- "):
            lhs = "-" + lhs[2:]
        return f"{lhs} = 2 z{r + 1}"


def canonicalize(q: QuadricModel, tol: float = DEFAULT_RANK_TOL) -> CanonicalForm:
    kind = classify(q, tol)
    if kind.kind in (Kind.HYPERPLANE, Kind.LINE):
        raise QuadricError(f"{kind} has no quadratic part to reduce")
    n = q.n
    eig, order, r = _block_eigen(q, tol)

    U = np.eye(n + 1)
    U[:n, :n] = eig.basis[:, order]
    lam = eig.values[order][:r]

    c = U.T @ q.b  # rotated linear coefficients; c[n] == b[n]
    shift_ranked = c[:r] / lam
    qconst = -float(np.sum(c[:r] ** 2 / lam))

    tail = c[r:]
    cnorm = float(np.linalg.norm(tail))
    if cnorm == 0:
        raise QuadricError("residual linear part vanished; model is malformed")
    V, s = householder_to_axis(tail / cnorm)
    chat = s * cnorm

    W = np.eye(n + 1)
    W[r:, r:] = V
    rotation = W @ U.T
    translation = np.zeros(n + 1)
    translation[:r] = shift_ranked
    translation[r] = qconst / (2.0 * chat)

    kappa = lam / (-chat)
    signs = np.sign(kappa)
    params = 1.0 / np.abs(kappa)
    return CanonicalForm(
        kind=kind,
        rank=r,
        eigenvalues=lam,
        signs=signs,
        parameters=params,
        rotation=rotation,
        translation=translation,
        linear=c,
        q=qconst,
        concentrated=chat,
        residual_constant=0.0,
        eigen_rotation=U,
        tail_rotation=V,
    )


@dataclass(frozen=True)
class ParabolaSubstitution:
    """Affine map taking ``y_2 = a y_1^2 + beta y_1`` to ``z_1^2 = 2 p z_2``.

    ``y_1 = z_1 / sqrt(a)``, ``y_2 = beta z_1 / sqrt(a) + 2 p z_2``, where
    ``beta = 2 b_1`` is the full linear coefficient.
    """

    a: float
    beta: float
    p: float

    def to_canonical(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        root = math.sqrt(self.a)
        z1 = y[:, 0] * root
        z2 = (y[:, 1] - self.beta * y[:, 0]) / (2.0 * self.p)
        return np.column_stack([z1, z2])

    def from_canonical(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        root = math.sqrt(self.a)
        y1 = z[:, 0] / root
        y2 = self.beta * z[:, 0] / root + 2.0 * self.p * z[:, 1]
        return np.column_stack([y1, y2])


def parabola_substitution(q: QuadricModel, p: float | None = None) -> ParabolaSubstitution:
    """Direct (non-orthogonal) reduction of the n = 1 case to a parabola.

    The equation ``a y_1^2 + 2 b_1 y_1 + 2 b_2 y_2 = 0`` is first normalised
    so ``y_2`` has coefficient -1.  ``p`` defaults to ``1/2``.
    """
    _check_model(q)
    if q.n != 1:
        raise QuadricError("parabola substitution applies to n = 1 only")
    scale = -2.0 * q.b[1]
    a = q.A[0, 0] / scale
    beta = 2.0 * q.b[0] / scale
    if a <= 0:
        raise QuadricError("zero quadratic part: the graph is a straight line")
    return ParabolaSubstitution(a, beta, 0.5 if p is None else float(p))
