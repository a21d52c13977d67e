"""One-particle boundary-condition algebra on C^{2E}.

Self-adjoint Laplacian domains are described either by a matrix pair
(A, B) with A F_bv + B F'_bv = 0, or canonically by an orthogonal
projector P (P F_bv = 0) together with a self-adjoint map L supported on
ker P (Q F'_bv + L Q F_bv = 0, Q = 1 - P).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph_core import BoundaryIndexMap, MetricGraph

DEFAULT_TOL = 1e-10


class ConditionError(ValueError):
    """Matrix pair does not define a self-adjoint vertex condition."""


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


@dataclass(frozen=True)
class ABReport:
    rank: int
    rank_ok: bool
    sa_defect: float
    sa_ok: bool

    @property
    def ok(self) -> bool:
        return self.rank_ok and self.sa_ok


def validate_ab(A: np.ndarray, B: np.ndarray, tol: float = DEFAULT_TOL) -> ABReport:
    """Check rank([A B]) = 2E and self-adjointness of A B*."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConditionError(f"A, B must be equal square matrices, got {A.shape}, {B.shape}")
    n = A.shape[0]
    sv = np.linalg.svd(np.hstack([A, B]), compute_uv=False)
    cutoff = tol * max(sv[0], 1.0)
    rank = int(np.count_nonzero(sv > cutoff))
    ab = A @ B.conj().T
    defect = float(np.linalg.norm(ab - ab.conj().T, 2))
    scale = max(np.linalg.norm(ab, 2), 1.0)
    return ABReport(rank=rank, rank_ok=rank == n, sa_defect=defect,
                    sa_ok=defect <= tol * scale)


def ab_to_pl(A: np.ndarray, B: np.ndarray, tol: float = DEFAULT_TOL):
    """Canonical (P, L) of a valid pair: P projects onto ker B and
    L = (B restricted to ran B*)^{-1} A Q, extended by zero on ran P."""
    report = validate_ab(A, B, tol)
    if not report.ok:
        raise ConditionError(f"invalid (A, B): {report}")
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    n = A.shape[0]

    u, sv, vh = np.linalg.svd(B)
    cutoff = tol * max(sv[0] if sv.size else 0.0, 1.0)
    null = vh.conj().T[:, sv <= cutoff] if sv.size else np.eye(n)
    P = _hermitize(null @ null.conj().T)
    Q = np.eye(n) - P

    # Minimum-norm solution of B L = A Q lies in ran B* = ran Q.
    L = np.linalg.pinv(B, rcond=tol) @ A @ Q
    resid = np.linalg.norm(B @ L - A @ Q, 2)
    if resid > 1e3 * tol * max(1.0, np.linalg.norm(A, 2)):
        raise ConditionError(f"B L = A Q unsolvable (residual {resid:.2e})")
    L = _hermitize(Q @ L @ Q)
    return P, L


@dataclass(frozen=True)
class VertexConditions:
    """Validated one-particle condition with both descriptions attached."""

    A: np.ndarray
    B: np.ndarray
    P: np.ndarray
    L: np.ndarray

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @classmethod
    def from_ab(cls, A, B, tol: float = DEFAULT_TOL) -> "VertexConditions":
        P, L = ab_to_pl(A, B, tol)
        return cls(np.asarray(A, dtype=complex), np.asarray(B, dtype=complex), P, L)

    @classmethod
    def from_pl(cls, P, L) -> "VertexConditions":
        # (A, B) = (P + L, Q) is always a valid representative of (P, L).
        P = _hermitize(np.asarray(P, dtype=complex))
        L = _hermitize(np.asarray(L, dtype=complex))
        Q = np.eye(P.shape[0]) - P
        L = _hermitize(Q @ L @ Q)
        return cls(P + L, Q, P, L)


def equivalence_check(A, B, A2, B2, tol: float = 1e-8) -> bool:
    """True iff both pairs induce the same domain, i.e. the same (P, L)."""
    P1, L1 = ab_to_pl(A, B)
    P2, L2 = ab_to_pl(A2, B2)
    scale = max(1.0, np.linalg.norm(L1, 2), np.linalg.norm(L2, 2))
    return (np.linalg.norm(P1 - P2, 2) <= tol
            and np.linalg.norm(L1 - L2, 2) <= tol * scale)


def is_local(P: np.ndarray, L: np.ndarray, idx: BoundaryIndexMap,
             tol: float = DEFAULT_TOL) -> bool:
    """True iff P and L are block-diagonal w.r.t. the vertex blocks."""
    n = P.shape[0]
    block_of = np.empty(n, dtype=int)
    for v, block in idx.vertex_blocks.items():
        for pos in block:
            block_of[pos] = v
    for i in range(n):
        for j in range(n):
            if block_of[i] != block_of[j]:
                if abs(P[i, j]) > tol or abs(L[i, j]) > tol:
                    return False
    return True


def standard_family(kind: str, g: MetricGraph, alpha: float = None,
                    mask=None) -> VertexConditions:
    """The four standard families: dirichlet, neumann, robin(alpha),
    mixed(mask) with mask entries 'dirichlet'/'neumann' per edge end."""
    n = 2 * g.E
    eye = np.eye(n)
    if kind == "dirichlet":
        return VertexConditions.from_pl(eye, np.zeros((n, n)))
    if kind == "neumann":
        return VertexConditions.from_pl(np.zeros((n, n)), np.zeros((n, n)))
    if kind == "robin":
        if alpha is None or alpha <= 0:
            raise ConditionError("robin requires alpha > 0")
        return VertexConditions.from_pl(np.zeros((n, n)), alpha * eye)
    if kind == "mixed":
        if mask is None or len(mask) != n:
            raise ConditionError(f"mixed requires a mask of length {n}")
        diag = []
        for entry in mask:
            if entry not in ("dirichlet", "neumann"):
                raise ConditionError(f"bad mask entry {entry!r}")
            diag.append(1.0 if entry == "dirichlet" else 0.0)
        return VertexConditions.from_pl(np.diag(diag), np.zeros((n, n)))
    raise ConditionError(f"unknown family {kind!r}")


def delta_family(g: MetricGraph, strength: float) -> VertexConditions:
    """Delta-type coupling: continuity at each vertex plus a derivative-sum
    condition with the given strength (strength 0 is the Kirchhoff case)."""
    idx = BoundaryIndexMap(g)
    n = 2 * g.E
    P = np.zeros((n, n))
    L = np.zeros((n, n))
    for v, block in idx.vertex_blocks.items():
        d = len(block)
        if d == 0:
            continue
        b = np.array(block)
        # ker P = constants on the block; L acts as -strength/d on them.
        P[np.ix_(b, b)] = np.eye(d) - np.ones((d, d)) / d
        L[np.ix_(b, b)] = -(strength / d**2) * np.ones((d, d))
    return VertexConditions.from_pl(P, L)
