"""RRE for sequences of symmetric low-rank matrices ``X_i = Z_i D_i Z_i^T``.

Nothing here forms a ``d x d`` matrix.  Norms of low-rank symmetric matrices
are evaluated on the small matrix obtained by projecting onto the range of
the outer factor, which preserves both the Frobenius and the spectral norm.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg as spla

from .errors import DimensionMismatch
from .extrapolation import EPS, Weights, rre_weights

NORMS = ("frobenius", "spectral")


@dataclass
class LowRankSym:
    """Symmetric matrix held as outer factor ``Z`` (d x z) and inner factor ``D`` (z x z)."""

    Z: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        self.Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        z = self.Z.shape[1]
        if self.D.shape != (z, z):
            raise DimensionMismatch(f"inner factor {self.D.shape} does not match {z} columns")
        scale = np.linalg.norm(self.D)
        if np.linalg.norm(self.D - self.D.T) > 1e-12 * max(scale, 1.0):
            raise ValueError("inner factor is not symmetric")

    @classmethod
    def zeros(cls, d):
        return cls(np.zeros((d, 0)), np.zeros((0, 0)))

    @property
    def d(self):
        return self.Z.shape[0]

    @property
    def rank_bound(self):
        return self.Z.shape[1]

    def to_dense(self):
        return self.Z @ self.D @ self.Z.T

    def norm(self, kind="frobenius"):
        return projected_norm(self.Z, self.D, kind)


@dataclass
class Increment:
    """One step ``Z_{k} = [Z_{k-1} V]``, ``D_k = blkdiag(D_{k-1}, D_inc)``.

    ``Y`` is the inverse of ``D_inc`` and ``sigma`` the shift, when the step
    came from an ADI-type iteration.
    """

    V: np.ndarray
    D: np.ndarray
    Y: Optional[np.ndarray] = None
    sigma: Optional[float] = None


@dataclass
class IncrementSequence:
    base: LowRankSym
    increments: List[Increment] = field(default_factory=list)

    def __len__(self):
        """Number of iterates represented (base plus one per increment)."""
        return 1 + len(self.increments)

    def blocks(self):
        """Outer/inner factor blocks, the base first."""
        out = [(self.base.Z, self.base.D)]
        out.extend((inc.V, inc.D) for inc in self.increments)
        return out

    def iterate(self, k):
        """Factors of iterate ``k`` (1-based)."""
        if not 1 <= k <= len(self):
            raise IndexError(k)
        blocks = self.blocks()[:k]
        Z = np.hstack([b[0] for b in blocks])
        D = spla.block_diag(*[b[1] for b in blocks])
        return LowRankSym(Z, D)

    def latest(self):
        return self.iterate(len(self))

    def truncated(self, k):
        """The sequence covering only iterates ``1..k``."""
        return IncrementSequence(self.base, list(self.increments[:k - 1]))

    def window(self, start):
        """Re-base the sequence so that iterate ``start`` becomes the first one."""
        base = self.iterate(start)
        return IncrementSequence(base, list(self.increments[start - 1:]))


def triangular_factor(R):
    """Triangular factor of the thin QR decomposition of ``R``."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape[1] == 0:
        return np.zeros((0, 0))
    S = spla.qr(R, mode="r")[0]
    return S[:min(R.shape), :]  # scipy returns all d rows


def projected_norm(R, T, norm="frobenius"):
    """Frobenius or spectral norm of ``R T R^T`` without forming it.

    ``R`` is ``d x k`` and ``T`` symmetric ``k x k``.  With ``R = Q S`` a thin
    QR decomposition the norm equals that of the small matrix ``S T S^T``.
    """
    if norm not in NORMS:
        raise ValueError(f"norm must be one of {NORMS}")
    R = np.atleast_2d(np.asarray(R, dtype=float))
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if R.shape[1] != T.shape[0]:
        raise DimensionMismatch(f"outer factor has {R.shape[1]} columns, inner factor {T.shape}")
    if R.shape[1] == 0:
        return 0.0
    S = triangular_factor(R)
    M = S @ T @ S.T
    M = 0.5 * (M + M.T)
    if norm == "frobenius":
        return float(np.linalg.norm(M))
    w = np.linalg.eigvalsh(M)
    return float(np.max(np.abs(w)))


def _term_scale(S, T):
    # ||S||_2^2 times the row-sum bound on ||T||_2 (cheap for wide factors)
    s2 = np.linalg.eigvalsh(S @ S.T)[-1] if S.size else 0.0
    return float(s2 * np.max(np.abs(T).sum(axis=1), initial=0.0))


def compress(R, T, floor=0.0, terms=False):
    """Shortest factors ``(Q, L)`` with ``Q L Q^T = R T R^T`` up to roundoff.

    ``Q`` has orthonormal columns and ``L`` is the diagonal of the nonzero
    eigenvalues of the projected matrix.  Eigenvalues with modulus at most
    ``eps * max(|lambda|_max, floor)`` are dropped.  With ``terms`` the scale
    also includes ``||S||^2 ||T||`` (``R = Q S``, row-sum norm of ``T``), the size of the terms
    before cancellation, so that cancellation noise is dropped as well.
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape[1] == 0:
        return R, np.zeros((0, 0))
    Q, S = np.linalg.qr(R)
    M = S @ T @ S.T
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    scale = max(np.max(np.abs(w)), floor)
    if terms:
        scale = max(scale, _term_scale(S, T))
    keep = np.abs(w) > EPS * scale
    return Q @ U[:, keep], np.diag(w[keep])


def compress_sym(X: "LowRankSym") -> "LowRankSym":
    """``X`` with its outer factor reduced to the numerical rank.

    Extrapolants are combinations with weights of both signs, so the
    cancellation-aware cut is used.
    """
    Z, D = compress(X.Z, X.D, terms=True)
    return LowRankSym(Z, D)


def roundoff_level(R, T):
    """Roundoff level ``eps ||S||^2 ||T||`` of ``R T R^T`` computed from factors.

    ``R = Q S``; the row-sum norm of ``T`` stands in for its 2-norm.
    """
    if np.shape(R)[1] == 0:
        return 0.0
    return EPS * _term_scale(triangular_factor(R), np.asarray(T))


def compress_residual(R, T, floor=0.0):
    """Residual factors reduced to the numerical rank with a ``+-1`` inner factor."""
    Q, L = compress(R, T, floor)
    w = np.diag(L)
    return Q * np.sqrt(np.abs(w)), np.diag(np.sign(w))


def sym_vec(S):
    """Upper triangle of symmetric ``S`` with off-diagonals scaled by sqrt(2).

    The map is an isometry from the Frobenius inner product to the Euclidean one.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    k = S.shape[0]
    iu = np.triu_indices(k)
    v = S[iu].copy()
    v[iu[0] != iu[1]] *= np.sqrt(2.0)
    return v


def _projected_products(blocks):
    """sym_vec of ``S_i M_i S_i^T`` where ``[F_1 ... F_n] = Q [S_1 ... S_n]``."""
    F = np.hstack([b[0] for b in blocks])
    S = triangular_factor(F)
    cols, start = [], 0
    for outer, inner in blocks:
        w = outer.shape[1]
        Si = S[:, start:start + w]
        cols.append(sym_vec(Si @ inner @ Si.T))
        start += w
    return np.column_stack(cols)


def assemble_extrapolant(seq: IncrementSequence, gamma) -> LowRankSym:
    """Factors of ``sum_i gamma_i X_i`` for the ``n`` iterates in ``seq``.

    The inner factor is ``blkdiag(tau_1 D_1, tau_2 D_2, ..., tau_n D_n)`` with
    tail sums ``tau``; blocks whose ``|tau_i|`` falls below
    ``sqrt(eps) * max |tau|`` are dropped from both factors.
    """
    if isinstance(gamma, Weights):
        gamma = gamma.gamma
    gamma = np.asarray(gamma, dtype=float)
    blocks = seq.blocks()
    if len(gamma) != len(blocks):
        raise DimensionMismatch(f"{len(gamma)} weights for {len(blocks)} iterates")
    tau = np.cumsum(gamma[::-1])[::-1]
    cutoff = np.sqrt(EPS) * np.max(np.abs(tau))
    Zs, Ds = [], []
    for t, (outer, inner) in zip(tau, blocks):
        if abs(t) <= cutoff:
            continue
        Zs.append(outer)
        Ds.append(t * inner)
    if not Zs:
        return LowRankSym.zeros(seq.base.d)
    return LowRankSym(np.hstack(Zs), spla.block_diag(*Ds))


def lowrank_rre_delta(seq: IncrementSequence):
    """RRE from ``n + 1`` low-rank iterates given by their increments.

    Weights minimize the Frobenius norm of ``sum_i g_i V_{i+1} D_{i+1} V_{i+1}^T``
    evaluated in the projected space of the increments; the extrapolant uses
    iterates ``1..n`` only.

    Returns
    -------
    (Weights, LowRankSym)
    """
    n = len(seq.increments)
    if n < 1:
        raise ValueError("need at least one increment")
    U = _projected_products([(inc.V, inc.D) for inc in seq.increments])
    w = rre_weights(U)
    return w, assemble_extrapolant(seq.truncated(n), w)


def residual_weights(Rs, T):
    """Weights minimizing ``||sum_i g_i R_i T R_i^T||_F`` subject to ``sum(g) = 1``."""
    U = _projected_products([(R, T) for R in Rs])
    return rre_weights(U)
