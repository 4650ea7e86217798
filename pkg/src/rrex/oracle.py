"""Dense reference solver for small Riccati and Lyapunov equations.

The generalized equation is reduced to ``E = I`` through ``Y = E^T X E``,
the stabilizing solution is read off the stable invariant subspace of the
Hamiltonian via the matrix sign function, and a few Newton-Kleinman steps
polish the result to working accuracy.  Lyapunov problems are solved directly.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import OracleFailed
from .radi import AreProblem

logger = logging.getLogger(__name__)

MAX_DIM = 600
SIGN_TOL = 1e-13
SIGN_MAXIT = 100
RESIDUAL_BOUND = 1e-8
POLISH_STEPS = 3


@dataclass
class DenseAreSolution:
    X: np.ndarray
    residual: float
    stabilizing: bool

    @property
    def relative_residual(self):
        return self.residual


def matrix_sign(H, tol=SIGN_TOL, maxit=SIGN_MAXIT):
    """Sign function of ``H`` by the scaled Newton iteration ``S <- (c S + (c S)^{-1}) / 2``."""
    S = np.array(H, dtype=float)
    m = S.shape[0]
    for k in range(maxit):
        try:
            Sinv = np.linalg.inv(S)
        except np.linalg.LinAlgError:
            raise OracleFailed("singular iterate in the sign iteration "
                               "(eigenvalues on the imaginary axis?)") from None
        # determinant scaling while far from convergence
        _, logdet = np.linalg.slogdet(S)
        c = np.exp(-logdet / m) if k < 10 else 1.0
        S_new = 0.5 * (c * S + Sinv / c)
        if np.linalg.norm(S_new - S) <= tol * np.linalg.norm(S):
            return S_new, k + 1
        S = S_new
    raise OracleFailed(f"sign iteration did not converge in {maxit} steps")


def _care_identity(A, G, Q):
    """Stabilizing solution of ``A^T Y + Y A + Q - Y G Y = 0`` from the sign function."""
    d = A.shape[0]
    Ham = np.block([[A, -G], [-Q, -A.T]])
    S, _ = matrix_sign(Ham)
    I = np.eye(d)
    lhs = np.vstack([S[:d, d:], S[d:, d:] + I])
    rhs = -np.vstack([S[:d, :d] + I, S[d:, :d]])
    Y = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    return 0.5 * (Y + Y.T)


def _newton_polish(A, G, Q, Y, steps=POLISH_STEPS):
    """Newton-Kleinman refinement ``(A - G Y)^T Y+ + Y+ (A - G Y) = -Q - Y G Y``."""
    for _ in range(steps):
        Ak = A - G @ Y
        if np.max(np.linalg.eigvals(Ak).real) >= 0:
            break
        Ynew = spla.solve_continuous_lyapunov(Ak.T, -(Q + Y @ G @ Y))
        Y = 0.5 * (Ynew + Ynew.T)
    return Y


def dense_are_solve(prob: AreProblem) -> DenseAreSolution:
    """Stabilizing solution of the (generalized) Riccati equation of ``prob``.

    Raises
    ------
    OracleFailed
        If the problem is too large, the sign iteration fails, or the result
        misses the residual bound ``1e-8 ||C^T C||_F`` or is not stabilizing.
    """
    d = prob.d
    if d > MAX_DIM:
        raise OracleFailed(f"dense oracle limited to d <= {MAX_DIM}, got {d}")
    E, A, B, C, _ = prob.dense()
    try:
        Einv = np.linalg.inv(E)
    except np.linalg.LinAlgError as exc:
        raise OracleFailed("E is singular") from exc
    At = Einv @ A
    Bt = Einv @ B
    Q = C.T @ C
    G = Bt @ prob.Hinv @ Bt.T
    # with Y = E^T X E:  At^T Y + Y At + Q - Y G Y = 0
    try:
        if prob.is_lyapunov:
            Y = spla.solve_continuous_lyapunov(At.T, -Q)
            Y = 0.5 * (Y + Y.T)
        else:
            Y = _care_identity(At, G, Q)
            Y = _newton_polish(At, G, Q, Y)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise OracleFailed(f"dense solve failed: {exc}") from exc
    X = Einv.T @ Y @ Einv
    X = 0.5 * (X + X.T)

    scale = np.linalg.norm(Q) or 1.0
    res = float(np.linalg.norm(prob.residual_dense(X)) / scale)
    Acl = At - G @ Y
    stabilizing = bool(np.max(np.linalg.eigvals(Acl).real) < 0)
    if not np.isfinite(res) or res > RESIDUAL_BOUND:
        raise OracleFailed(f"oracle residual {res:.3e} exceeds {RESIDUAL_BOUND:g}")
    if not stabilizing:
        raise OracleFailed("closed loop is not stable")
    return DenseAreSolution(X, res, stabilizing)


def relative_error(X_ref, X):
    """``||X - X_ref||_F / ||X_ref||_F`` (``X`` may be a low-rank object)."""
    if hasattr(X, "to_dense"):
        X = X.to_dense()
    return float(np.linalg.norm(X - X_ref) / np.linalg.norm(X_ref))
