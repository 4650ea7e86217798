"""RADI iteration for large sparse algebraic Riccati equations.

The equation is

    A^T X E + E^T X A + C^T C - E^T X B H^{-1} B^T X E = 0

with sparse ``E``, ``A`` and thin dense ``B``, ``C``.  ``B = 0`` gives the
Lyapunov equation, for which a RADI step is exactly a low-rank ADI step.
Iterates are kept as increment sequences and residuals as ``R T R^T`` with a
fixed inner factor ``T``, so the extrapolation routines in :mod:`rrex.lowrank`
apply directly.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg as spla
import scipy.sparse as sp
import scipy.sparse.linalg as spsla

from .errors import (DegenerateInput, DimensionMismatch, IndefiniteY, NotConverged,
                     SingularShiftedSystem)
from .extrapolation import EPS, DriverConfig, Weights, tail_sums
from .lowrank import (Increment, IncrementSequence, LowRankSym, assemble_extrapolant,
                      compress_residual, compress_sym, projected_norm, residual_weights,
                      roundoff_level)
from .trace import TraceRow

logger = logging.getLogger(__name__)

# a restart residual must exceed its roundoff level by this factor
RESTART_NOISE_FACTOR = 10.0


class AreProblem:
    """Coefficients ``(E, A, B, C, H)`` of a Riccati (or Lyapunov) equation.

    ``E`` may be ``None`` for the identity and ``H`` may be a scalar ``lam``
    meaning ``lam * I_p``.
    """

    def __init__(self, A, B, C, E=None, H=1.0, name=None):
        A = sp.csr_matrix(A, dtype=float)
        d = A.shape[0]
        if A.shape != (d, d):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        E = sp.identity(d, format="csr") if E is None else sp.csr_matrix(E, dtype=float)
        if E.shape != (d, d):
            raise DimensionMismatch(f"E has shape {E.shape}, expected {(d, d)}")
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if B.shape[0] != d:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, expected {d}")
        C = np.atleast_2d(np.asarray(C, dtype=float))
        if C.shape[1] != d:
            raise DimensionMismatch(f"C has {C.shape[1]} columns, expected {d}")
        p = B.shape[1]
        if np.isscalar(H) or np.ndim(H) == 0:
            H = float(H) * np.eye(p)
        H = np.atleast_2d(np.asarray(H, dtype=float))
        if H.shape != (p, p):
            raise DimensionMismatch(f"H has shape {H.shape}, expected {(p, p)}")
        if p:
            spla.cholesky(H)  # raises LinAlgError unless SPD
        self.A, self.E, self.B, self.C, self.H = A, E, B, C, H
        self.name = name
        self.Hinv = np.linalg.inv(H) if p else H
        self.Hinv = 0.5 * (self.Hinv + self.Hinv.T)

    @property
    def d(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.B.shape[1]

    @property
    def q(self):
        return self.C.shape[0]

    @property
    def is_lyapunov(self):
        return self.p == 0 or not np.any(self.B)

    def __repr__(self):
        return f"AreProblem(d={self.d}, p={self.p}, q={self.q}, name={self.name!r})"

    def dense(self):
        """Dense ``(E, A, B, C, H)``; only sensible for small ``d``."""
        return self.E.toarray(), self.A.toarray(), self.B, self.C, self.H

    def residual_dense(self, X):
        """Dense Riccati residual of a ``d x d`` matrix ``X``."""
        E, A, B, C, _ = self.dense()
        XE = X @ E
        ATXE = A.T @ XE
        BXE = B.T @ XE
        return ATXE + ATXE.T + C.T @ C - BXE.T @ self.Hinv @ BXE


def riccati_residual(prob: AreProblem, X):
    """``R(X)`` as a dense matrix; ``X`` may be dense or a :class:`LowRankSym`."""
    if isinstance(X, LowRankSym):
        X = X.to_dense()
    return prob.residual_dense(np.asarray(X, dtype=float))


def init_residual(prob: AreProblem, X1: Optional[LowRankSym] = None):
    """Factors ``(R, T)`` with ``R T R^T = R(X1)``.

    For ``X1 = 0`` this is ``(C^T, I_q)``; otherwise
    ``R = [C^T, A^T Z, E^T Z]`` with the matching 3 x 3 block inner factor.
    """
    Ct = prob.C.T.copy()
    q = prob.q
    if X1 is None or X1.rank_bound == 0:
        return Ct, np.eye(q)
    Z, D = X1.Z, X1.D
    if Z.shape[0] != prob.d:
        raise DimensionMismatch(f"X1 has dimension {Z.shape[0]}, problem {prob.d}")
    z = Z.shape[1]
    R = np.hstack([Ct, prob.A.T @ Z, prob.E.T @ Z])
    ZB = Z.T @ prob.B
    DZB = D @ ZB
    T = np.zeros((q + 2 * z, q + 2 * z))
    T[:q, :q] = np.eye(q)
    T[q:q + z, q + z:] = D
    T[q + z:, q:q + z] = D
    T[q + z:, q + z:] = -DZB @ prob.Hinv @ DZB.T
    return R, T


@dataclass
class RadiState:
    """Mutable state of one RADI run.

    ``K`` caches ``E^T X B H^{-1}``, the low-rank part of the closed-loop
    operator, so a step never multiplies by the full outer factor.
    """

    seq: IncrementSequence
    R: np.ndarray
    T: np.ndarray
    K: np.ndarray
    history: List[tuple] = field(default_factory=list)

    @property
    def r(self):
        return self.R.shape[1]

    def iterate(self):
        return self.seq.latest()


def init_state(prob: AreProblem, X1: Optional[LowRankSym] = None) -> RadiState:
    if X1 is None:
        X1 = LowRankSym.zeros(prob.d)
    R, T = init_residual(prob, X1)
    if X1.rank_bound:
        K = prob.E.T @ (X1.Z @ (X1.D @ (X1.Z.T @ prob.B))) @ prob.Hinv
    else:
        K = np.zeros((prob.d, prob.p))
    return RadiState(IncrementSequence(X1), R, T, np.asarray(K))


def shifted_operator(prob: AreProblem, sigma):
    return sp.csc_matrix(prob.A.T + sigma * prob.E.T)


def factorize_shifted(prob: AreProblem, sigma):
    try:
        lu = spsla.splu(shifted_operator(prob, sigma))
    except RuntimeError as exc:
        raise SingularShiftedSystem(f"A^T + ({sigma}) E^T is singular: {exc}") from exc
    return lu


def _solve(lu, rhs):
    out = lu.solve(np.asfortranarray(rhs))
    if not np.all(np.isfinite(out)):
        raise SingularShiftedSystem("shifted solve produced non-finite values")
    return out


def radi_step(prob: AreProblem, state: RadiState, sigma: float) -> RadiState:
    """Advance ``state`` by one RADI step with real shift ``sigma < 0``.

    The closed-loop shifted system ``A^T - K B^T + sigma E^T`` is solved with
    one sparse LU of ``A^T + sigma E^T`` and a Sherman-Morrison-Woodbury
    correction for the rank-``p`` term.  ``state`` is updated in place and
    returned.
    """
    sigma = float(sigma)
    if not sigma < 0:
        raise ValueError(f"shift must be strictly negative, got {sigma}")
    lu = factorize_shifted(prob, sigma)
    rhs = state.R @ state.T
    scale = np.sqrt(-2.0 * sigma)
    if prob.is_lyapunov or not np.any(state.K):
        V = scale * _solve(lu, rhs)
    else:
        sol = _solve(lu, np.hstack([rhs, state.K]))
        W_rhs, W_K = sol[:, :rhs.shape[1]], sol[:, rhs.shape[1]:]
        cap = np.eye(prob.p) - prob.B.T @ W_K
        try:
            corr = np.linalg.solve(cap, prob.B.T @ W_rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularShiftedSystem("capacitance matrix is singular") from exc
        V = scale * (W_rhs + W_K @ corr)

    VB = V.T @ prob.B
    Y = state.T - (VB @ prob.Hinv @ VB.T) / (2.0 * sigma)
    Y = 0.5 * (Y + Y.T)
    s = np.linalg.svd(Y, compute_uv=False)
    if s.size and s[-1] <= EPS * Y.shape[0] * s[0]:
        raise IndefiniteY(f"inner increment factor is singular (sigma={sigma})")
    Dinc = np.linalg.solve(Y, np.eye(Y.shape[0]))
    Dinc = 0.5 * (Dinc + Dinc.T)

    EVD = prob.E.T @ (V @ Dinc)
    state.R = state.R + scale * EVD
    if prob.p:
        state.K = state.K + EVD @ (VB @ prob.Hinv)
    state.seq.increments.append(Increment(V, Dinc, Y, sigma))
    return state


class ShiftStrategy:
    """Source of real negative shift parameters.

    ``kind`` is one of ``projection`` (Ritz values of the pencil projected on
    the latest ``width`` increment blocks, used largest magnitude first and
    recomputed when exhausted), ``fixed_list`` (cycled) or
    ``single_heuristic`` (one shift computed from the first projection and
    reused).  Every shift is clamped to ``[lo, hi]`` with ``lo <= hi < 0``.

    Projection uses the closed-loop matrix ``A - B K^T`` when ``closed_loop``
    is set, and maps a complex Ritz value ``lam`` to ``-|lam|``
    (``complex_map="modulus"``) or to ``Re(lam)`` (``"real_part"``).
    """

    KINDS = ("projection", "fixed_list", "single_heuristic")
    COMPLEX_MAPS = ("modulus", "real_part")

    def __init__(self, kind="projection", shifts: Sequence[float] = (), lo=-1e10, hi=-1e-10,
                 width=1, closed_loop=True, complex_map="modulus"):
        if kind not in self.KINDS:
            raise ValueError(f"unknown shift strategy {kind!r}")
        if not (lo <= hi < 0):
            raise ValueError(f"clamping interval [{lo}, {hi}] must lie in the negative reals")
        if kind == "fixed_list":
            if not len(shifts):
                raise ValueError("fixed_list strategy needs at least one shift")
            if any(not s < 0 for s in shifts):
                raise ValueError("fixed shifts must be negative")
        if int(width) != width or width < 1:
            raise ValueError(f"Ritz subspace width must be a positive integer, got {width}")
        if complex_map not in self.COMPLEX_MAPS:
            raise ValueError(f"complex_map must be one of {self.COMPLEX_MAPS}")
        self.kind, self.lo, self.hi, self.width = kind, float(lo), float(hi), int(width)
        self.closed_loop, self.complex_map = bool(closed_loop), complex_map
        self.shifts = [float(s) for s in shifts]
        self._pos = 0
        self._queue: List[float] = []
        self._last: Optional[float] = None

    def clamp(self, sigma):
        return float(min(max(sigma, self.lo), self.hi))

    def reset(self):
        self._pos = 0
        self._queue = []


def _orth(W):
    # directions weighted below sqrt(eps) only add spurious Ritz values
    W = np.atleast_2d(W)
    if W.shape[1] == 0:
        return W
    U, s, _ = np.linalg.svd(W, full_matrices=False)
    keep = s > s[0] * np.sqrt(EPS) if s.size and s[0] > 0 else np.zeros(0, bool)
    return U[:, keep]


def ritz_values(prob: AreProblem, W, K=None):
    """Eigenvalues of the pencil ``(Q^T A Q, Q^T E Q)`` with ``Q = orth(W)``.

    With the feedback ``K`` the closed-loop matrix ``A - B K^T`` replaces ``A``.
    """
    Q = _orth(W)
    if Q.shape[1] == 0:
        return np.zeros(0, complex)
    Ap = Q.T @ (prob.A @ Q)
    if K is not None and np.any(K):
        Ap -= (Q.T @ prob.B) @ (K.T @ Q)
    Ep = Q.T @ (prob.E @ Q)
    with np.errstate(all="ignore"):
        vals = spla.eigvals(Ap, Ep)
    return vals[np.isfinite(vals)]


def _stable_candidates(vals, complex_map="modulus"):
    """Real shifts from stable Ritz values, largest magnitude first.

    With ``modulus`` a complex value ``lam`` maps to ``-|lam|``, the real
    shift minimizing ``|lam - s| / |lam + s|``.
    """
    vals = vals[np.real(vals) < 0]
    re = -np.abs(vals) if complex_map == "modulus" else np.real(vals)
    cands = np.unique(np.round(re, 12))  # one per conjugate pair
    return sorted(cands, key=lambda x: -abs(x))


def select_shift(prob: AreProblem, state: RadiState, strat: ShiftStrategy) -> float:
    """Next shift for ``state`` according to ``strat`` (always within the clamp)."""
    if strat.kind == "fixed_list":
        sigma = strat.shifts[strat._pos % len(strat.shifts)]
        strat._pos += 1
        return strat.clamp(sigma)

    if strat.kind == "single_heuristic" and strat._last is not None:
        return strat._last

    if not strat._queue:
        incs = state.seq.increments[-strat.width:]
        W = np.hstack([inc.V for inc in incs]) if incs else state.R
        K = state.K if strat.closed_loop else None
        cands = _stable_candidates(ritz_values(prob, W, K), strat.complex_map)
        if strat.kind == "single_heuristic" and cands:
            mags = np.abs(cands)
            cands = [-float(np.sqrt(mags.min() * mags.max()))]
        strat._queue = [strat.clamp(c) for c in cands]
    if strat._queue:
        sigma = strat._queue.pop(0)
    else:
        sigma = strat._last if strat._last is not None else strat.hi
        logger.debug("no stable Ritz value; falling back to %g", sigma)
    strat._last = sigma
    return sigma


def coefficient_bounds_check(gamma, kind="psd_extrapolant") -> bool:
    """Whether the weights satisfy the PSD-preserving tail-sum bounds.

    ``psd_extrapolant`` requires every tail sum ``tau_j >= 0``;
    ``psd_residual`` additionally requires ``tau_j <= 1``.
    """
    if isinstance(gamma, Weights):
        gamma = gamma.gamma
    tau = tail_sums(gamma)
    if kind == "psd_extrapolant":
        return bool(np.all(tau >= -1e-12))
    if kind == "psd_residual":
        return bool(np.all((tau >= -1e-12) & (tau <= 1 + 1e-12)))
    raise ValueError(f"unknown bound kind {kind!r}")


def clip_weights(w: Weights) -> Weights:
    """Project tail sums onto ``[0, 1]`` and rebuild weights summing to one."""
    tau = np.clip(w.tau, 0.0, 1.0)
    tau[0] = 1.0
    gamma = tau - np.append(tau[1:], 0.0)
    return Weights(gamma)


@dataclass
class RadiResult:
    solution: LowRankSym
    trace: List[TraceRow]
    converged: bool
    iterations: int
    from_extrapolant: bool = False
    restarts: List[dict] = field(default_factory=list)
    bound_violations: int = 0
    rejected_restarts: int = 0
    extrapolant: Optional[LowRankSym] = None
    extrapolant_residual: Optional[float] = None
    first_extrapolant_hit: Optional[int] = None

    def best(self):
        """The final extrapolant if its residual is below the base one, else the base iterate."""
        if self.extrapolant is not None and self.extrapolant_residual <= self.trace[-1].res_base:
            return self.extrapolant
        return self.solution


def extrapolant_residual_norm(prob, window_seq, Rs, T, gamma, method="factored",
                              norm="spectral"):
    """Norm of ``R(sum gamma_i X_i)`` for a window of RADI iterates.

    ``factored`` uses the closed-form factorization in the span of the
    window's residual factors; ``direct`` re-assembles the residual factors
    of the extrapolant from scratch.
    """
    if method == "factored":
        from .residual_algebra import ResidualCache, build_H
        cache = ResidualCache.from_window(prob, window_seq, Rs, T)
        H = build_H(len(Rs), gamma, cache)
        return projected_norm(np.hstack(Rs), H.H, norm)
    Xhat = assemble_extrapolant(window_seq, gamma)
    R, Th = init_residual(prob, Xhat)
    return projected_norm(R, Th, norm)


def radi_solve(prob: AreProblem, cfg: Optional[DriverConfig] = None,
               strat: Optional[ShiftStrategy] = None, X1: Optional[LowRankSym] = None,
               clip_bounds=False, residual_method="factored", raise_on_failure=True):
    """Run RADI, optionally accelerated by residual-based low-rank RRE.

    ``cfg.mode`` selects plain RADI, non-cycling RRE (extrapolants are
    reported but never fed back) or cycling RRE (RADI restarts from the
    extrapolant).  Residual norms are relative spectral norms with respect
    to ``||C^T C||``.  ``cfg.stop_on`` decides whether an extrapolant meeting
    ``cfg.tol`` ends a non-cycling run (``"any"``) or only a base iterate
    does (``"base"``); the latest extrapolant is kept in the result.

    At a restart the extrapolant and its re-assembled residual are
    compressed.  The restart is skipped (and counted in
    ``rejected_restarts``) when the rebuilt residual is not below the current
    one or not clearly above its own roundoff level.  The shift queue carries
    over, so the remaining projection shifts are still used.

    Returns
    -------
    RadiResult

    Raises
    ------
    NotConverged
        After ``cfg.max_iters`` iterates without reaching ``cfg.tol``, unless
        ``raise_on_failure`` is false.
    """
    cfg = cfg or DriverConfig()
    strat = strat or ShiftStrategy()
    n = cfg.n
    state = init_state(prob, X1)
    cc_norm = projected_norm(prob.C.T, np.eye(prob.q), "spectral")
    ref = cc_norm or 1.0
    if not cfg.relative:
        ref = 1.0
    res = projected_norm(state.R, state.T, "spectral") / ref
    trace = [TraceRow(1, res)]
    result = RadiResult(state.iterate(), trace, False, 1)
    if res <= cfg.tol:
        result.converged = True
        return result

    Rs = [state.R]
    it = 1
    while it < cfg.max_iters:
        t0 = time.perf_counter()
        sigma = select_shift(prob, state, strat)
        try:
            radi_step(prob, state, sigma)
        except (SingularShiftedSystem, IndefiniteY) as exc:
            raise type(exc)(f"iteration {it + 1}: {exc}") from exc
        it += 1
        res = projected_norm(state.R, state.T, "spectral") / ref
        Rs.append(state.R)
        if len(Rs) > n:
            del Rs[0]
        res_hat, event, Xhat = None, "none", None
        active = cfg.enable_threshold is None or res < cfg.enable_threshold
        if cfg.mode != "plain" and active and len(Rs) >= n:
            try:
                w = residual_weights(Rs, state.T)
            except DegenerateInput:
                event = "skipped_degenerate"
            else:
                if not coefficient_bounds_check(w, "psd_residual"):
                    result.bound_violations += 1
                    logger.debug("iteration %d: weights %s violate [0,1] tail bounds",
                                 it, w.gamma)
                if clip_bounds:
                    w = clip_weights(w)
                window = state.seq.window(len(state.seq) - n + 1)
                Xhat = assemble_extrapolant(window, w)
                res_hat = extrapolant_residual_norm(
                    prob, window, Rs, state.T, w, residual_method) / ref
                result.extrapolant, result.extrapolant_residual = Xhat, res_hat
                if res_hat <= cfg.tol and result.first_extrapolant_hit is None:
                    result.first_extrapolant_hit = it
                restart = cfg.mode == "cycling" and (
                    res_hat <= cfg.tol
                    or (len(state.seq) - 1 >= n and (
                        cfg.restart_policy == "every_n" or res_hat <= cfg.theta * res)))
                if restart:
                    # compress, or the restarted factors grow geometrically
                    Xc = compress_sym(Xhat)
                    new = init_state(prob, Xc)
                    noise = roundoff_level(new.R, new.T) / ref
                    new.R, new.T = compress_residual(new.R, new.T, cc_norm)
                    new_res = projected_norm(new.R, new.T, "spectral") / ref
                    # the rebuilt residual is a difference of terms of size
                    # ||A|| ||E|| ||X||; keep iterating unless it is resolved
                    # above that roundoff and improves on the current one
                    if new_res >= res or new_res <= RESTART_NOISE_FACTOR * noise:
                        result.rejected_restarts += 1
                        logger.debug("iteration %d: restart residual %.3e (roundoff %.1e) "
                                     "rejected against %.3e", it, new_res, noise, res)
                    else:
                        # the shift queue is kept: restarting it every n steps
                        # would only ever use its largest shifts
                        state, res = new, new_res
                        eig_min = _min_eig_projected(state.R, state.T)
                        result.restarts.append({"iteration": it, "residual": res,
                                                "indefinite": eig_min < 0, "min_eig": eig_min})
                        if eig_min < 0:
                            logger.info("iteration %d: restart residual is indefinite "
                                        "(min eigenvalue %.3e)", it, eig_min)
                        Rs = [state.R]
                        event = "restart"
                        res_hat = None
                        result.extrapolant = result.extrapolant_residual = None
        trace.append(TraceRow(it, res, res_hat, event, sigma, time.perf_counter() - t0))
        result.iterations = it
        if res <= cfg.tol:
            result.solution, result.converged = state.iterate(), True
            return result
        if res_hat is not None and res_hat <= cfg.tol and cfg.stop_on == "any":
            result.solution, result.converged, result.from_extrapolant = Xhat, True, True
            return result
    result.solution = state.iterate()
    if raise_on_failure:
        raise NotConverged(f"RADI did not reach tol={cfg.tol} in {cfg.max_iters} iterations",
                           trace=trace, result=result)
    return result


def _min_eig_projected(R, T):
    from .lowrank import triangular_factor
    S = triangular_factor(R)
    M = S @ T @ S.T
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    return float(w[0]) if w.size else 0.0
