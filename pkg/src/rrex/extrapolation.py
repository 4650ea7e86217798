"""Reduced rank extrapolation for vector sequences.

Two formulations are provided: the classical one built from differences of
consecutive iterates (:func:`rre_delta`) and one built from residuals of the
underlying equation (:func:`rre_residual`), which stays meaningful when the
fixed-point map changes from step to step.  :func:`run_driver` applies either
of them on top of a fixed-point iteration in plain, non-cycling or cycling
mode.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg as spla

from .errors import DegenerateInput, NotConverged
from .trace import TraceRow

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps

MODES = ("plain", "noncycling", "cycling")
METHODS = ("delta", "residual")
RESTART_POLICIES = ("threshold", "every_n")
STOP_RULES = ("base", "any")


def tail_sums(gamma):
    """Return ``tau_i = sum_{j >= i} gamma_j``."""
    gamma = np.asarray(gamma, dtype=float)
    return np.cumsum(gamma[::-1])[::-1]


@dataclass(frozen=True)
class Weights:
    """Extrapolation coefficients ``gamma`` (summing to one) and their tail sums."""

    gamma: np.ndarray

    @property
    def tau(self):
        return tail_sums(self.gamma)

    @property
    def n(self):
        return len(self.gamma)

    @classmethod
    def unit(cls, n, index=-1):
        g = np.zeros(n)
        g[index] = 1.0
        return cls(g)


def _independent_recent_columns(U, tol):
    """Scan columns newest first, keeping a linearly independent subset.

    Returns ``(kept, exact)`` where ``kept`` are the sorted indices of the
    independent subset and ``exact`` is a weight vector with ``U @ exact``
    numerically zero, found from the first dependent column whose
    dependency has a nonzero coefficient sum (``None`` if there is none).
    """
    d, n = U.shape
    basis = np.zeros((d, 0))
    chosen = []
    exact = None
    for j in range(n - 1, -1, -1):
        u = U[:, j]
        r = u - basis @ (basis.T @ u)
        r = r - basis @ (basis.T @ r)
        nr = np.linalg.norm(r)
        if nr > tol:
            basis = np.column_stack([basis, r / nr])
            chosen.append(j)
        elif exact is None:
            v = np.zeros(n)
            v[j] = 1.0  # a zero column is a dependency on its own
            if chosen:
                v[chosen] = -np.linalg.lstsq(U[:, chosen], u, rcond=None)[0]
            total = v.sum()
            if abs(total) > np.sqrt(EPS) * np.abs(v).sum():
                exact = v / total
    return sorted(chosen), exact


def _weights_full_rank(U):
    k = U.shape[1]
    R = spla.qr(U, mode="r")[0][:k, :k]
    ones = np.ones(k)
    y = spla.solve_triangular(R, ones, trans="T")
    alpha = spla.solve_triangular(R, y)
    return alpha / alpha.sum()


def rre_weights(U) -> Weights:
    """Solve ``min ||U g||_2`` subject to ``sum(g) = 1``.

    Parameters
    ----------
    U
        ``d x n`` matrix whose columns are differences of iterates or
        residuals.  A 1-D array is treated as a single column.

    Returns
    -------
    Weights
        The minimizer.  When ``U`` is numerically rank deficient the problem
        is restricted to an independent subset of the most recent columns and
        the dropped columns receive zero weight, unless a dependency among
        the most recent columns gives a smaller (numerically zero) objective,
        in which case that combination is returned.

    Raises
    ------
    DegenerateInput
        If every column of ``U`` is numerically zero.
    """
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    d, n = U.shape
    if n == 0:
        raise ValueError("need at least one column")
    colnorms = np.linalg.norm(U, axis=0)
    if not np.all(np.isfinite(colnorms)):
        raise ValueError("non-finite entries in U")
    if colnorms.max() <= 1e3 * EPS * d:
        raise DegenerateInput("all columns are numerically zero")

    R, piv = spla.qr(U, mode="r", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = 1e2 * EPS * np.linalg.norm(U)
    rank = int(np.count_nonzero(diag > tol))
    gamma = np.zeros(n)
    if rank == n:
        gamma[:] = _weights_full_rank(U)
    else:
        cols, exact = _independent_recent_columns(U, tol)
        logger.debug("rank deficient U (%d of %d columns kept)", len(cols), n)
        gamma[cols] = _weights_full_rank(U[:, cols])
        # a dependency with nonzero sum reaches a zero objective; prefer it
        if exact is not None and np.linalg.norm(U @ exact) < np.linalg.norm(U @ gamma):
            gamma = exact
    return Weights(gamma)


def _stack(xs):
    X = np.column_stack([np.asarray(x, dtype=float) for x in xs])
    return X


def rre_delta(xs):
    """Extrapolate from ``n + 1`` iterates using their consecutive differences."""
    if len(xs) < 2:
        raise ValueError("rre_delta needs at least two iterates")
    X = _stack(xs)
    w = rre_weights(np.diff(X, axis=1))
    return X[:, :-1] @ w.gamma


def rre_residual(xs, residuals):
    """Extrapolate from ``n`` iterates using residuals of the underlying equation.

    ``residuals`` holds ``F(x_i)`` in column ``i``.
    """
    X = _stack(xs)
    F = np.asarray(residuals, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if F.shape != X.shape:
        raise ValueError(f"residual matrix has shape {F.shape}, iterates {X.shape}")
    w = rre_weights(F)
    return X @ w.gamma


def _extrapolate(method, xs, rs, n):
    """Return ``(x_hat, objective, reference)`` for the current window."""
    if method == "delta":
        X = _stack(xs[-(n + 1):])
        U = np.diff(X, axis=1)
        w = rre_weights(U)
        return X[:, :-1] @ w.gamma, np.linalg.norm(U @ w.gamma), np.linalg.norm(U[:, -1])
    X = _stack(xs[-n:])
    U = _stack(rs[-n:])
    w = rre_weights(U)
    return X @ w.gamma, np.linalg.norm(U @ w.gamma), np.linalg.norm(U[:, -1])


@dataclass
class FixedPointMap:
    """A (possibly nonstationary) fixed-point map ``x -> f_i(x)``.

    ``apply(i, x)`` produces the next iterate from iterate number ``i``;
    ``residual(x)`` evaluates the residual of the underlying equation.  When
    no residual is supplied, ``apply(i, x) - x`` is used.
    """

    apply: Callable[[int, np.ndarray], np.ndarray]
    residual: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass
class DriverConfig:
    n: int = 3
    mode: str = "plain"
    tol: float = 1e-10
    max_iters: int = 1000
    method: str = "residual"
    restart_policy: str = "threshold"
    theta: float = 0.1
    relative: bool = True
    enable_threshold: Optional[float] = None
    stop_on: str = "base"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"window n must be a positive integer, got {self.n}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.restart_policy not in RESTART_POLICIES:
            raise ValueError(f"restart policy must be one of {RESTART_POLICIES}")
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.stop_on not in STOP_RULES:
            raise ValueError(f"stop_on must be one of {STOP_RULES}, got {self.stop_on!r}")
        if self.enable_threshold is not None and not self.enable_threshold > 0:
            raise ValueError("enable_threshold must be positive")


@dataclass
class DriverResult:
    x: np.ndarray
    trace: List[TraceRow] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    from_extrapolant: bool = False
    first_extrapolant_hit: Optional[int] = None


def run_driver(fmap: FixedPointMap, x1, cfg: DriverConfig) -> DriverResult:
    """Run a fixed-point iteration with optional RRE acceleration.

    The trace has one row per base iterate.  In non-cycling mode the row also
    carries the residual of the extrapolant computed from the window ending at
    that iterate; in cycling mode a row tagged ``restart`` is an extrapolant
    that replaced the base iterate.

    With ``cfg.stop_on == "base"`` the run ends when a base iterate meets
    ``cfg.tol``; with ``"any"`` an extrapolant meeting it also ends the run
    and is returned.  The first iteration at which an extrapolant met the
    tolerance is recorded either way.

    Raises
    ------
    NotConverged
        When ``cfg.max_iters`` iterates were produced without meeting
        ``cfg.tol``; the exception carries the trace and the last result.
    """
    n = cfg.n

    def residual(i, x):
        if fmap.residual is not None:
            return np.asarray(fmap.residual(x), dtype=float)
        return np.asarray(fmap.apply(i, x), dtype=float) - x

    x = np.array(x1, dtype=float)
    r = residual(1, x)
    scale = np.linalg.norm(r) if cfg.relative else 1.0
    if scale == 0.0:
        scale = 1.0
    res = np.linalg.norm(r) / scale
    result = DriverResult(x=x, trace=[TraceRow(1, res)], iterations=1)
    if res <= cfg.tol:
        result.converged = True
        return result

    xs, rs = [x], [r]
    i = 1
    while i < cfg.max_iters:
        t0 = time.perf_counter()
        x_next = np.asarray(fmap.apply(i, x), dtype=float)
        i += 1
        r_next = residual(i, x_next)
        res = np.linalg.norm(r_next) / scale
        xs.append(x_next)
        rs.append(r_next)
        needed = n + 1 if cfg.method == "delta" else n
        res_rre, event, x_hat = None, "none", None
        active = cfg.enable_threshold is None or res < cfg.enable_threshold
        if cfg.mode != "plain" and active and len(xs) >= needed:
            try:
                x_hat, objective, reference = _extrapolate(cfg.method, xs, rs, n)
            except DegenerateInput:
                event = "skipped_degenerate"
            else:
                if cfg.mode == "noncycling":
                    res_rre = np.linalg.norm(residual(i, x_hat)) / scale
                elif len(xs) >= n + 1 and (
                        cfg.restart_policy == "every_n" or objective <= cfg.theta * reference):
                    x_next = x_hat
                    r_next = residual(i, x_next)
                    res = np.linalg.norm(r_next) / scale
                    xs, rs = [x_next], [r_next]
                    event = "restart"
        while len(xs) > n + 1:
            del xs[0], rs[0]
        result.trace.append(TraceRow(i, res, res_rre, event, None, time.perf_counter() - t0))
        x = x_next
        result.iterations = i
        if res <= cfg.tol:
            result.x, result.converged = x, True
            return result
        if res_rre is not None and res_rre <= cfg.tol:
            if result.first_extrapolant_hit is None:
                result.first_extrapolant_hit = i
            if cfg.stop_on == "any":
                result.x, result.converged, result.from_extrapolant = x_hat, True, True
                return result
    result.x = x
    raise NotConverged(f"no convergence after {cfg.max_iters} iterations",
                       trace=result.trace, result=result)
