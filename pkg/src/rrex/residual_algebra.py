"""Closed-form residual of an RRE extrapolant of RADI iterates.

For a window ``X_1, ..., X_n`` of consecutive RADI iterates with residual
factors ``R_1, ..., R_n`` (same inner factor ``T``), the Riccati residual of
``sum_i gamma_i X_i`` (with ``sum gamma = 1``) equals

    [R_1 ... R_n] H_n [R_1 ... R_n]^T

for a small symmetric ``H_n`` built recursively from ``T``, the inner
increment factors ``Y_i``, the shifts and the couplings
``C_ik = V_i^T B H^{-1} B^T V_k``.  This module builds ``H_n`` and uses it to
classify when the residual stays positive semi-definite.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg as spla

from .errors import IncompleteCache, PrerequisiteViolated
from .extrapolation import Weights

PSD_RTOL = 1e-10
BOX_SLACK = 1e-8


@dataclass
class ResidualCache:
    """Per-step data of a window of RADI iterates, indexed 1..n.

    ``Y[k]``, ``V[k]`` and ``sigma[k]`` describe the step that produced
    iterate ``k`` (so ``sigma[k]`` is the shift written ``sigma_{k-1}`` in
    the usual numbering).
    """

    R: List[np.ndarray]
    T: np.ndarray
    Y: Dict[int, np.ndarray] = field(default_factory=dict)
    V: Dict[int, np.ndarray] = field(default_factory=dict)
    sigma: Dict[int, float] = field(default_factory=dict)
    C: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)

    @property
    def n(self):
        return len(self.R)

    @property
    def p(self):
        return self.T.shape[0]

    @classmethod
    def from_window(cls, prob, seq, Rs, T):
        """Cache for the iterates in ``seq`` (an :class:`IncrementSequence`)."""
        if len(Rs) != len(seq):
            raise IncompleteCache(f"{len(Rs)} residual factors for {len(seq)} iterates")
        cache = cls(list(Rs), np.asarray(T))
        BV = {}
        for k, inc in enumerate(seq.increments, start=2):
            if inc.Y is None or inc.sigma is None:
                raise IncompleteCache(f"increment {k} lacks Y or sigma")
            cache.Y[k], cache.V[k], cache.sigma[k] = inc.Y, inc.V, inc.sigma
            BV[k] = inc.V.T @ prob.B
        for i in BV:
            for k in BV:
                if i < k:
                    cache.C[i, k] = BV[i] @ prob.Hinv @ BV[k].T
        return cache

    def _get(self, table, key, what):
        try:
            return table[key]
        except KeyError:
            raise IncompleteCache(f"missing {what} for {key}") from None


def _as_gamma(gamma):
    if isinstance(gamma, Weights):
        gamma = gamma.gamma
    return np.asarray(gamma, dtype=float)


def _tail_block(g, T, Y):
    c = g - g * g
    return np.block([
        [(g * g - 2 * g) * T + c * Y, c * (T - Y)],
        [c * (T - Y), g * g * T + c * Y],
    ])


def _build(n, g, cache):
    T = cache.T
    p = cache.p
    if n == 1:
        return T.copy()
    Yn = cache._get(cache.Y, n, "Y")
    if n == 2:
        c = g[1] - g[1] ** 2
        return np.block([
            [g[0] ** 2 * T + c * Yn, c * (T - Yn)],
            [c * (T - Yn), g[1] ** 2 * T + c * Yn],
        ])

    merged = np.concatenate([g[:n - 2], [g[n - 2] + g[n - 1]]])
    H = np.zeros((n * p, n * p))
    H[:(n - 1) * p, :(n - 1) * p] = _build(n - 1, merged, cache)
    H[(n - 2) * p:, (n - 2) * p:] += _tail_block(g[n - 1], T, Yn)

    # coupling through the quadratic term; vanishes when B = 0
    sig_n = cache._get(cache.sigma, n, "sigma")
    M = np.zeros(((n - 2) * p, p))
    for i in range(2, n):
        beta = g[n - 1] * np.sum(g[:i - 1])
        alpha = 1.0 / (2.0 * np.sqrt(cache._get(cache.sigma, i, "sigma") * sig_n))
        M[(i - 2) * p:(i - 1) * p] = beta * alpha * cache._get(cache.C, (i, n), "C")
    Md = np.vstack([M, np.zeros((p, p))])
    Mt = np.vstack([np.zeros((p, p)), M])
    Ct = np.zeros((n * p, n * p))
    Ct[:(n - 1) * p, (n - 2) * p:(n - 1) * p] = Md - Mt
    Ct[:(n - 1) * p, (n - 1) * p:] = Mt - Md
    return H + Ct + Ct.T


@dataclass
class HnMatrix:
    H: np.ndarray
    gamma: np.ndarray

    def min_eig(self):
        return float(np.linalg.eigvalsh(self.H)[0])

    def is_psd(self, rtol=PSD_RTOL):
        w = np.linalg.eigvalsh(self.H)
        scale = np.max(np.abs(w)) if w.size else 0.0
        return bool(w[0] >= -rtol * scale)


def build_H(n, gamma, cache: ResidualCache) -> HnMatrix:
    """Inner factor of the residual of ``sum_i gamma_i X_i`` over ``[R_1 ... R_n]``."""
    g = _as_gamma(gamma)
    if len(g) != n:
        raise ValueError(f"{len(g)} weights for n={n}")
    if n < 1 or n > cache.n:
        raise IncompleteCache(f"cache holds {cache.n} iterates, need {n}")
    if abs(g.sum() - 1.0) > 1e-12 * max(1.0, np.abs(g).sum()):
        raise ValueError("weights must sum to one")
    H = _build(n, g, cache)
    return HnMatrix(0.5 * (H + H.T), g)


def factored_residual(cache: ResidualCache, gamma):
    """Dense ``[R_1 ... R_n] H_n [R_1 ... R_n]^T`` (small problems only)."""
    g = _as_gamma(gamma)
    R = np.hstack(cache.R[:len(g)])
    return R @ build_H(len(g), g, cache).H @ R.T


def _require_psd_T(T):
    w = np.linalg.eigvalsh(0.5 * (T + T.T))
    if w[0] < -1e-12 * max(1.0, np.max(np.abs(w))):
        raise PrerequisiteViolated(f"inner residual factor T is indefinite (min eig {w[0]:.3e})")


def in_box(gamma, slack=BOX_SLACK):
    g = _as_gamma(gamma)
    return bool(np.all((g >= -slack) & (g <= 1 + slack)))


def on_box_boundary(gamma, slack=BOX_SLACK):
    g = _as_gamma(gamma)
    return bool(np.any((np.abs(g) <= slack) | (np.abs(g - 1) <= slack)))


H2_SWEEP = (-0.5, -0.1, 0.0, 0.25, 0.5, 0.75, 1.0, 1.1, 1.5)


def h2_psd_test(gamma2, cache: ResidualCache):
    """PSD classification of ``H_2`` at each ``gamma_2`` (``gamma_1 = 1 - gamma_2``)."""
    _require_psd_T(cache.T)
    scalar = np.ndim(gamma2) == 0
    out = [build_H(2, [1.0 - g2, g2], cache).is_psd() for g2 in np.atleast_1d(gamma2)]
    return out[0] if scalar else out


@dataclass
class ProbeReport:
    n: int
    points: List[tuple]  # (gamma, min eigenvalue, psd, inside box)

    @property
    def agreement(self):
        hits = sum(psd == inside for _, _, psd, inside in self.points)
        return hits / len(self.points)

    def disagreements(self):
        return [pt for pt in self.points if pt[2] != pt[3]]


def simplex_grid(n, density, lo=-0.5, hi=1.5):
    """Points of the affine plane ``sum gamma = 1`` on a regular grid.

    The first ``n - 1`` coordinates range over ``density`` values in
    ``[lo, hi]``; the last one is fixed by the constraint.
    """
    axis = np.linspace(lo, hi, density)
    grids = np.meshgrid(*([axis] * (n - 1)), indexing="ij")
    head = np.column_stack([g.ravel() for g in grids])
    return np.column_stack([head, 1.0 - head.sum(axis=1)])


def conjecture_probe(n, cache: ResidualCache, grid_density=21, lo=-0.5, hi=1.5) -> ProbeReport:
    """Compare PSD-ness of ``H_n`` with the box ``0 <= gamma_i <= 1`` over a grid."""
    if n not in (2, 3):
        raise ValueError("the probe is defined for n in {2, 3}")
    _require_psd_T(cache.T)
    points = []
    for g in simplex_grid(n, grid_density, lo, hi):
        Hn = build_H(n, g, cache)
        points.append((tuple(g), Hn.min_eig(), Hn.is_psd(), in_box(g)))
    return ProbeReport(n, points)


def auxiliary_identity_gap(prob, seq, Rs, T, k):
    """Relative mismatch of the increment identity behind the factorization.

    Checks, densely, that

        A^T V_k Y_k^{-1} V_k^T E = R_{k-1} T (R_k - R_{k-1})^T
            + E^T X_{k-1} B H^{-1} B^T V_k Y_k^{-1} V_k^T E
            - sigma E^T V_k Y_k^{-1} V_k^T E

    for iterate ``k`` of ``seq`` (``k >= 2``).
    """
    E, A, B, _, _ = prob.dense()
    inc = seq.increments[k - 2]
    V, Yinv, s = inc.V, np.linalg.inv(inc.Y), inc.sigma
    Xprev = seq.iterate(k - 1).to_dense()
    VYVE = V @ Yinv @ V.T @ E
    lhs = A.T @ VYVE
    rhs = (Rs[k - 2] @ T @ (Rs[k - 1] - Rs[k - 2]).T
           + E.T @ Xprev @ B @ prob.Hinv @ B.T @ VYVE
           - s * E.T @ VYVE)
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), 1e-300))
