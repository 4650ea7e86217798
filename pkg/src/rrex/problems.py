"""Benchmark problems: the SOR study, Toeplitz and triple-chain Riccati equations.

All generators are deterministic functions of their arguments.  Random
coefficients come from :func:`gaussian`, a Box-Muller transform on top of
numpy's Philox counter-based generator.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as spla
import scipy.sparse as sp

from .errors import UnstableProblem
from .extrapolation import FixedPointMap
from .radi import AreProblem

logger = logging.getLogger(__name__)

DENSE_STABILITY_LIMIT = 500


def gaussian(shape, seed):
    """Standard normal samples from Philox(seed) uniforms via Box-Muller."""
    size = int(np.prod(shape))
    rng = np.random.Generator(np.random.Philox(seed))
    m = (size + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1]
    u2 = rng.random(m)
    rad = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([rad * np.cos(2 * np.pi * u2), rad * np.sin(2 * np.pi * u2)])
    return z[:size].reshape(shape)


@dataclass
class SorStudy:
    A: np.ndarray
    b: np.ndarray
    omega: Callable[[int], float]
    mode: str

    @property
    def x_star(self):
        return np.linalg.solve(self.A, self.b)

    def splitting(self, i):
        """``(M_i, N_i)`` with ``A = M_i - N_i``."""
        w = self.omega(i)
        D = np.diag(np.diag(self.A))
        L = np.tril(self.A, -1)
        U = np.triu(self.A, 1)
        return D / w + L, (1.0 / w - 1.0) * D - U


def sor_matrix(d=20):
    return (np.diag(np.full(d, 0.1)) + np.diag(np.full(d - 1, 0.05), 1)
            + np.diag(np.full(d - 1, 0.05), -1))


def make_sor_study(mode="stationary", d=20):
    """SOR fixed-point map for the tridiagonal test system and its residual.

    Returns ``(FixedPointMap, SorStudy)``; start from ``x_1 = 0``.
    """
    if mode == "stationary":
        def omega(i):
            return 0.5
    elif mode == "nonstationary":
        def omega(i):
            return 0.5 + 0.1 * np.sin(0.02 * np.pi * i)
    else:
        raise ValueError(f"unknown SOR mode {mode!r}")
    A = sor_matrix(d)
    b = A @ np.ones(d)
    b /= np.linalg.norm(b)
    study = SorStudy(A, b, omega, mode)

    def apply(i, x):
        M, N = study.splitting(i)
        return spla.solve_triangular(M, N @ x + b, lower=True)

    def residual(x):
        return b - A @ x

    return FixedPointMap(apply, residual), study


def toeplitz_matrix(d):
    """The banded Toeplitz stencil as printed: 2.8 on the diagonal, -1 below,
    three superdiagonals of ones."""
    offsets = [-1, 0, 1, 2, 3]
    vals = [-1.0, 2.8, 1.0, 1.0, 1.0]
    diags = [np.full(d - abs(k), v) for k, v in zip(offsets, vals)]
    return sp.diags(diags, offsets, shape=(d, d), format="csr")


def _certainly_unstable(A):
    """Gershgorin on the symmetric part: all of it right of zero means the
    field of values, hence the spectrum, lies in the right half plane."""
    S = 0.5 * (A + A.T).tocsr()
    diag = S.diagonal()
    off = np.asarray(abs(S).sum(axis=1)).ravel() - np.abs(diag)
    return bool(np.all(diag - off > 0))


def _certainly_stable(A):
    S = 0.5 * (A + A.T).tocsr()
    diag = S.diagonal()
    off = np.asarray(abs(S).sum(axis=1)).ravel() - np.abs(diag)
    return bool(np.all(diag + off < 0))


def stabilize(A, auto_negate=True, name="A"):
    """Return ``A`` or ``-A``, whichever has its spectrum in the left half plane."""
    d = A.shape[0]
    if d <= DENSE_STABILITY_LIMIT:
        unstable = np.max(np.linalg.eigvals(A.toarray()).real) >= 0
    elif _certainly_stable(A):
        unstable = False
    else:
        unstable = _certainly_unstable(A)
        if not unstable:
            logger.warning("stability of %s (d=%d) is not certified", name, d)
    if not unstable:
        return A
    if not auto_negate:
        raise UnstableProblem(f"{name} has eigenvalues in the closed right half plane")
    logger.info("%s (d=%d) is unstable as printed; using -%s", name, d, name)
    return -A


def make_toeplitz(d, q=5, variant="are", seed=1, p=5, lam=1e-4, auto_negate=True):
    """Toeplitz Riccati benchmark with Gaussian ``B`` (``||B||_2 = 1``) and ``C``."""
    if d < 10:
        raise ValueError("Toeplitz benchmark needs d >= 10")
    if variant not in ("are", "lyapunov"):
        raise ValueError(f"unknown variant {variant!r}")
    A = stabilize(toeplitz_matrix(d), auto_negate, "Toeplitz A")
    G = gaussian((d * p + q * d,), seed)
    B = G[:d * p].reshape(d, p)
    B /= np.linalg.norm(B, 2)
    C = G[d * p:].reshape(q, d)
    if variant == "lyapunov":
        B = np.zeros((d, p))
    return AreProblem(A, B, C, None, lam, name=f"toeplitz-{variant}-d{d}-q{q}")


TRIPLE_CHAIN_MASSES = (10.0, 1.0, 2.0, 3.0)     # m0, m1, m2, m3
TRIPLE_CHAIN_STIFFNESS = (50.0, 10.0, 20.0, 1.0)  # k0, k1, k2, k3


def triple_chain_matrices(masses_per_chain, alpha=0.1, beta=0.1, nu=5.0):
    """Second-order ``(M, C_damp, K)`` of three chains joined at a heavy mass.

    Chain ``j`` has ``masses_per_chain`` masses ``m_j``, is tied to the
    ground through ``k_j`` at its first mass and to the coupling mass ``m0``
    through ``k_j`` at its last.  ``m0`` is grounded through ``k0``.  The
    damping is Rayleigh ``alpha M + beta K`` plus ``nu`` at each chain's
    grounded mass.  The coupling mass is the last coordinate.
    """
    n = int(masses_per_chain)
    if n < 1:
        raise ValueError("need at least one mass per chain")
    m0, *ms = TRIPLE_CHAIN_MASSES
    k0, *ks = TRIPLE_CHAIN_STIFFNESS
    N = 3 * n + 1
    mass = np.concatenate([np.full(n, m) for m in ms] + [[m0]])
    K = sp.lil_matrix((N, N))
    for j, k in enumerate(ks):
        off = j * n
        for i in range(n):
            K[off + i, off + i] += 2 * k
            if i + 1 < n:
                K[off + i, off + i + 1] -= k
                K[off + i + 1, off + i] -= k
        K[off + n - 1, N - 1] -= k
        K[N - 1, off + n - 1] -= k
        K[N - 1, N - 1] += k
    K[N - 1, N - 1] += k0
    K = K.tocsr()
    M = sp.diags(mass, format="csr")
    ground = np.zeros(N)
    ground[[0, n, 2 * n]] = nu
    Cd = (alpha * M + beta * K + sp.diags(ground)).tocsr()
    return M, Cd, K


def perfect_shuffle(N):
    """Permutation ``(0, N, 1, N + 1, ...)`` interleaving two halves of length ``N``."""
    return np.column_stack([np.arange(N), np.arange(N, 2 * N)]).ravel()


def make_triple_chain(masses_per_chain, lam=1.0, alpha=0.1, beta=0.1, nu=5.0, shuffle=True):
    """First-order triple-chain Riccati problem with a single input and output.

    ``E = [[-K, 0], [0, M]]``, ``A = [[0, -K], [-K, -C_damp]]``,
    ``B = [0; 1]`` and ``C = [1, 0]`` (all-ones force input and position
    output), then the perfect shuffle is applied.
    """
    M, Cd, K = triple_chain_matrices(masses_per_chain, alpha, beta, nu)
    N = M.shape[0]
    Z = None
    E = sp.bmat([[-K, Z], [Z, M]], format="csr")
    A = sp.bmat([[sp.csr_matrix((N, N)), -K], [-K, -Cd]], format="csr")
    B = np.concatenate([np.zeros(N), np.ones(N)])[:, None]
    C = np.concatenate([np.ones(N), np.zeros(N)])[None, :]
    if shuffle:
        perm = perfect_shuffle(N)
        E = E[perm][:, perm]
        A = A[perm][:, perm]
        B = B[perm]
        C = C[:, perm]
    return AreProblem(A, B, C, E, lam, name=f"triple-chain-{masses_per_chain}")


def gramian_problem(E, A, B, C, variant):
    """Lyapunov problem for a Gramian, in the Riccati residual convention.

    ``controllability`` solves ``A P E^T + E P A^T + B B^T = 0`` by
    transposing the pencil; ``observability`` solves
    ``A^T Q E + E^T Q A + C^T C = 0``.
    """
    E = sp.identity(A.shape[0], format="csr") if E is None else sp.csr_matrix(E)
    A = sp.csr_matrix(A)
    if variant == "controllability":
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        return AreProblem(A.T, np.zeros((A.shape[0], 1)), B.T, E.T, 1.0,
                          name="controllability-gramian")
    if variant == "observability":
        return AreProblem(A, np.zeros((A.shape[0], 1)), C, E, 1.0,
                          name="observability-gramian")
    raise ValueError(f"unknown gramian variant {variant!r}")


def random_stable_are(d, p, q, seed, lam=1.0, lyapunov=False, general_E=True):
    """Small dense random Riccati problem with a stable pencil ``(A, E)``."""
    rng = np.random.default_rng(seed)
    E = np.eye(d)
    if general_E:
        F = rng.standard_normal((d, d)) / np.sqrt(d)
        E = np.eye(d) + 0.5 * (F @ F.T)
    A0 = rng.standard_normal((d, d)) / np.sqrt(d)
    shift = np.max(np.linalg.eigvals(A0).real) + 0.5 + rng.random()
    A = (A0 - shift * np.eye(d)) @ E  # spectrum of (A, E) is that of A0 - shift I
    B = np.zeros((d, p)) if lyapunov else rng.standard_normal((d, p))
    C = rng.standard_normal((q, d))
    return AreProblem(A, B, C, E, lam, name=f"random-{d}-{p}-{q}-{seed}")


@dataclass
class BenchmarkSpec:
    kind: str
    d: Optional[int] = None
    p: int = 5
    q: int = 5
    lam: float = 1e-4
    lyapunov: bool = False
    gramian: Optional[str] = None
    seed: int = 1
    paths: Optional[dict] = None

    def build(self) -> AreProblem:
        if self.kind == "toeplitz":
            return make_toeplitz(self.d, self.q, "lyapunov" if self.lyapunov else "are",
                                 self.seed, self.p, self.lam)
        if self.kind == "triple_chain":
            masses = max(1, (self.d // 2 - 1) // 3)
            return make_triple_chain(masses, self.lam)
        if self.kind == "mm_files":
            from .mmio import load_problem
            return load_problem(self.paths, self.lam, self.gramian, self.lyapunov)
        raise ValueError(f"unknown benchmark kind {self.kind!r}")
