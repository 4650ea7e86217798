"""Desk-scale property suites, run by ``rrex verify <suite>``.

Each suite returns a list of :class:`Check` records.  Instances are generated
from fixed seeds so a failure can be reproduced from the printed parameters.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from .errors import DegenerateInput
from .extrapolation import rre_delta, rre_weights
from .lowrank import (Increment, IncrementSequence, LowRankSym, assemble_extrapolant,
                      lowrank_rre_delta, projected_norm, sym_vec)
from .oracle import dense_are_solve, relative_error
from .problems import random_stable_are
from .radi import AreProblem, ShiftStrategy, init_state, radi_step, select_shift
from .residual_algebra import (H2_SWEEP, ResidualCache, build_H, conjecture_probe,
                               h2_psd_test, in_box, on_box_boundary)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}" + (
            f"  [{self.detail}]" if self.detail else "")


def kkt_weights(U):
    """Weights from the bordered system ``[2 U^T U, 1; 1^T, 0]``."""
    n = U.shape[1]
    K = np.zeros((n + 1, n + 1))
    K[:n, :n] = 2 * U.T @ U
    K[:n, n] = K[n, :n] = 1.0
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    return np.linalg.solve(K, rhs)[:n]


def radi_window(prob: AreProblem, steps, strat=None):
    """Run ``steps`` RADI steps from zero; return ``(state, residual factors)``."""
    strat = strat or ShiftStrategy()
    state = init_state(prob)
    Rs = [state.R]
    for _ in range(steps):
        radi_step(prob, state, select_shift(prob, state, strat))
        Rs.append(state.R)
    return state, Rs


def random_weights(rng, n):
    g = rng.standard_normal(n)
    return np.append(g[:-1], 1.0 - g[:-1].sum())


def linear_process(rng, d, n, k):
    """``n + 1`` iterates of ``x -> x* + J (x - x*)`` with ``J`` of rank ``k``.

    ``J`` is symmetric with ``k`` distinct eigenvalues in ``(-0.9, 0.9)`` and
    the initial error has a component along each of its eigenvectors.
    """
    Q = np.linalg.qr(rng.standard_normal((d, d)))[0][:, :k]
    lam = np.linspace(-0.9, 0.9, k + 2)[1:-1] + rng.uniform(-0.05, 0.05, k)
    J = Q @ np.diag(lam) @ Q.T
    xstar = rng.standard_normal(d)
    xs = [xstar + Q @ (1.0 + rng.random(k))]
    for _ in range(n):
        xs.append(xstar + J @ (xs[-1] - xstar))
    return xs, xstar


def _worst(name, values, tol, fmt="{:.2e}"):
    worst = max(values) if values else 0.0
    return Check(name, worst <= tol, f"worst {fmt.format(worst)} vs {tol:g}")


def suite_rre(seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    g = rre_weights(np.array([[1.0, 0.0], [0.0, 2.0]])).gamma
    checks.append(Check("weights of diag(1, 2) are (0.8, 0.2)",
                        np.allclose(g, [0.8, 0.2], atol=1e-14, rtol=0), f"got {g}"))
    errs = []
    for _ in range(100):
        d, n = rng.integers(9, 51), rng.integers(1, 9)
        U = rng.standard_normal((d, n))
        errs.append(np.max(np.abs(rre_weights(U).gamma - kkt_weights(U))))
    checks.append(_worst("weights match bordered KKT solve (100 instances)", errs, 1e-10))

    errs = []
    for _ in range(20):
        d, n = rng.integers(6, 51), rng.integers(2, 7)
        xs, xstar = linear_process(rng, d, n, n - 1)
        errs.append(np.linalg.norm(rre_delta(xs) - xstar) / np.linalg.norm(xstar))
    checks.append(_worst("n-term extrapolant is exact when the error spans n-1 "
                        "eigendirections", errs, 1e-10))

    ok = False
    try:
        rre_delta([np.ones(3)] * 3)
    except DegenerateInput:
        ok = True
    checks.append(Check("constant sequence raises DegenerateInput", ok))
    return checks


def random_increment_sequence(rng, d, n, width):
    Z0 = rng.standard_normal((d, width))
    base = LowRankSym(Z0, np.diag(rng.uniform(0.5, 2.0, width)))
    incs = []
    for _ in range(n):
        V = rng.standard_normal((d, width))
        S = rng.standard_normal((width, width))
        incs.append(Increment(V, S + S.T))
    return IncrementSequence(base, incs)


def suite_lowrank(seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    fro, spec = [], []
    for _ in range(100):
        d, k = rng.integers(2, 301), rng.integers(1, 11)
        R = rng.standard_normal((d, k))
        T = rng.standard_normal((k, k))
        T = T + T.T
        M = R @ T @ R.T
        fro.append(abs(projected_norm(R, T) - np.linalg.norm(M)) / np.linalg.norm(M))
        spec.append(abs(projected_norm(R, T, "spectral") - np.linalg.norm(M, 2))
                    / np.linalg.norm(M, 2))
    checks.append(_worst("projected Frobenius norm equals dense norm", fro, 1e-12))
    checks.append(_worst("projected spectral norm equals dense norm", spec, 1e-12))

    iso = []
    for _ in range(100):
        k = rng.integers(1, 8)
        S = rng.standard_normal((k, k))
        S = S + S.T
        iso.append(abs(np.linalg.norm(sym_vec(S)) - np.linalg.norm(S)) / np.linalg.norm(S))
    checks.append(_worst("sym_vec is an isometry", iso, 1e-13))

    wdiff, adiff = [], []
    for _ in range(50):
        d, n, w = rng.integers(8, 41), rng.integers(1, 5), rng.integers(1, 3)
        seq = random_increment_sequence(rng, d, n, w)
        weights, Xhat = lowrank_rre_delta(seq)
        dense = [seq.iterate(k).to_dense() for k in range(1, n + 2)]
        U = np.column_stack([(dense[k + 1] - dense[k]).ravel() for k in range(n)])
        wdiff.append(np.max(np.abs(weights.gamma - rre_weights(U).gamma)))
        ref = sum(g * X for g, X in zip(weights.gamma, dense[:n]))
        adiff.append(np.linalg.norm(Xhat.to_dense() - ref) / max(np.linalg.norm(ref), 1e-300))
    checks.append(_worst("low-rank weights match dense vectorized weights", wdiff, 1e-10))
    checks.append(_worst("assembled extrapolant matches dense sum", adiff, 1e-12))
    return checks


def suite_radi(seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    errs = []
    for k in range(20):
        prob = random_stable_are(int(rng.integers(10, 31)), int(rng.integers(1, 4)),
                                 int(rng.integers(1, 4)), seed=1000 * seed + k,
                                 lam=float(rng.uniform(0.1, 2.0)))
        strat = ShiftStrategy()
        state = init_state(prob)
        scale = np.linalg.norm(prob.C.T @ prob.C)  # the residual may reach roundoff
        for _ in range(15):
            radi_step(prob, state, select_shift(prob, state, strat))
            D = prob.residual_dense(state.iterate().to_dense())
            F = state.R @ state.T @ state.R.T
            errs.append(np.linalg.norm(D - F) / scale)
    checks.append(_worst("dense residual equals R T R^T after every step", errs, 1e-10))

    errs = []
    for k in range(10):
        prob = random_stable_are(20, 2, 2, seed=2000 + k, lyapunov=True)
        state = init_state(prob)
        E, A, _, _, _ = prob.dense()
        R, T = state.R.copy(), state.T.copy()
        sigma = -float(rng.uniform(0.5, 5.0))
        radi_step(prob, state, sigma)
        V = np.sqrt(-2 * sigma) * np.linalg.solve(A.T + sigma * E.T, R @ T)
        errs.append(np.linalg.norm(state.seq.increments[-1].V - V) / np.linalg.norm(V))
    checks.append(_worst("B = 0 step equals the ADI increment", errs, 1e-12))

    strat = ShiftStrategy("fixed_list", [-1.0, -2.0])
    prob = random_stable_are(6, 1, 1, seed=1)
    state = init_state(prob)
    got = [select_shift(prob, state, strat) for _ in range(3)]
    checks.append(Check("fixed_list shifts cycle", got == [-1.0, -2.0, -1.0], f"got {got}"))

    inside = True
    for k in range(5):
        prob = random_stable_are(15, 2, 2, seed=3000 + k)
        strat = ShiftStrategy(lo=-10.0, hi=-0.1)
        state = init_state(prob)
        for _ in range(6):
            s = select_shift(prob, state, strat)
            inside &= -10.0 <= s <= -0.1
            radi_step(prob, state, s)
    checks.append(Check("shifts respect the clamping interval", inside))
    return checks


def suite_theorem1(seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    for n in (2, 3, 4, 5):
        errs = []
        for k in range(4):
            prob = random_stable_are(int(rng.integers(10, 41)), int(rng.integers(1, 4)),
                                     int(rng.integers(1, 4)), seed=100 * n + k + 10000 * seed,
                                     lam=float(rng.uniform(0.2, 2.0)))
            state, Rs = radi_window(prob, n - 1 + k % 2)
            start = len(state.seq) - n + 1
            window = state.seq.window(start)
            cache = ResidualCache.from_window(prob, window, Rs[start - 1:], state.T)
            for _ in range(5):
                g = random_weights(rng, n)
                X = assemble_extrapolant(window, g)
                D = prob.residual_dense(X.to_dense())
                R = np.hstack(Rs[start - 1:])
                F = R @ build_H(n, g, cache).H @ R.T
                errs.append(np.linalg.norm(D - F) / np.linalg.norm(D))
        checks.append(_worst(f"factored residual equals dense residual, n={n}", errs, 1e-9))
    return checks


def suite_theorem2(seed=0, instances=10):
    checks = []
    mismatches = []
    for k in range(instances):
        prob = random_stable_are(12, 2, 2, seed=500 + k + 10000 * seed, lam=0.5)
        state, Rs = radi_window(prob, 1)
        cache = ResidualCache.from_window(prob, state.seq, Rs, state.T)
        for g2, psd in zip(H2_SWEEP, h2_psd_test(list(H2_SWEEP), cache)):
            g = [1.0 - g2, g2]
            if not on_box_boundary(g) and psd != in_box(g):
                mismatches.append((500 + k, g2, psd))
    checks.append(Check("H_2 is PSD exactly when 0 <= gamma <= 1", not mismatches,
                        f"mismatches {mismatches}" if mismatches else f"{instances} instances"))

    rates = []
    for k in range(5):
        prob = random_stable_are(12, 2, 2, seed=700 + k + 10000 * seed, lam=0.5)
        state, Rs = radi_window(prob, 2)
        cache = ResidualCache.from_window(prob, state.seq, Rs, state.T)
        rates.append(conjecture_probe(3, cache).agreement)
    checks.append(Check("n=3 PSD pattern agrees with the box on >= 99% of the grid",
                        min(rates) >= 0.99, f"rates {[round(r, 4) for r in rates]}"))
    return checks


def suite_oracle(seed=0):
    checks = []
    sol = dense_are_solve(AreProblem([[-1.0]], [[1.0]], [[1.0]], None, 1.0))
    x = float(sol.X[0, 0])
    checks.append(Check("scalar Riccati root is sqrt(2) - 1",
                        abs(x - (np.sqrt(2) - 1)) <= 1e-12, f"got {x!r}"))
    sol = dense_are_solve(AreProblem([[-1.0]], [[0.0]], [[1.0]], None, 1.0))
    x = float(sol.X[0, 0])
    checks.append(Check("scalar Lyapunov solution is 0.5", abs(x - 0.5) <= 1e-12, f"got {x!r}"))

    from .extrapolation import DriverConfig
    from .radi import radi_solve
    errs = []
    for k in range(3):
        prob = random_stable_are(30, 2, 2, seed=900 + k + 10000 * seed, lam=0.5)
        ref = dense_are_solve(prob)
        res = radi_solve(prob, DriverConfig(mode="plain", tol=1e-12, max_iters=400))
        errs.append(relative_error(ref.X, res.solution))
    checks.append(_worst("oracle agrees with RADI on d=30 problems", errs, 1e-8))
    return checks


SUITES: Dict[str, Callable[..., List[Check]]] = {
    "rre": suite_rre,
    "lowrank": suite_lowrank,
    "radi": suite_radi,
    "theorem1": suite_theorem1,
    "theorem2": suite_theorem2,
    "oracle": suite_oracle,
}


def run_suite(name, seed=0) -> List[Check]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](seed=seed)
