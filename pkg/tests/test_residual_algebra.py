import numpy as np
import pytest

from rrex.errors import IncompleteCache, PrerequisiteViolated
from rrex.lowrank import assemble_extrapolant
from rrex.problems import random_stable_are
from rrex.residual_algebra import (ResidualCache, auxiliary_identity_gap, build_H,
                                   conjecture_probe, factored_residual, h2_psd_test,
                                   simplex_grid)
from rrex.verify import radi_window, random_weights


def window_cache(prob, n):
    state, Rs = radi_window(prob, n - 1)
    return state, Rs, ResidualCache.from_window(prob, state.seq, Rs, state.T)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_unit_first_weight_gives_first_residual():
    prob = random_stable_are(15, 2, 2, seed=1)
    state, Rs, cache = window_cache(prob, 2)
    H = build_H(2, [1.0, 0.0], cache).H
    p = cache.p
    np.testing.assert_allclose(H[:p, :p], cache.T, atol=1e-14)
    np.testing.assert_allclose(H[p:, :], 0.0, atol=1e-14)
    np.testing.assert_allclose(factored_residual(cache, [1.0, 0.0]), Rs[0] @ cache.T @ Rs[0].T,
                               atol=1e-13)


@pytest.mark.parametrize("n,tol", [(2, 1e-10), (3, 1e-9), (4, 1e-9), (5, 1e-9)])
def test_factorization_matches_dense(n, tol):
    rng = np.random.default_rng(n)
    for k in range(3):
        prob = random_stable_are(int(rng.integers(10, 41)), int(rng.integers(1, 4)),
                                 int(rng.integers(1, 4)), seed=50 * n + k,
                                 lam=float(rng.uniform(0.2, 2.0)))
        state, Rs, cache = window_cache(prob, n)
        for _ in range(5):
            g = random_weights(rng, n)
            D = prob.residual_dense(assemble_extrapolant(state.seq, g).to_dense())
            assert rel(factored_residual(cache, g), D) <= tol
            H = build_H(n, g, cache).H
            assert np.linalg.norm(H - H.T) <= 1e-12 * np.linalg.norm(H)


def test_lyapunov_couplings_vanish():
    prob = random_stable_are(20, 2, 2, seed=3, lyapunov=True)
    state, Rs, cache = window_cache(prob, 4)
    assert all(np.all(C == 0) for C in cache.C.values())
    g = [0.1, 0.2, 0.3, 0.4]
    D = prob.residual_dense(assemble_extrapolant(state.seq, g).to_dense())
    assert rel(factored_residual(cache, g), D) <= 1e-9


def test_h2_examples():
    prob = random_stable_are(12, 2, 2, seed=5, lam=0.5)
    _, _, cache = window_cache(prob, 2)
    assert h2_psd_test(0.0, cache) and h2_psd_test(1.0, cache)
    assert h2_psd_test(0.5, cache)
    assert not h2_psd_test(1.5, cache)
    assert h2_psd_test([0.25, -0.5], cache) == [True, False]


def _crossing(cache, inside, outside):
    for _ in range(60):
        mid = 0.5 * (inside + outside)
        if h2_psd_test(mid, cache):
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)


def test_h2_psd_boundary_at_zero_and_one():
    for seed in range(5):
        prob = random_stable_are(12, 2, 2, seed=20 + seed, lam=0.5)
        _, _, cache = window_cache(prob, 2)
        assert abs(_crossing(cache, 0.5, -0.5)) <= 1e-6
        assert abs(_crossing(cache, 0.5, 1.5) - 1.0) <= 1e-6


def test_probe_two_terms_agrees_everywhere():
    prob = random_stable_are(12, 2, 2, seed=6, lam=0.5)
    _, _, cache = window_cache(prob, 2)
    # with 40 points on [-0.5, 1.5] no grid point lies on the box boundary
    report = conjecture_probe(2, cache, grid_density=40)
    assert report.agreement == 1.0


def test_probe_three_terms():
    prob = random_stable_are(12, 2, 2, seed=7, lam=0.5)
    _, _, cache = window_cache(prob, 3)
    report = conjecture_probe(3, cache, grid_density=21)
    assert len(report.points) == 21 * 21
    assert report.agreement >= 0.99


def test_probe_rejects_other_sizes():
    prob = random_stable_are(8, 1, 1, seed=1)
    _, _, cache = window_cache(prob, 2)
    with pytest.raises(ValueError):
        conjecture_probe(4, cache)


def test_indefinite_inner_factor_rejected():
    prob = random_stable_are(8, 1, 2, seed=1)
    _, _, cache = window_cache(prob, 2)
    cache.T = np.diag([1.0, -1.0])
    with pytest.raises(PrerequisiteViolated):
        h2_psd_test(0.5, cache)


def test_incomplete_cache():
    prob = random_stable_are(8, 1, 1, seed=2)
    _, _, cache = window_cache(prob, 3)
    del cache.Y[3]
    with pytest.raises(IncompleteCache):
        build_H(3, [0.2, 0.3, 0.5], cache)
    with pytest.raises(IncompleteCache):
        build_H(4, [0.25] * 4, cache)


def test_weights_must_sum_to_one():
    prob = random_stable_are(8, 1, 1, seed=2)
    _, _, cache = window_cache(prob, 2)
    with pytest.raises(ValueError):
        build_H(2, [0.5, 0.6], cache)


def test_simplex_grid():
    G = simplex_grid(3, 5)
    assert G.shape == (25, 3)
    np.testing.assert_allclose(G.sum(axis=1), 1.0)


def test_increment_identity():
    for seed in range(4):
        prob = random_stable_are(15, 2, 2, seed=30 + seed)
        state, Rs = radi_window(prob, 4)
        for k in range(2, 6):
            assert auxiliary_identity_gap(prob, state.seq, Rs, state.T, k) <= 1e-10
