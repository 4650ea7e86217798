import numpy as np
import pytest

from rrex.errors import UnstableProblem
from rrex.problems import (TRIPLE_CHAIN_MASSES, BenchmarkSpec, gaussian, gramian_problem,
                           make_sor_study, make_toeplitz, make_triple_chain, perfect_shuffle,
                           random_stable_are, sor_matrix, stabilize, toeplitz_matrix,
                           triple_chain_matrices)


def test_sor_matrix_entries():
    A = sor_matrix()
    assert A.shape == (20, 20)
    assert (A[0, 0], A[0, 1], A[1, 0]) == (0.1, 0.05, 0.05)


def test_sor_right_hand_side_normalized():
    _, study = make_sor_study("stationary")
    np.testing.assert_allclose(study.b, study.A @ np.ones(20) / np.linalg.norm(study.A @ np.ones(20)))


def test_sor_omega_schedules():
    _, st = make_sor_study("stationary")
    assert all(st.omega(i) == 0.5 for i in range(1, 50))
    _, ns = make_sor_study("nonstationary")
    assert ns.omega(25) == pytest.approx(0.5 + 0.1 * np.sin(0.5 * np.pi))
    assert all(0 < ns.omega(i) < 2 for i in range(1, 500))


@pytest.mark.parametrize("mode", ["stationary", "nonstationary"])
def test_solution_is_fixed_point(mode):
    fmap, study = make_sor_study(mode)
    x = study.x_star
    for i in (1, 7, 33):
        np.testing.assert_allclose(fmap.apply(i, x), x, atol=1e-13)
        M, N = study.splitting(i)
        np.testing.assert_allclose(M - N, study.A, atol=1e-15)


def test_sor_unknown_mode():
    with pytest.raises(ValueError):
        make_sor_study("fast")


def test_toeplitz_stencil_rows():
    A = toeplitz_matrix(100).toarray()
    np.testing.assert_array_equal(A[0, :6], [2.8, 1, 1, 1, 0, 0])
    np.testing.assert_array_equal(A[1, :7], [-1, 2.8, 1, 1, 1, 0, 0])


def test_toeplitz_nnz():
    assert toeplitz_matrix(100).nnz == 493


@pytest.mark.parametrize("d", [100, 500])
def test_toeplitz_emitted_matrix_is_stable(d):
    prob = make_toeplitz(d)
    assert np.max(np.linalg.eigvals(prob.A.toarray()).real) < 0
    # the printed orientation is unstable and gets negated
    np.testing.assert_array_equal(prob.A.toarray(), -toeplitz_matrix(d).toarray())


def test_toeplitz_without_negation_fails():
    with pytest.raises(UnstableProblem):
        make_toeplitz(50, auto_negate=False)


def test_toeplitz_large_uses_gershgorin():
    A = stabilize(toeplitz_matrix(800), True)
    assert A[0, 0] == -2.8


def test_toeplitz_shapes_and_scaling():
    prob = make_toeplitz(60, q=4, seed=3)
    assert prob.B.shape == (60, 5) and prob.C.shape == (4, 60)
    assert np.linalg.norm(prob.B, 2) == pytest.approx(1.0)
    np.testing.assert_allclose(prob.H, 1e-4 * np.eye(5))
    assert not np.any(make_toeplitz(60, variant="lyapunov").B)


def test_toeplitz_determinism():
    a, b = make_toeplitz(80, seed=7), make_toeplitz(80, seed=7)
    assert np.array_equal(a.B, b.B) and np.array_equal(a.C, b.C)
    assert not np.array_equal(a.C, make_toeplitz(80, seed=8).C)


def test_toeplitz_validation():
    with pytest.raises(ValueError):
        make_toeplitz(5)
    with pytest.raises(ValueError):
        make_toeplitz(50, variant="dae")


def test_gaussian_moments():
    z = gaussian((200000,), 1)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01
    assert np.array_equal(gaussian((3, 4), 9), gaussian((3, 4), 9))
    assert gaussian((7,), 2).shape == (7,)


def test_triple_chain_one_mass():
    prob = make_triple_chain(1)
    assert prob.d == 8 and prob.p == 1 and prob.q == 1


def test_triple_chain_mass_and_stiffness():
    M, Cd, K = triple_chain_matrices(4)
    m = M.diagonal()
    assert set(m) <= set(TRIPLE_CHAIN_MASSES)
    assert m[-1] == 10.0
    Kd = K.toarray()
    np.testing.assert_array_equal(Kd, Kd.T)
    np.linalg.cholesky(Kd)  # SPD
    assert np.all(np.linalg.eigvalsh(Cd.toarray()) > 0)


def test_triple_chain_is_stable_pencil():
    prob = make_triple_chain(3)
    E, A, _, _, _ = prob.dense()
    assert np.max(np.linalg.eigvals(np.linalg.solve(E, A)).real) < 0


def test_perfect_shuffle():
    np.testing.assert_array_equal(perfect_shuffle(3), [0, 3, 1, 4, 2, 5])


def test_shuffle_is_a_symmetric_permutation():
    a, b = make_triple_chain(2, shuffle=False), make_triple_chain(2)
    perm = perfect_shuffle(7)
    np.testing.assert_array_equal(b.A.toarray(), a.A.toarray()[np.ix_(perm, perm)])
    np.testing.assert_array_equal(b.E.toarray(), a.E.toarray()[np.ix_(perm, perm)])
    np.testing.assert_array_equal(b.B, a.B[perm])


def test_gramian_variants():
    prob = random_stable_are(10, 2, 3, seed=1)
    ctrl = gramian_problem(prob.E, prob.A, prob.B, prob.C, "controllability")
    obs = gramian_problem(prob.E, prob.A, prob.B, prob.C, "observability")
    assert ctrl.is_lyapunov and obs.is_lyapunov
    np.testing.assert_array_equal(ctrl.C, prob.B.T)
    np.testing.assert_array_equal(obs.C, prob.C)
    with pytest.raises(ValueError):
        gramian_problem(prob.E, prob.A, prob.B, prob.C, "hankel")


def test_benchmark_spec():
    assert BenchmarkSpec("toeplitz", d=40).build().d == 40
    assert BenchmarkSpec("triple_chain", d=302).build().d == 302
    with pytest.raises(ValueError):
        BenchmarkSpec("rail").build()
