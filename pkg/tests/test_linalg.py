import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from regret_control.errors import IllConditioned, NonStabilizable, UnstableF
from regret_control.linalg import (DareProblem, dare_residual, is_psd, lambda_max_product,
                                   psd_inv_sqrt, psd_sqrt, riccati_doubling, solve_dare,
                                   solve_dlyap, spectral_radius)


def scalar_dare(a, b, q, r):
    # b^2 P^2 + (r (1 - a^2) - q b^2) P - q r = 0, positive root
    c1 = r * (1 - a * a) - q * b * b
    return (-c1 + np.sqrt(c1 * c1 + 4 * b * b * q * r)) / (2 * b * b)


def random_dare(seed, n, m):
    g = np.random.default_rng(seed)
    A = g.standard_normal((n, n))
    A *= g.uniform(0.3, 1.5) / spectral_radius(A)
    B = g.standard_normal((n, m))
    L = g.standard_normal((n, n))
    Q = L @ L.T + 0.1 * np.eye(n)
    Lr = g.standard_normal((m, m))
    R = Lr @ Lr.T + 0.5 * np.eye(m)
    return A, B, Q, R


class TestScalarDare:
    def test_s1_value(self):
        P = solve_dare(DareProblem(0.5, 1.0, 1.0, 1.0))
        assert P[0, 0] == pytest.approx(1.13278, abs=5e-6)

    @given(st.floats(-1.8, 1.8), st.floats(0.2, 3.0), st.floats(0.1, 5.0), st.floats(0.1, 5.0))
    @settings(max_examples=60, deadline=None)
    def test_matches_quadratic_root(self, a, b, q, r):
        P = solve_dare(DareProblem(a, b, q, r))
        assert P[0, 0] == pytest.approx(scalar_dare(a, b, q, r), rel=1e-10)


@pytest.mark.parametrize("seed", range(12))
def test_dare_matches_scipy(seed):
    n, m = 1 + seed % 6, 1 + seed % 3
    A, B, Q, R = random_dare(seed, n, m)
    P = solve_dare(DareProblem(A, B, Q, R))
    P_ref = scipy.linalg.solve_discrete_are(A, B, Q, R)
    assert np.allclose(P, P_ref, rtol=1e-9, atol=1e-10 * np.abs(P_ref).max())
    assert dare_residual(A, B, Q, R, P) <= 1e-8 * max(1.0, np.linalg.norm(P))


def test_block_diagonal_decouples():
    A = np.diag([0.5, 1.3])
    B = np.eye(2)
    P = solve_dare(DareProblem(A, B, np.eye(2), np.eye(2)))
    assert P[0, 1] == pytest.approx(0.0, abs=1e-12)
    assert P[0, 0] == pytest.approx(scalar_dare(0.5, 1, 1, 1), rel=1e-12)
    assert P[1, 1] == pytest.approx(scalar_dare(1.3, 1, 1, 1), rel=1e-12)


def test_state_permutation_invariance():
    A, B, Q, R = random_dare(7, 5, 2)
    perm = np.array([3, 0, 4, 1, 2])
    E = np.eye(5)[perm]
    P = solve_dare(DareProblem(A, B, Q, R))
    P2 = solve_dare(DareProblem(E @ A @ E.T, E @ B, E @ Q @ E.T, R))
    assert np.allclose(E @ P @ E.T, P2, rtol=1e-10, atol=1e-12)


def test_unstabilizable_raises():
    with pytest.raises(NonStabilizable):
        solve_dare(DareProblem(2.0, 0.0, 1.0, 1.0))


def test_indefinite_weight_matches_scipy():
    # game Riccati with weight diag(R, -gamma^2 I) at a comfortably feasible level
    A, Bu, Q, R = random_dare(3, 3, 1)
    Bw = 0.3 * np.random.default_rng(3).standard_normal((3, 1))
    B = np.hstack([Bu, Bw])
    Rt = np.diag([R[0, 0], -100.0])
    P = riccati_doubling(A, B, Q, Rt)
    P_ref = scipy.linalg.solve_discrete_are(A, B, Q, Rt)
    assert np.allclose(P, P_ref, rtol=1e-8)


@pytest.mark.parametrize("bad", [
    dict(A=np.eye(2), B=np.ones((3, 1)), Q=np.eye(2), R=np.eye(1)),
    dict(A=np.eye(2), B=np.ones((2, 1)), Q=np.array([[1, 1], [0, 1.0]]), R=np.eye(1)),
    dict(A=np.eye(2), B=np.ones((2, 1)), Q=np.eye(2), R=-np.eye(1)),
])
def test_problem_validation(bad):
    with pytest.raises(ValueError):
        DareProblem(**bad)


class TestStein:
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_scipy(self, seed):
        g = np.random.default_rng(seed)
        n = 1 + seed
        F = g.standard_normal((n, n))
        F *= 0.95 / spectral_radius(F)
        L = g.standard_normal((n, n))
        W = L @ L.T
        X = solve_dlyap(F, W)
        assert np.allclose(X, scipy.linalg.solve_discrete_lyapunov(F, W), rtol=1e-9, atol=1e-11)

    def test_kronecker_equals_smith(self):
        g = np.random.default_rng(99)
        F = g.standard_normal((10, 10))
        F *= 0.9 / spectral_radius(F)
        W = g.standard_normal((10, 10))
        W = W @ W.T
        Xk = solve_dlyap(F, W, method="kronecker")
        Xs = solve_dlyap(F, W, method="smith")
        assert np.allclose(Xk, Xs, rtol=1e-10, atol=1e-12)

    def test_large_uses_squaring(self):
        g = np.random.default_rng(5)
        F = g.standard_normal((80, 80))
        F *= 0.8 / spectral_radius(F)
        W = np.eye(80)
        X = solve_dlyap(F, W)
        assert np.linalg.norm(X - F @ X @ F.T - W) <= 1e-9 * np.linalg.norm(X)

    def test_scalar_closed_form(self):
        # Z of the scalar example: F = A_K, W = 1 / (1 + P)
        P = scalar_dare(0.5, 1, 1, 1)
        A_K = 0.5 / (1 + P)
        X = solve_dlyap(A_K, 1 / (1 + P))
        assert X[0, 0] == pytest.approx((1 / (1 + P)) / (1 - A_K ** 2), rel=1e-13)
        assert X[0, 0] == pytest.approx(0.49614, abs=5e-6)

    def test_unstable_raises(self):
        with pytest.raises(UnstableF):
            solve_dlyap(np.array([[1.0]]), np.eye(1))

    def test_complex_data(self):
        F = np.array([[0.5j, 0.1], [0.0, -0.3]])
        W = np.eye(2)
        X = solve_dlyap(F, W)
        assert np.allclose(X, F @ X @ F.conj().T + W, atol=1e-13)


@given(st.integers(0, 10_000), st.integers(1, 6))
@settings(max_examples=40, deadline=None)
def test_lambda_max_product_matches_eig(seed, n):
    g = np.random.default_rng(seed)
    a = g.standard_normal((n, n))
    b = g.standard_normal((n, n))
    Z, Pi = a @ a.T, b @ b.T
    ref = np.max(np.linalg.eigvals(Z @ Pi).real)
    assert lambda_max_product(Z, Pi) == pytest.approx(ref, rel=1e-8, abs=1e-10)


@given(st.integers(0, 10_000), st.integers(1, 6))
@settings(max_examples=40, deadline=None)
def test_psd_roots(seed, n):
    g = np.random.default_rng(seed)
    a = g.standard_normal((n, n))
    M = a @ a.T + 0.1 * np.eye(n)
    S = psd_sqrt(M)
    Si = psd_inv_sqrt(M)
    assert np.allclose(S @ S, M, atol=1e-10 * np.abs(M).max())
    assert np.allclose(S @ Si, np.eye(n), atol=1e-8)
    assert is_psd(M) and not is_psd(-M)


def test_inv_sqrt_rejects_singular():
    with pytest.raises(IllConditioned):
        psd_inv_sqrt(np.zeros((2, 2)))
