import numpy as np
import pytest

from qsdsim import clt_covariance, exact_qsd, jacobian_h, kernel_K, poisson_Q, preset, stability_L, u_star
from qsdsim.chain import drift_h
from qsdsim.errors import BelowThreshold, InputError, NotHurwitz, NotStable, Reducible
from qsdsim.theory import iid_alpha_star, lyapunov_residual, lyapunov_solve, noise_F, tangent_restriction

from conftest import random_chain, random_simplex


def kron_lyapunov(U, A, c):
    """Oracle: vec(AV + VA^T + cV) = (I (x) A + A (x) I + cI) vec(V)."""
    n = A.shape[0]
    I = np.eye(n)
    M = np.kron(I, A) + np.kron(A, I) + c * np.eye(n * n)
    return np.linalg.solve(M, -U.reshape(-1, order="F")).reshape((n, n), order="F")


def brute_F(K, Q, z):
    d = K.shape[0]
    KQ = K @ Q
    F = np.zeros((d, d))
    for x in range(d):
        for y in range(d):
            s = 0.0
            for u in range(d):
                s += K[z, u] * Q[u, x] * Q[u, y]
            F[x, y] = s - KQ[z, y] * KQ[z, x]
    return F


def tangent_min_eig(M):
    d = M.shape[0]
    B = np.zeros((d, d - 1))
    B[: d - 1] = np.eye(d - 1)
    B[d - 1] = -1
    q, _ = np.linalg.qr(B)
    return float(np.min(np.linalg.eigvalsh(q.T @ M @ q)))


# --- Jacobian -----------------------------------------------------------------

def test_jacobian_minimal(one):
    np.testing.assert_allclose(jacobian_h(one, [1.0]), [[0.0]], atol=1e-15)


def test_jacobian_symmetric_columns(sym):
    A = jacobian_h(sym, [0.5, 0.5])
    np.testing.assert_allclose(A[:, 0], -A[:, 1], atol=1e-14)


def test_jacobian_three_state_modes(three):
    th = exact_qsd(three).theta_star
    A = jacobian_h(three, th)
    F = jacobian_h(three, th, mode="finite_difference")
    assert np.linalg.norm(A - F) / np.linalg.norm(A) <= 1e-5


def test_jacobian_along_tangent_matches_directional_difference(three):
    # independent oracle: derivative of h along e1 - e2 by a wide-stencil difference
    th = exact_qsd(three).theta_star
    v = np.array([1.0, -1.0])
    t = 1e-4
    hp, hm = drift_h(three, th + t * v), drift_h(three, th - t * v)
    hp2, hm2 = drift_h(three, th + 2 * t * v), drift_h(three, th - 2 * t * v)
    deriv = (8 * (hp - hm) - (hp2 - hm2)) / (12 * t)
    np.testing.assert_allclose(jacobian_h(three, th) @ v, deriv, atol=1e-9)


def test_jacobian_corpus():
    rng = np.random.default_rng(7)
    for _ in range(100):
        c = random_chain(rng, dmax=10)
        if c.d == 1:
            continue
        th = random_simplex(rng, c.d)
        A = jacobian_h(c, th)
        F = jacobian_h(c, th, mode="finite_difference")
        assert np.linalg.norm(A - F) <= 1e-5 * max(np.linalg.norm(A), 1e-300)
        assert np.max(np.abs(A.sum(axis=0))) <= 1e-8
        # homogeneous extension: A theta = h(theta)
        np.testing.assert_allclose(A @ th, drift_h(c, th), atol=1e-10)


def test_jacobian_bad_mode(three):
    with pytest.raises(InputError):
        jacobian_h(three, [0.5, 0.5], mode="spline")
    with pytest.raises(InputError):
        jacobian_h(three, [0.5, 0.5], mode="finite_difference", eta=0)


# --- stability margin ---------------------------------------------------------

def test_L_minimal(one):
    assert stability_L(one) == (float("inf"), 0.0)


def test_L_three_state_oracle(three):
    th = exact_qsd(three).theta_star
    v = np.array([1.0, -1.0])
    t = 1e-5
    # d = 2: the tangent space is one-dimensional, so the eigenvalue is the directional slope
    slope = (drift_h(three, th + t * v)[0] - drift_h(three, th - t * v)[0]) / (2 * t)
    L, inv = stability_L(three)
    assert L > 0
    assert -slope == pytest.approx(L, rel=1e-7)
    assert inv == pytest.approx(1 / L)


def test_L_ten_state_eigen_oracle():
    c = preset("paper-10state")
    th = exact_qsd(c).theta_star
    F = jacobian_h(c, th, mode="finite_difference")
    L, _ = stability_L(c)
    assert L == pytest.approx(-np.max(np.linalg.eigvals(tangent_restriction(F)).real), rel=1e-5)


def test_not_hurwitz(monkeypatch, three):
    import qsdsim.theory as T

    monkeypatch.setattr(T, "jacobian_h", lambda chain, theta: np.eye(2) - 0.5)
    with pytest.raises(NotHurwitz):
        T.stability_L(three)


# --- noise covariance -----------------------------------------------------------

def test_F_minimal(one):
    np.testing.assert_allclose(noise_F(one, [1.0], 1), [[0.0]], atol=1e-15)


@pytest.mark.parametrize("z", [1, 2])
def test_F_symmetric(sym, z):
    np.testing.assert_allclose(noise_F(sym, [0.5, 0.5], z), [[0.25, -0.25], [-0.25, 0.25]], atol=1e-15)


def test_F_brute_force(three):
    rng = np.random.default_rng(3)
    th = exact_qsd(three).theta_star
    K, Q = kernel_K(three, th), poisson_Q(three, th)
    F = noise_F(three, th, 1)
    np.testing.assert_allclose(F, brute_F(K, Q, 0), atol=1e-14)
    np.testing.assert_allclose(F, F.T, atol=1e-15)
    for _ in range(10):
        c = random_chain(rng, dmax=6)
        nu = random_simplex(rng, c.d)
        K, Q = kernel_K(c, nu), poisson_Q(c, nu)
        for z in range(1, c.d + 1):
            np.testing.assert_allclose(noise_F(c, nu, z), brute_F(K, Q, z - 1), atol=1e-12)


def test_F_bad_state(three):
    with pytest.raises(InputError):
        noise_F(three, [0.5, 0.5], 0)


def test_u_star_examples(one, sym, three):
    np.testing.assert_allclose(u_star(one), [[0.0]], atol=1e-15)
    np.testing.assert_allclose(u_star(sym), [[0.25, -0.25], [-0.25, 0.25]], atol=1e-14)
    U = u_star(three)
    th = exact_qsd(three).theta_star
    np.testing.assert_allclose(U, th[0] * noise_F(three, th, 1) + th[1] * noise_F(three, th, 2), atol=1e-14)
    assert np.max(np.abs(U - U.T)) <= 1e-12
    assert tangent_min_eig(U) >= -1e-10


def test_u_star_corpus():
    rng = np.random.default_rng(8)
    for _ in range(50):
        c = random_chain(rng, dmax=10)
        if c.d == 1:
            continue
        U = u_star(c)
        assert np.max(np.abs(U - U.T)) <= 1e-12
        assert tangent_min_eig(U) >= -1e-10


# --- Lyapunov -----------------------------------------------------------------

def test_lyapunov_scalar():
    np.testing.assert_allclose(lyapunov_solve([[1.0]], [[-1.0]], 0.5), [[2 / 3]], atol=1e-15)


def test_lyapunov_zero_source():
    A = np.array([[-2.0, 1.0], [0.0, -1.0]])
    np.testing.assert_array_equal(lyapunov_solve(np.zeros((2, 2)), A, 0.3), np.zeros((2, 2)))


def test_lyapunov_kronecker_random():
    rng = np.random.default_rng(9)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        A = rng.normal(size=(n, n))
        A -= (np.max(np.linalg.eigvals(A).real) + 0.5 + rng.random()) * np.eye(n)
        c = float(rng.random())
        G = rng.normal(size=(n, n))
        U = G @ G.T
        V = lyapunov_solve(U, A, c)
        assert lyapunov_residual(V, U, A, c) <= 1e-10
        np.testing.assert_allclose(V, kron_lyapunov(U, A, c), atol=1e-9)
        np.testing.assert_array_equal(V, V.T)


def test_lyapunov_unstable():
    with pytest.raises(NotStable):
        lyapunov_solve([[1.0]], [[-1.0]], 3.0)


def test_clt_covariance_corpus():
    rng = np.random.default_rng(10)
    done = 0
    while done < 100:
        c = random_chain(rng, dmax=8)
        if c.d == 1:
            continue
        try:
            L, inv = stability_L(c)
        except NotHurwitz:
            continue
        g = inv * (1.2 + 2 * rng.random())
        for variant, zeta in (("algI", 0.0), ("algII", 0.4), ("algII_beta", 0.4)):
            th = clt_covariance(c, g, variant, zeta)
            assert th.residual <= 1e-10
            cc = (1 + zeta) / g
            src = (1 - zeta) * th.U_star if variant == "algII_beta" else th.U_star
            np.testing.assert_allclose(th.V, kron_lyapunov(src, th.grad_h, cc), atol=1e-9)
        done += 1


def test_algII_zero_zeta_is_algI(sym, three):
    for c in (sym, three):
        g = 2 * stability_L(c)[1] + 0.1
        a = clt_covariance(c, g, "algI")
        b = clt_covariance(c, g, "algII", 1e-15)
        z = clt_covariance(c, g, "algII", 0.0)
        np.testing.assert_allclose(a.V, b.V, atol=1e-9)
        np.testing.assert_allclose(a.V, z.V, atol=1e-9)


def test_algII_beta_equation(three):
    g = 3.0
    t = clt_covariance(three, g, "algII_beta", 0.5)
    assert lyapunov_residual(t.V, 0.5 * t.U_star, t.grad_h, 1.5 / g) <= 1e-10


def test_symmetric_algI_closed_form(sym):
    # all rows of K[nu] coincide, so pi(nu) = 0.4 + 0.2 nu and h has tangent slope -0.8
    t = clt_covariance(sym, 2.0, "algI")
    assert t.L == pytest.approx(0.8, abs=1e-12)
    v = 0.25 / (1.6 - 0.5)
    np.testing.assert_allclose(t.V, v * np.array([[1, -1], [-1, 1]]), atol=1e-12)


def test_threshold(three):
    _, inv = stability_L(three)
    with pytest.raises(BelowThreshold):
        clt_covariance(three, inv * 0.99)
    with pytest.raises(BelowThreshold):
        clt_covariance(three, inv)
    forced = clt_covariance(three, inv * 0.9, force=True)
    assert forced.residual <= 1e-10
    with pytest.raises(NotStable):
        clt_covariance(three, inv * 0.4, force=True)


def test_clt_minimal(one):
    t = clt_covariance(one, 1.0)
    np.testing.assert_array_equal(t.V, [[0.0]])


@pytest.mark.parametrize("args", [("algIII", 0.0), ("algII", 1.0), ("algII", -0.1)])
def test_clt_bad_variant(three, args):
    with pytest.raises(InputError):
        clt_covariance(three, 3.0, *args)


# --- iid drift ------------------------------------------------------------------

def test_alpha_star_examples(three):
    Pi = np.tile([0.3, 0.7], (2, 1))
    np.testing.assert_allclose(iid_alpha_star(Pi, 1, 2.0), [0.0, 0.0], atol=1e-15)
    K0 = kernel_K(three, exact_qsd(three).theta_star)
    np.testing.assert_array_equal(iid_alpha_star(K0, 1, 0.0), [0.0, 0.0])
    a = iid_alpha_star(K0, 1, 1.0)
    assert abs(a.sum()) <= 1e-10
    assert np.any(a != 0)


def test_alpha_star_series_oracle(three):
    # alpha*/a* = sum_{k>=1} (K0^k[x0] - theta), a convergent series for aperiodic K0
    th = exact_qsd(three).theta_star
    K0 = kernel_K(three, th)
    acc, row = np.zeros(2), np.array([1.0, 0.0])
    for _ in range(400):
        row = row @ K0
        acc += row - th
    np.testing.assert_allclose(iid_alpha_star(K0, 1, 1.0), acc, atol=1e-12)


def test_alpha_star_reducible():
    with pytest.raises(Reducible):
        iid_alpha_star(np.eye(2), 1, 1.0)
