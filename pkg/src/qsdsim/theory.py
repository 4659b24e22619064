"""Linearisation of the mean-field drift at the QSD and the CLT covariances.

The drift ``h(nu) = pi(nu) - nu`` only has an intrinsic derivative along the
tangent space of the simplex. :func:`jacobian_h` returns the d x d matrix that
agrees with it there, maps into the tangent space (columns sum to zero) and
sends ``theta`` to ``h(theta)``, which is the degree-one homogeneous extension
``|nu| * pi(nu/|nu|) - nu``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chain import (
    AbsorbingChain,
    centered_poisson,
    drift_h,
    exact_qsd,
    is_irreducible,
    kernel_K,
    stationary,
)
from .errors import BelowThreshold, InputError, NotHurwitz, NotStable, Reducible

VARIANTS = ("algI", "algII", "algII_beta")


@dataclass(frozen=True, eq=False)
class CltTheory:
    variant: str
    gamma_star: float
    zeta: float
    theta_star: np.ndarray
    grad_h: np.ndarray
    L: float
    gamma_star_min: float
    U_star: np.ndarray
    V: np.ndarray
    residual: float


def _tangent_directions(d):
    """Columns ``e_j - e_d`` for ``j < d``."""
    B = np.zeros((d, d - 1))
    B[: d - 1] = np.eye(d - 1)
    B[d - 1] = -1.0
    return B


def _assemble(D, theta, h):
    # D[:, j] is the derivative along e_j - e_d; fix the last column by A theta = h(theta)
    last = h - D @ theta[:-1]
    return np.column_stack([D + last[:, None], last])


def jacobian_h(chain: AbsorbingChain, theta, mode: str = "analytic", eta: float = 1e-6) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    d = chain.d
    B = _tangent_directions(d)
    if mode == "analytic":
        K = kernel_K(chain, theta)
        pi = stationary(K)
        Q = centered_poisson(K, pi)
        # d pi = pi dK Q with dK = absorb (e_j - e_d)^T
        D = (pi @ chain.absorb) * (Q[: d - 1] - Q[d - 1]).T - B
        h = pi - theta
    elif mode == "finite_difference":
        if eta <= 0:
            raise InputError("finite-difference step must be positive")
        D = np.empty((d, d - 1))
        for j in range(d - 1):
            D[:, j] = (drift_h(chain, theta + eta * B[:, j]) - drift_h(chain, theta - eta * B[:, j])) / (2 * eta)
        h = drift_h(chain, theta)
    else:
        raise InputError(f"unknown jacobian mode {mode!r}")
    return _assemble(D, theta, h)


def tangent_restriction(A) -> np.ndarray:
    """Matrix of ``A`` on the tangent space in the basis ``e_j - e_d``.

    Valid when ``A`` maps the tangent space into itself; tangent vectors have
    their first ``d - 1`` entries as coordinates in that basis.
    """
    d = A.shape[0]
    return (A @ _tangent_directions(d))[: d - 1]


def stability_L(chain: AbsorbingChain, qsd=None) -> tuple[float, float]:
    """Return ``(L, 1/L)`` where ``-L`` is the largest real part of the tangent spectrum."""
    if chain.d == 1:
        return float("inf"), 0.0
    qsd = qsd or exact_qsd(chain)
    C = tangent_restriction(jacobian_h(chain, qsd.theta_star))
    L = float(-np.max(np.linalg.eigvals(C).real))
    if not L > 0:
        raise NotHurwitz(f"drift Jacobian at the QSD is not Hurwitz (L = {L!r})")
    return L, 1.0 / L


def _noise_F(K, Q, z):
    KQ = K[z] @ Q
    return np.einsum("u,ux,uy->xy", K[z], Q, Q) - np.outer(KQ, KQ)


def noise_F(chain: AbsorbingChain, theta, z: int) -> np.ndarray:
    """One-step noise covariance from transient state ``z`` (1-based)."""
    if not 1 <= z <= chain.d:
        raise InputError(f"state {z} is not in 1..{chain.d}")
    K = kernel_K(chain, theta)
    Q = centered_poisson(K, stationary(K))
    return _noise_F(K, Q, z - 1)


def noise_covariance(K, weights) -> np.ndarray:
    """``sum_w weights[w] F(w)`` for a kernel ``K`` with stationary law ``weights``."""
    Q = centered_poisson(K, weights)
    U = np.zeros_like(K)
    for w, p in enumerate(weights):
        U += p * _noise_F(K, Q, w)
    return U


def u_star(chain: AbsorbingChain, qsd=None) -> np.ndarray:
    qsd = qsd or exact_qsd(chain)
    return noise_covariance(kernel_K(chain, qsd.theta_star), qsd.theta_star)


def lyapunov_residual(V, U, A, c) -> float:
    return float(np.max(np.abs(U + A @ V + V @ A.T + c * V)))


def lyapunov_solve(U, A, c: float) -> np.ndarray:
    """Solve ``U + A V + V A^T + c V = 0`` for symmetric ``V``."""
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    shifted = A + 0.5 * c * np.eye(n)
    top = float(np.max(np.linalg.eigvals(shifted).real))
    if not top < 0:
        raise NotStable(f"A + (c/2) I has an eigenvalue with real part {top!r} >= 0")
    V = scipy.linalg.solve_continuous_lyapunov(shifted, -U)
    return 0.5 * (V + V.T)


def clt_covariance(chain: AbsorbingChain, gamma_star: float, variant: str = "algI",
                   zeta: float = 0.0, qsd=None, force: bool = False) -> CltTheory:
    """Limiting covariance of the scaled error for one of the two algorithms.

    ``algI``: source ``U*``, coefficient ``1/gamma*``. ``algII``: coefficient
    ``(1 + zeta)/gamma*``. ``algII_beta``: as ``algII`` with source
    ``(1 - zeta) U*`` (the per-particle normalisation). ``force`` skips the
    ``gamma* > 1/L`` check; the Lyapunov solve still requires stability.
    """
    if variant not in VARIANTS:
        raise InputError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    if variant != "algI" and not 0.0 <= zeta < 1.0:
        raise InputError("zeta must lie in [0, 1)")
    if not gamma_star > 0:
        raise InputError("gamma_star must be positive")
    qsd = qsd or exact_qsd(chain)
    theta = qsd.theta_star
    d = chain.d
    A = jacobian_h(chain, theta)
    U = u_star(chain, qsd)
    L, gmin = stability_L(chain, qsd)
    if not force and not gamma_star > gmin:
        raise BelowThreshold(f"gamma_star = {gamma_star!r} must exceed 1/L = {gmin!r}")
    if variant == "algI":
        c, source = 1.0 / gamma_star, U
    elif variant == "algII":
        c, source = (1.0 + zeta) / gamma_star, U
    else:
        c, source = (1.0 + zeta) / gamma_star, (1.0 - zeta) * U
    if d == 1:
        V = np.zeros((1, 1))
    else:
        # solve in tangent coordinates, then lift with the basis e_j - e_d
        B = _tangent_directions(d)
        Vt = lyapunov_solve(source[: d - 1, : d - 1], tangent_restriction(A), c)
        V = B @ Vt @ B.T
        V = 0.5 * (V + V.T)
    return CltTheory(
        variant=variant,
        gamma_star=float(gamma_star),
        zeta=float(zeta) if variant != "algI" else 0.0,
        theta_star=theta,
        grad_h=A,
        L=L,
        gamma_star_min=gmin,
        U_star=U,
        V=V,
        residual=lyapunov_residual(V, source, A, c),
    )


def iid_alpha_star(K0, x0: int, a_star: float) -> np.ndarray:
    """Asymptotic mean of the scaled occupation error for iid chains with ``a(n) ~ a* n``."""
    K0 = np.asarray(K0, dtype=np.float64)
    d = K0.shape[0]
    if K0.shape != (d, d) or np.any(K0 < 0) or np.max(np.abs(K0.sum(axis=1) - 1)) > 1e-9:
        raise InputError("K0 must be a square stochastic matrix")
    if not is_irreducible(K0):
        raise Reducible("K0 is not irreducible")
    if not 1 <= x0 <= d:
        raise InputError(f"state {x0} is not in 1..{d}")
    theta = stationary(K0)
    KQ = K0 @ centered_poisson(K0, theta)
    return a_star * (KQ[x0 - 1] - theta @ KQ)
