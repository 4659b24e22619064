"""Absorbing chains, their quasi-stationary distribution and the interaction kernel.

States are labelled ``0..d`` with ``0`` absorbing; the transient block is
``1..d``. Arrays indexed by transient states are 0-based internally, so the
transient state ``x`` lives at position ``x - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    InputError,
    NoAbsorption,
    NoConvergence,
    NonStochasticRow,
    NotAbsorbing,
    ParseError,
    Reducible,
    SingularSystem,
)

ROW_SUM_TOL = 1e-9
SIMPLEX_TOL = 1e-12

PRESETS = {
    "paper-3state": [
        [1.0, 0.0, 0.0],
        [0.2, 0.5, 0.3],
        [0.3, 0.3, 0.4],
    ],
    "paper-10state": [
        [1.0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        [0.2, 0.1, 0.7, 0, 0, 0, 0, 0, 0, 0],
        [0, 0.1, 0.8, 0.1, 0, 0, 0, 0, 0, 0],
        [0, 0, 0.8, 0.1, 0.1, 0, 0, 0, 0, 0],
        [0, 0, 0, 0.8, 0.1, 0.1, 0, 0, 0, 0],
        [0, 0, 0, 0, 0.01, 0.98, 0.01, 0, 0, 0],
        [0, 0, 0, 0, 0, 0.1, 0.1, 0.8, 0, 0],
        [0, 0, 0, 0, 0, 0, 0.1, 0.1, 0.8, 0],
        [0, 0, 0, 0, 0, 0, 0, 0.1, 0.8, 0.1],
        [0.2, 0, 0, 0, 0, 0, 0, 0, 0.7, 0.1],
    ],
}


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AbsorbingChain:
    """Validated transition matrix over ``{0, 1..d}``; build with :func:`validate_chain`."""

    P: np.ndarray

    @property
    def d(self) -> int:
        return self.P.shape[0] - 1

    @property
    def sub(self) -> np.ndarray:
        """The substochastic block over the transient states."""
        return self.P[1:, 1:]

    @property
    def absorb(self) -> np.ndarray:
        """One-step absorption probabilities from each transient state."""
        return self.P[1:, 0]


@dataclass(frozen=True, eq=False)
class QsdSolution:
    theta_star: np.ndarray
    lam: float
    residual: float


def is_irreducible(adj) -> bool:
    """Strong connectivity of the directed graph ``adj[x, y] != 0``."""
    adj = np.asarray(adj) != 0
    n = adj.shape[0]
    if n == 0:
        return False

    def reach(graph):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            x = frontier.pop()
            for y in np.flatnonzero(graph[x] & ~seen):
                seen[y] = True
                frontier.append(y)
        return seen.all()

    return reach(adj) and reach(adj.T)


def validate_chain(P) -> AbsorbingChain:
    P = np.array(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InputError(f"transition matrix must be square, got shape {P.shape}")
    if P.shape[0] < 2:
        raise InputError("need at least one non-absorbing state")
    if not np.all(np.isfinite(P)):
        raise InputError("transition matrix has non-finite entries")
    neg = np.argwhere(P < 0)
    if len(neg):
        x, y = neg[0]
        raise InputError(f"negative probability at row {x}, column {y}")
    sums = P.sum(axis=1)
    for x, s in enumerate(sums):
        if abs(s - 1.0) > ROW_SUM_TOL:
            raise NonStochasticRow(x, float(s))
    if P[0, 0] != 1.0 and abs(P[0, 0] - 1.0) > SIMPLEX_TOL:
        raise NotAbsorbing(f"state 0 must be absorbing, P[0,0] = {P[0, 0]!r}")
    P[0] = 0.0
    P[0, 0] = 1.0
    P[1:] /= sums[1:, None]
    if not np.any(P[1:, 0] > 0):
        raise NoAbsorption("no transient state can reach 0 in one step")
    if not is_irreducible(P[1:, 1:]):
        raise Reducible("transient block is not irreducible")
    return AbsorbingChain(_frozen(P))


def preset(name: str) -> AbsorbingChain:
    try:
        return validate_chain(PRESETS[name])
    except KeyError:
        raise InputError(f"unknown chain preset {name!r}; choose from {sorted(PRESETS)}") from None


def parse_chain_text(text: str) -> np.ndarray:
    """Parse the plain-text format: first line ``d+1``, then ``d+1`` rows."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ParseError("empty chain file")
    try:
        size = int(lines[0])
    except ValueError:
        raise ParseError(f"first line must be the matrix size, got {lines[0]!r}") from None
    rows = lines[1:]
    if len(rows) != size:
        raise ParseError(f"expected {size} rows, found {len(rows)}")
    out = np.empty((size, size))
    for i, ln in enumerate(rows):
        try:
            vals = [float(v) for v in ln.split()]
        except ValueError:
            raise ParseError(f"row {i}: non-numeric entry") from None
        if len(vals) != size:
            raise ParseError(f"row {i}: expected {size} entries, found {len(vals)}")
        out[i] = vals
    return out


def load_chain(source) -> AbsorbingChain:
    """Resolve a preset name, a chain file path, or an inline matrix."""
    if isinstance(source, AbsorbingChain):
        return source
    if isinstance(source, (list, tuple, np.ndarray)):
        return validate_chain(source)
    source = str(source)
    if source in PRESETS:
        return preset(source)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read chain file {source!r}: {exc.strerror}") from None
    return validate_chain(parse_chain_text(text))


def format_chain(chain: AbsorbingChain) -> str:
    rows = [" ".join(repr(float(v)) for v in row) for row in chain.P]
    return "\n".join([str(chain.d + 1), *rows]) + "\n"


def as_distribution(nu, d: int) -> np.ndarray:
    nu = np.asarray(nu, dtype=np.float64)
    if nu.shape != (d,):
        raise InputError(f"distribution must have length {d}, got shape {nu.shape}")
    if np.any(nu < 0) or abs(nu.sum() - 1.0) > SIMPLEX_TOL:
        raise InputError("not a probability vector")
    return nu


def exact_qsd(chain: AbsorbingChain, tol: float = 1e-12, max_iter: int = 10**6) -> QsdSolution:
    """Left Perron pair of the substochastic block, eigenvector on the simplex.

    A dense eigensolve supplies the starting vector; power iteration on the
    lazy matrix ``(I + P°)/2`` polishes it until the residual meets ``tol``.
    """
    A = chain.sub
    d = chain.d
    w, v = np.linalg.eig(A.T)
    k = int(np.argmax(w.real))
    x = np.abs(v[:, k].real)
    if not np.all(np.isfinite(x)) or x.sum() == 0:
        x = np.full(d, 1.0 / d)
    x = x / x.sum()
    lazy = 0.5 * (A + np.eye(d))
    for _ in range(max_iter + 1):
        xa = x @ A
        lam = xa.sum()
        residual = float(np.max(np.abs(xa - lam * x)))
        if residual <= tol:
            if not 0.0 < lam < 1.0:
                raise NoConvergence(f"Perron eigenvalue {lam!r} outside (0, 1)")
            return QsdSolution(_frozen(x), float(lam), residual)
        x = x @ lazy
        x /= x.sum()
    raise NoConvergence(f"power iteration did not reach residual {tol:g} in {max_iter} steps")


def kernel_K(chain: AbsorbingChain, nu) -> np.ndarray:
    """Redirect absorption mass according to ``nu``: ``P[x, y] + P[x, 0] nu[y]``."""
    nu = np.asarray(nu, dtype=np.float64)
    return chain.sub + np.outer(chain.absorb, nu)


def stationary(K) -> np.ndarray:
    """Unique stationary distribution of an irreducible stochastic matrix."""
    d = K.shape[0]
    M = K.T - np.eye(d)
    M[-1] = 1.0
    b = np.zeros(d)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(M, b)
    except np.linalg.LinAlgError:
        raise SingularSystem("stationarity system is singular") from None
    if not np.all(np.isfinite(pi)):
        raise SingularSystem("stationarity system is singular")
    return pi


def invariant_pi(chain: AbsorbingChain, nu) -> np.ndarray:
    return stationary(kernel_K(chain, nu))


def drift_h(chain: AbsorbingChain, nu) -> np.ndarray:
    nu = np.asarray(nu, dtype=np.float64)
    return invariant_pi(chain, nu) - nu


def centered_poisson(K, pi) -> np.ndarray:
    """Centered solution of ``(I - K) Q = Q (I - K) = I - Pi`` with ``Pi Q = Q Pi = 0``."""
    d = K.shape[0]
    Pi = np.tile(pi, (d, 1))
    try:
        Z = np.linalg.inv(np.eye(d) - K + Pi)
    except np.linalg.LinAlgError:
        raise SingularSystem("fundamental matrix is singular") from None
    return Z - Pi


def poisson_Q(chain: AbsorbingChain, nu) -> np.ndarray:
    K = kernel_K(chain, nu)
    return centered_poisson(K, stationary(K))
