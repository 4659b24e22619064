"""Pure numpy implementation of the simulation kernels.

Mirrors ``_kernels.pyx`` operation for operation so that both backends give
bit-identical results. Transient states are 0-based here.
"""

import numpy as np

from . import rng

NAME = "python"


def _n_snapshots(steps, stride):
    return 1 + steps // stride + (1 if steps % stride else 0)


def _sample(rows, u):
    # smallest j with cumulative mass > u; cumsum is sequential, as in the C loop
    cum = np.cumsum(rows, axis=1)
    idx = (cum <= u[:, None]).sum(axis=1)
    return np.minimum(idx, rows.shape[1] - 1)


def _occupation(X, d):
    return np.bincount(X, minlength=d).astype(np.float64)


def interacting(Po, p0, init, steps, gamma_star, n_star, seed, stride):
    d = Po.shape[0]
    X = np.array(init, dtype=np.int64)
    N = X.shape[0]
    particles = np.arange(N, dtype=np.uint64)
    theta = _occupation(X, d) / N
    S = _n_snapshots(steps, stride)
    moves = np.zeros(S, dtype=np.int64)
    snaps = np.empty((S, d))
    snaps[0] = theta
    s = 1
    for k in range(1, steps + 1):
        u = rng.uniforms(rng.step_key(seed, rng.MOVE, k), particles)
        X = _sample(Po[X] + p0[X][:, None] * theta[None, :], u)
        g = gamma_star / (k - 1 + n_star)
        theta = (1.0 - g) * theta + g * (_occupation(X, d) / N)
        if k % stride == 0 or k == steps:
            moves[s] = k * N
            snaps[s] = theta
            s += 1
    return theta, moves, snaps


def _mean_rows(theta):
    acc = np.zeros(theta.shape[1])
    for row in theta:
        acc = acc + row
    return acc / theta.shape[0]


def independent(Po, p0, init, steps, gamma_star, n_star, seeds, stride):
    d = Po.shape[0]
    X = np.array(init, dtype=np.int64)
    N = X.shape[0]
    seeds = [int(s) for s in seeds]
    seed_keys = np.array([rng.mix(rng.mix(s) ^ rng.MOVE) for s in seeds], dtype=np.uint64)
    copies = np.arange(N)
    theta = np.zeros((N, d))
    theta[copies, X] = 1.0
    S = _n_snapshots(steps, stride)
    moves = np.zeros(S, dtype=np.int64)
    snaps = np.empty((S, d))
    snaps[0] = _mean_rows(theta)
    s = 1
    for k in range(1, steps + 1):
        # per-copy key mix(mix(mix(seed) ^ MOVE) ^ k), then particle index 0
        h = rng.mix_array(rng.mix_array(seed_keys ^ np.uint64(k)))
        u = (h >> np.uint64(11)).astype(np.float64) * rng.INV_2_53
        X = _sample(Po[X] + p0[X][:, None] * theta, u)
        g = gamma_star / (k - 1 + n_star)
        hit = np.zeros((N, d))
        hit[copies, X] = 1.0
        theta = (1.0 - g) * theta + g * hit
        if k % stride == 0 or k == steps:
            moves[s] = k * N
            snaps[s] = _mean_rows(theta)
            s += 1
    return snaps[-1].copy(), moves, snaps


def branching(Po, p0, x0, counts, gamma_star, n_star, seed, stride):
    d = Po.shape[0]
    steps = len(counts) - 2
    X = np.zeros(int(counts[-1]), dtype=np.int64)
    X[0] = x0
    theta = np.zeros(d)
    theta[x0] = 1.0
    S = _n_snapshots(steps, stride)
    moves = np.zeros(S, dtype=np.int64)
    snaps = np.empty((S, d))
    snaps[0] = theta
    s = 1
    total = 0
    for k in range(1, steps + 1):
        alive = int(counts[k])
        old = X[:alive].copy()
        u = rng.uniforms(rng.step_key(seed, rng.MOVE, k), np.arange(alive, dtype=np.uint64))
        X[:alive] = _sample(Po[old] + p0[old][:, None] * theta[None, :], u)
        if counts[k + 1] > alive:
            parent = old[rng.choose(rng.uniform(seed, rng.PICK, k, 0), alive)]
            uu = np.array([rng.uniform(seed, rng.SPAWN, k, 0)])
            X[alive] = _sample((Po[parent] + p0[parent] * theta)[None, :], uu)[0]
        g = gamma_star / (k - 1 + n_star)
        theta = (1.0 - g) * theta + g * (_occupation(X[:alive], d) / alive)
        total += int(counts[k + 1])
        if k % stride == 0 or k == steps:
            moves[s] = total
            snaps[s] = theta
            s += 1
    return theta, moves, snaps


def fleming_viot(P, init, ticks, seed, stride):
    d = P.shape[0] - 1
    rows = P.tolist()
    pos = [int(x) + 1 for x in init]
    N = len(pos)
    occ = [0] * d
    for x in pos:
        occ[x - 1] += 1
    S = _n_snapshots(ticks, stride)
    moves = np.zeros(S, dtype=np.int64)
    snaps = np.empty((S, d))
    snaps[0] = np.array(occ, dtype=np.float64) / N
    s = 1
    for t in range(1, ticks + 1):
        i = rng.choose(rng.uniform(seed, rng.PICK, t, 0), N)
        u = rng.uniform(seed, rng.MOVE, t, 0)
        row = rows[pos[i]]
        c = 0.0
        y = d
        for j in range(d + 1):
            c = c + row[j]
            if u < c:
                y = j
                break
        if y == 0:
            j = rng.choose(rng.uniform(seed, rng.SPAWN, t, 0), N - 1)
            if j >= i:
                j += 1
            y = pos[j]
        occ[pos[i] - 1] -= 1
        occ[y - 1] += 1
        pos[i] = y
        if t % stride == 0 or t == ticks:
            moves[s] = t
            snaps[s] = np.array(occ, dtype=np.float64) / N
            s += 1
    return snaps[-1].copy(), moves, snaps


def iid_occupation(K0, x0, N, steps, seed):
    d = K0.shape[0]
    X = np.full(N, x0, dtype=np.int64)
    particles = np.arange(N, dtype=np.uint64)
    occ = np.zeros(d, dtype=np.int64)
    for k in range(1, steps + 1):
        u = rng.uniforms(rng.step_key(seed, rng.MOVE, k), particles)
        X = _sample(K0[X], u)
        occ += np.bincount(X, minlength=d)
    return occ
