# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels.

Same signatures and the same arithmetic, operation for operation, as
``_fallback.py``. Main loops run without the GIL so replications can share a
thread pool.
"""

import numpy as np

from libc.stdint cimport uint64_t, int64_t

NAME = "cython"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t M2 = 0x94D049BB133111EBULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0

cdef uint64_t MOVE = 1
cdef uint64_t PICK = 2
cdef uint64_t SPAWN = 3


cdef inline uint64_t mix(uint64_t z) noexcept nogil:
    z = z + GOLDEN
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline uint64_t step_key(uint64_t seed, uint64_t tag, uint64_t step) noexcept nogil:
    return mix(mix(mix(seed) ^ tag) ^ step)


cdef inline double unit(uint64_t key, uint64_t particle) noexcept nogil:
    return <double>(mix(key ^ particle) >> 11) * INV_2_53


cdef inline Py_ssize_t choose(double u, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t j = <Py_ssize_t>(u * m)
    if j > m - 1:
        j = m - 1
    return j


cdef inline Py_ssize_t sample_kernel_row(const double[:, ::1] Po, const double[::1] p0,
                                         const double* theta, Py_ssize_t x, double u) noexcept nogil:
    cdef Py_ssize_t d = Po.shape[0]
    cdef Py_ssize_t j
    cdef double c = 0.0
    for j in range(d):
        c = c + (Po[x, j] + p0[x] * theta[j])
        if u < c:
            return j
    return d - 1


cdef Py_ssize_t n_snapshots(Py_ssize_t steps, Py_ssize_t stride):
    return 1 + steps // stride + (1 if steps % stride else 0)


def interacting(const double[:, ::1] Po, const double[::1] p0, init, Py_ssize_t steps,
                double gamma_star, Py_ssize_t n_star, seed, Py_ssize_t stride):
    cdef Py_ssize_t d = Po.shape[0]
    cdef int64_t[::1] X = np.array(init, dtype=np.int64)
    cdef Py_ssize_t N = X.shape[0]
    cdef double[::1] theta = np.zeros(d)
    cdef double[::1] occ = np.zeros(d)
    cdef Py_ssize_t S = n_snapshots(steps, stride)
    moves_arr = np.zeros(S, dtype=np.int64)
    snaps_arr = np.empty((S, d))
    cdef int64_t[::1] moves = moves_arr
    cdef double[:, ::1] snaps = snaps_arr
    cdef uint64_t useed = <uint64_t>seed
    cdef Py_ssize_t i, j, k, s = 1
    cdef uint64_t key
    cdef double g
    for i in range(N):
        occ[X[i]] += 1.0
    for j in range(d):
        theta[j] = occ[j] / <double>N
        snaps[0, j] = theta[j]
    with nogil:
        for k in range(1, steps + 1):
            key = step_key(useed, MOVE, <uint64_t>k)
            for j in range(d):
                occ[j] = 0.0
            for i in range(N):
                X[i] = sample_kernel_row(Po, p0, &theta[0], X[i], unit(key, <uint64_t>i))
                occ[X[i]] += 1.0
            g = gamma_star / <double>(k - 1 + n_star)
            for j in range(d):
                theta[j] = (1.0 - g) * theta[j] + g * (occ[j] / <double>N)
            if k % stride == 0 or k == steps:
                moves[s] = k * N
                for j in range(d):
                    snaps[s, j] = theta[j]
                s += 1
    return np.asarray(theta).copy(), moves_arr, snaps_arr


def independent(const double[:, ::1] Po, const double[::1] p0, init, Py_ssize_t steps,
                double gamma_star, Py_ssize_t n_star, seeds, Py_ssize_t stride):
    cdef Py_ssize_t d = Po.shape[0]
    cdef int64_t[::1] X = np.array(init, dtype=np.int64)
    cdef Py_ssize_t N = X.shape[0]
    cdef uint64_t[::1] keys = np.array([int(v) for v in seeds], dtype=np.uint64)
    cdef double[:, ::1] theta = np.zeros((N, d))
    cdef double[::1] acc = np.zeros(d)
    cdef Py_ssize_t S = n_snapshots(steps, stride)
    moves_arr = np.zeros(S, dtype=np.int64)
    snaps_arr = np.empty((S, d))
    cdef int64_t[::1] moves = moves_arr
    cdef double[:, ::1] snaps = snaps_arr
    cdef Py_ssize_t i, j, k, x, s = 1
    cdef double g, hit
    for i in range(N):
        keys[i] = mix(mix(keys[i]) ^ MOVE)
        theta[i, X[i]] = 1.0
    with nogil:
        for j in range(d):
            acc[j] = 0.0
        for i in range(N):
            for j in range(d):
                acc[j] = acc[j] + theta[i, j]
        for j in range(d):
            snaps[0, j] = acc[j] / <double>N
        for k in range(1, steps + 1):
            g = gamma_star / <double>(k - 1 + n_star)
            for i in range(N):
                x = sample_kernel_row(Po, p0, &theta[i, 0], X[i], unit(mix(keys[i] ^ <uint64_t>k), 0))
                X[i] = x
                for j in range(d):
                    hit = 1.0 if j == x else 0.0
                    theta[i, j] = (1.0 - g) * theta[i, j] + g * hit
            if k % stride == 0 or k == steps:
                moves[s] = k * N
                for j in range(d):
                    acc[j] = 0.0
                for i in range(N):
                    for j in range(d):
                        acc[j] = acc[j] + theta[i, j]
                for j in range(d):
                    snaps[s, j] = acc[j] / <double>N
                s += 1
    return snaps_arr[S - 1].copy(), moves_arr, snaps_arr


def branching(const double[:, ::1] Po, const double[::1] p0, Py_ssize_t x0, counts_in,
              double gamma_star, Py_ssize_t n_star, seed, Py_ssize_t stride):
    cdef const int64_t[::1] counts = np.ascontiguousarray(counts_in, dtype=np.int64)
    cdef Py_ssize_t d = Po.shape[0]
    cdef Py_ssize_t steps = counts.shape[0] - 2
    cdef int64_t[::1] X = np.zeros(counts[counts.shape[0] - 1], dtype=np.int64)
    cdef double[::1] theta = np.zeros(d)
    cdef double[::1] occ = np.zeros(d)
    cdef Py_ssize_t S = n_snapshots(steps, stride)
    moves_arr = np.zeros(S, dtype=np.int64)
    snaps_arr = np.empty((S, d))
    cdef int64_t[::1] moves = moves_arr
    cdef double[:, ::1] snaps = snaps_arr
    cdef uint64_t useed = <uint64_t>seed
    cdef Py_ssize_t i, j, k, alive, parent, s = 1
    cdef int64_t total = 0
    cdef uint64_t key
    cdef double g
    X[0] = x0
    theta[x0] = 1.0
    for j in range(d):
        snaps[0, j] = theta[j]
    with nogil:
        for k in range(1, steps + 1):
            alive = counts[k]
            parent = -1
            if counts[k + 1] > alive:
                # replicate from the pre-move position
                parent = X[choose(unit(step_key(useed, PICK, <uint64_t>k), 0), alive)]
            key = step_key(useed, MOVE, <uint64_t>k)
            for j in range(d):
                occ[j] = 0.0
            for i in range(alive):
                X[i] = sample_kernel_row(Po, p0, &theta[0], X[i], unit(key, <uint64_t>i))
                occ[X[i]] += 1.0
            if parent >= 0:
                X[alive] = sample_kernel_row(Po, p0, &theta[0], parent,
                                             unit(step_key(useed, SPAWN, <uint64_t>k), 0))
            g = gamma_star / <double>(k - 1 + n_star)
            for j in range(d):
                theta[j] = (1.0 - g) * theta[j] + g * (occ[j] / <double>alive)
            total += counts[k + 1]
            if k % stride == 0 or k == steps:
                moves[s] = total
                for j in range(d):
                    snaps[s, j] = theta[j]
                s += 1
    return np.asarray(theta).copy(), moves_arr, snaps_arr


def fleming_viot(const double[:, ::1] P, init, Py_ssize_t ticks, seed, Py_ssize_t stride):
    cdef Py_ssize_t d = P.shape[0] - 1
    cdef int64_t[::1] pos = np.array(init, dtype=np.int64) + 1
    cdef Py_ssize_t N = pos.shape[0]
    cdef int64_t[::1] occ = np.zeros(d, dtype=np.int64)
    cdef Py_ssize_t S = n_snapshots(ticks, stride)
    moves_arr = np.zeros(S, dtype=np.int64)
    snaps_arr = np.empty((S, d))
    cdef int64_t[::1] moves = moves_arr
    cdef double[:, ::1] snaps = snaps_arr
    cdef uint64_t useed = <uint64_t>seed
    cdef Py_ssize_t i, j, t, x, y, s = 1
    cdef double u, c
    for i in range(N):
        occ[pos[i] - 1] += 1
    for j in range(d):
        snaps[0, j] = <double>occ[j] / <double>N
    with nogil:
        for t in range(1, ticks + 1):
            i = choose(unit(step_key(useed, PICK, <uint64_t>t), 0), N)
            u = unit(step_key(useed, MOVE, <uint64_t>t), 0)
            x = pos[i]
            c = 0.0
            y = d
            for j in range(d + 1):
                c = c + P[x, j]
                if u < c:
                    y = j
                    break
            if y == 0:
                j = choose(unit(step_key(useed, SPAWN, <uint64_t>t), 0), N - 1)
                if j >= i:
                    j += 1
                y = pos[j]
            occ[x - 1] -= 1
            occ[y - 1] += 1
            pos[i] = y
            if t % stride == 0 or t == ticks:
                moves[s] = t
                for j in range(d):
                    snaps[s, j] = <double>occ[j] / <double>N
                s += 1
    return snaps_arr[S - 1].copy(), moves_arr, snaps_arr


def iid_occupation(const double[:, ::1] K0, Py_ssize_t x0, Py_ssize_t N, Py_ssize_t steps, seed):
    cdef Py_ssize_t d = K0.shape[0]
    cdef int64_t[::1] X = np.full(N, x0, dtype=np.int64)
    occ_arr = np.zeros(d, dtype=np.int64)
    cdef int64_t[::1] occ = occ_arr
    cdef uint64_t useed = <uint64_t>seed
    cdef Py_ssize_t i, j, k, x
    cdef uint64_t key
    cdef double u, c
    with nogil:
        for k in range(1, steps + 1):
            key = step_key(useed, MOVE, <uint64_t>k)
            for i in range(N):
                u = unit(key, <uint64_t>i)
                x = X[i]
                c = 0.0
                X[i] = d - 1
                for j in range(d):
                    c = c + K0[x, j]
                    if u < c:
                        X[i] = j
                        break
                occ[X[i]] += 1
    return occ_arr
