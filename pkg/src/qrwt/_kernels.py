"""Compiled sampling kernels for the doubling-scheme simulator.

Each trial owns a splitmix64 stream derived from the run seed and the trial
index, so results are reproducible for a given seed no matter how trials are
batched or scheduled.  Geometric variates use the inverse transform; a
doubling round draws the maximum of the two half waiting times in one shot
from its closed-form CDF ``(1 - q**k)**2`` at the lowest level.
"""

import numpy as np
from numba import njit, prange

U64 = np.uint64
_GOLD = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)


@njit(cache=True, inline="always", fastmath=True)
def _mix(z):
    z = (z ^ (z >> U64(30))) * _MIX1
    z = (z ^ (z >> U64(27))) * _MIX2
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always", fastmath=True)
def _uniform(state, gamma):
    state = state + gamma
    return state, (np.float64(_mix(state) >> U64(11)) + 0.5) * (2.0 ** -53)


@njit(cache=True, inline="always", fastmath=True)
def _geometric(state, gamma, p, logq):
    if p >= 1.0:
        return state, np.int64(1)
    state, u = _uniform(state, gamma)
    return state, np.int64(1) + np.int64(np.log(u) / logq)


@njit(cache=True, inline="always", fastmath=True)
def _max_two_geometric(state, gamma, p, logq):
    if p >= 1.0:
        return state, np.int64(1)
    state, u = _uniform(state, gamma)
    su = (1.0 - u) / (1.0 + np.sqrt(u))  # 1 - sqrt(u), stable near u = 1
    m = np.int64(np.ceil(np.log(su) / logq))
    return state, m if m > 1 else np.int64(1)


@njit(cache=True, inline="always", fastmath=True)
def _rounds(state, gamma, a, log1ma):
    if a >= 1.0:
        return state, np.int64(1)
    state, u = _uniform(state, gamma)
    return state, np.int64(1) + np.int64(np.log(u) / log1ma)


@njit(cache=True, fastmath=True)
def _sim(d, p, a, cc, logq, log1ma, state, gamma):
    """One waiting-time sample for 2**d segments; returns (state, steps, rounds)."""
    if d == 0:
        state, k = _geometric(state, gamma, p, logq)
        return state, k, np.int64(1)
    state, g = _rounds(state, gamma, a, log1ma)
    k = np.int64(0)
    if d == 1:
        for _ in range(g):
            state, m = _max_two_geometric(state, gamma, p, logq)
            k += m
    else:
        for _ in range(g):
            state, k1, _g1 = _sim(d - 1, p, a, cc, logq, log1ma, state, gamma)
            state, k2, _g2 = _sim(d - 1, p, a, cc, logq, log1ma, state, gamma)
            k += max(k1, k2)
    if cc:
        k += (g - np.int64(1)) * np.int64(2 ** (d - 1))
    return state, k, g


@njit(cache=True, fastmath=True)
def sample_batch(trials, d, p, a, cc, seed):
    """Waiting-time samples plus top-level restart counts for `trials` runs."""
    logq = np.log(1.0 - p) if p < 1.0 else -1.0
    log1ma = np.log(1.0 - a) if a < 1.0 else -1.0
    steps = np.empty(trials, dtype=np.int64)
    restarts = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        s0 = _mix(U64(seed) + U64(t) * _GOLD)
        gamma = _mix(s0 ^ _GOLD) | U64(1)
        _, k, g = _sim(np.int64(d), p, a, cc, logq, log1ma, s0, gamma)
        steps[t] = k
        restarts[t] = g - 1
    return steps, restarts
