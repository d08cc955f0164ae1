"""Chain constructions for every supported repeater configuration.

All builders follow the global state-ordering convention (initial state
first, absorbing states last) so that their outputs can be composed and fed
to the analysis routines without reshuffling.
"""

from __future__ import annotations

import itertools
import os
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.stats import binom as binom_dist

from .chain import (
    AbsorbingChain,
    SchemeTree,
    SizeCapError,
    label_digits,
    swapped_label,
)

DEFAULT_STATE_CAP = 2 ** 20


def state_cap() -> int:
    """Builder state cap; the QRWT_MAX_STATES environment variable overrides it."""
    raw = os.environ.get("QRWT_MAX_STATES")
    return int(raw) if raw else DEFAULT_STATE_CAP


def _check_prob(name: str, value: float, allow_one: bool = True) -> None:
    hi_ok = value <= 1.0 if allow_one else value < 1.0
    if not (0.0 < value and hi_ok):
        raise ValueError(f"{name} must be in (0, 1{']' if allow_one else ')'}, got {value}")


def build_single_segment(p: float) -> AbsorbingChain:
    """Two-state chain of one segment: stay empty with 1-p, finish with p."""
    _check_prob("p", p)
    q = 1.0 - p
    return AbsorbingChain(("0", "1"), 1, np.array([[q]]), np.array([[p]]))


def combine_fixed(left: AbsorbingChain, right: AbsorbingChain, a: float) -> AbsorbingChain:
    """Merge two sub-repeater chains under a final swap with success probability a.

    The product chain lives on concatenated label pairs.  Transitions multiply
    componentwise; the joint completion either absorbs (swap succeeded, factor
    ``a``) or falls back to the initial state (factor ``1-a``).  Equivalent to
    taking the Kronecker product and rerouting the last column:
    ``P[:-1, 0] += (1-a) * P[:-1, -1]; P[:-1, -1] *= a``.
    """
    _check_prob("a", a)
    for side, ch in (("left", left), ("right", right)):
        if ch.n_absorbing != 1:
            raise ValueError(f"{side} chain must have a single absorbing state")
    n_digits = len(left.labels[0]) + len(right.labels[0])
    labels = [la + lb for la in left.labels for lb in right.labels]
    labels[-1] = "(" + "1" * n_digits + ")"

    n = len(labels)
    big = left.is_sparse or right.is_sparse or n * n > 4_000_000
    if big:
        P = sp.kron(
            left.full_matrix(dense=False), right.full_matrix(dense=False), format="csc"
        ).tolil()
        last = P[:-1, -1].toarray().ravel()
        first = P[:-1, 0].toarray().ravel()
        P[:-1, 0] = (first + (1.0 - a) * last)[:, None]
        P[:-1, -1] = (a * last)[:, None]
        return AbsorbingChain.from_full(P.tocsr(), labels, 1)
    P = np.kron(left.full_matrix(), right.full_matrix())
    P[:-1, 0] += (1.0 - a) * P[:-1, -1]
    P[:-1, -1] *= a
    return AbsorbingChain.from_full(P, labels, 1)


def build_fixed_scheme(
    tree: SchemeTree, p: float, a: float, max_states: Optional[int] = None
) -> AbsorbingChain:
    """Chain of a fixed swap scheme: fold :func:`combine_fixed` over the tree."""
    cap = state_cap() if max_states is None else max_states
    n = tree.n_leaves
    if 2 ** n > cap:
        raise SizeCapError(
            f"fixed scheme over {n} segments needs {2 ** n} states (cap {cap})"
        )

    def build(node: SchemeTree) -> AbsorbingChain:
        if node.is_leaf:
            return build_single_segment(p)
        return combine_fixed(build(node.left), build(node.right), a)

    return build(tree)


def _subset_states(n: int):
    """Subsets of range(n) ordered by (size, bits): empty first, full last."""
    subsets = sorted(range(2 ** n), key=lambda s: (bin(s).count("1"), s))
    index = {s: i for i, s in enumerate(subsets)}
    labels = [
        swapped_label([(s >> k) & 1 for k in range(n)]) for s in subsets
    ]
    return subsets, index, labels


def build_deterministic(n: int, p: float, max_states: Optional[int] = None) -> AbsorbingChain:
    """Chain over ready-segment subsets when swaps never fail.

    From subset I the chain moves to any superset J with probability
    ``p**(|J|-|I|) * q**(n-|J|)``; the full set is absorbing.
    """
    if not 1 <= n <= 20:
        raise ValueError(f"n must be in [1, 20], got {n}")
    _check_prob("p", p)
    cap = state_cap() if max_states is None else max_states
    if 2 ** n > cap:
        raise SizeCapError(f"deterministic chain needs {2 ** n} states (cap {cap})")
    q = 1.0 - p
    subsets, index, labels = _subset_states(n)
    rows, cols, vals = [], [], []
    for i, s in enumerate(subsets[:-1]):
        free = [k for k in range(n) if not (s >> k) & 1]
        for extra_bits in range(2 ** len(free)):
            t = s
            grown = 0
            for k, pos in enumerate(free):
                if (extra_bits >> k) & 1:
                    t |= 1 << pos
                    grown += 1
            rows.append(i)
            cols.append(index[t])
            vals.append(p ** grown * q ** (len(free) - grown))
    return _from_triplets(rows, cols, vals, labels, 1)


def build_asymmetric_deterministic(p_list: Sequence[float]) -> AbsorbingChain:
    """Deterministic-swap chain with a per-segment distribution probability."""
    p_list = list(p_list)
    if not p_list:
        raise ValueError("p_list must not be empty")
    if len(p_list) > 20:
        raise ValueError("at most 20 segments supported")
    for i, pi in enumerate(p_list):
        _check_prob(f"p[{i}]", pi)
    n = len(p_list)
    q_list = [1.0 - pi for pi in p_list]
    subsets, index, labels = _subset_states(n)
    rows, cols, vals = [], [], []
    for i, s in enumerate(subsets[:-1]):
        free = [k for k in range(n) if not (s >> k) & 1]
        for extra_bits in range(2 ** len(free)):
            t = s
            prob = 1.0
            for k, pos in enumerate(free):
                if (extra_bits >> k) & 1:
                    t |= 1 << pos
                    prob *= p_list[pos]
                else:
                    prob *= q_list[pos]
            rows.append(i)
            cols.append(index[t])
            vals.append(prob)
    return _from_triplets(rows, cols, vals, labels, 1)


# -- dynamical scheme ----------------------------------------------------------


@lru_cache(maxsize=None)
def _swap_pass(units: tuple, i: int) -> tuple:
    """Outcomes of the greedy left-to-right swap pass over ready units.

    ``units`` are disjoint (start, end) spans of ready segments in ascending
    order.  Whenever unit i touches unit i+1 a swap is attempted: on success
    the two merge (and the merged unit immediately retries with its new right
    neighbor), on failure both are reset to empty.  Returns tuples
    ``(surviving_units, n_success, n_fail)`` covering all branches.
    """
    if i >= len(units) - 1:
        return ((units, 0, 0),)
    if units[i + 1][0] != units[i][1] + 1:
        return _swap_pass(units, i + 1)
    out = []
    merged = units[:i] + ((units[i][0], units[i + 1][1]),) + units[i + 2:]
    for surv, ns, nf in _swap_pass(merged, i):
        out.append((surv, ns + 1, nf))
    dropped = units[:i] + units[i + 2:]
    for surv, ns, nf in _swap_pass(dropped, i):
        out.append((surv, ns, nf + 1))
    return tuple(out)


def build_dynamical(n: int, p: float, a: float) -> AbsorbingChain:
    """Chain of the scheme that swaps any adjacent ready links as soon as possible.

    One step: all empty segments attempt distribution simultaneously, then
    every adjacency among ready units is resolved by the greedy left-to-right
    pass of :func:`_swap_pass`.  States are the same ready-segment subsets as
    in the deterministic case (adjacent ready segments can never rest
    unmerged).
    """
    if not 2 <= n <= 8:
        raise ValueError(f"n must be in [2, 8], got {n}")
    _check_prob("p", p)
    _check_prob("a", a)
    q = 1.0 - p
    subsets, index, labels = _subset_states(n)

    def units_of(s: int) -> tuple:
        bits = [(s >> k) & 1 for k in range(n)]
        units = []
        k = 0
        while k < n:
            if bits[k]:
                j = k
                while j < n and bits[j]:
                    j += 1
                units.append((k, j - 1))
                k = j
            else:
                k += 1
        return tuple(units)

    P = np.zeros((2 ** n, 2 ** n))
    for i, s in enumerate(subsets[:-1]):
        old_units = units_of(s)
        free = [k for k in range(n) if not (s >> k) & 1]
        for extra_bits in range(2 ** len(free)):
            # fresh successes are unswapped single-segment units, distinct
            # from the already-merged blocks they may touch
            new_units = tuple(
                (pos, pos) for k, pos in enumerate(free) if (extra_bits >> k) & 1
            )
            grown = len(new_units)
            p_dist = p ** grown * q ** (len(free) - grown)
            units = tuple(sorted(old_units + new_units))
            for surv, ns, nf in _swap_pass(units, 0):
                final = 0
                for lo, hi in surv:
                    for k in range(lo, hi + 1):
                        final |= 1 << k
                P[i, index[final]] += p_dist * a ** ns * (1.0 - a) ** nf
    P[-1, -1] = 1.0
    return AbsorbingChain.from_full(P, labels, 1)


# -- finite memory -------------------------------------------------------------


def build_two_segment_cutoff(p: float, a: float, m: int) -> AbsorbingChain:
    """Two-segment chain where a ready link is discarded after waiting m steps.

    Auxiliary states track how long the single ready segment has been stored;
    reaching the limit resets it together with the failed partner.
    """
    _check_prob("p", p)
    _check_prob("a", a)
    if m < 1:
        raise ValueError(f"cutoff must be >= 1, got {m}")
    q = 1.0 - p
    labels = (
        ["00"]
        + [f"01^{i}" for i in range(1, m + 1)]
        + [f"1^{i}0" for i in range(1, m + 1)]
        + ["(11)"]
    )
    t = 2 * m + 1
    P = np.zeros((t + 1, t + 1))
    right = lambda i: i            # 01^i at index i (1-based age)
    left = lambda i: m + i         # 1^i 0 at index m+i
    P[0, 0] = q * q + (1.0 - a) * p * p
    P[0, right(1)] = p * q
    P[0, left(1)] = p * q
    P[0, t] = a * p * p
    for idx in (right, left):
        for i in range(1, m + 1):
            row = idx(i)
            P[row, 0] = (1.0 - a) * p
            P[row, t] = a * p
            if i < m:
                P[row, idx(i + 1)] = q
            else:
                P[row, 0] += q
    P[t, t] = 1.0
    return AbsorbingChain.from_full(P, labels, 1, force_dense=2 * m + 1 < 64)


def build_finite_memory_deterministic(
    n: int, p: float, m: int, max_states: Optional[int] = None
) -> AbsorbingChain:
    """Deterministic-swap chain with memory cutoff m, over storage-age tuples.

    Component j of a state records for how long segment j has been ready
    (0 = empty).  Ages advance by one per step; empty segments succeed with
    probability p.  Once some segment hits the cutoff the whole repeater
    either completes in that step (all empty segments succeed) or resets.
    States without zeros are absorbing, so the chain has several absorbing
    states: ``(m+1)**n - m**n`` transient and ``m**n - (m-1)**n`` absorbing.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if m < 1:
        raise ValueError(f"cutoff must be >= 1, got {m}")
    _check_prob("p", p)
    total = (m + 1) ** n - (m - 1) ** n
    cap = state_cap() if max_states is None else max_states
    if total > cap:
        raise SizeCapError(f"finite-memory chain needs {total} states (cap {cap})")
    q = 1.0 - p

    transient = []
    absorbing = []
    for tup in itertools.product(range(m + 1), repeat=n):
        if 0 in tup:
            transient.append(tup)
        elif 1 in tup:
            absorbing.append(tup)
    transient.sort()
    absorbing.sort()
    t_index = {tup: i for i, tup in enumerate(transient)}
    a_index = {tup: i for i, tup in enumerate(absorbing)}
    nt, na = len(transient), len(absorbing)

    rows_q, cols_q, vals_q = [], [], []
    rows_u, cols_u, vals_u = [], [], []
    for i, tup in enumerate(transient):
        zeros = [j for j in range(n) if tup[j] == 0]
        nz = len(zeros)
        if max(tup) == m:
            done = tuple(v if v > 0 else 1 for v in tup)
            rows_u.append(i)
            cols_u.append(a_index[done])
            vals_u.append(p ** nz)
            if p < 1.0:
                rows_q.append(i)
                cols_q.append(t_index[(0,) * n])
                vals_q.append(1.0 - p ** nz)
            continue
        aged = tuple(v + 1 if v > 0 else 0 for v in tup)
        for filled_bits in range(2 ** nz):
            new = list(aged)
            grown = 0
            for k, pos in enumerate(zeros):
                if (filled_bits >> k) & 1:
                    new[pos] = 1
                    grown += 1
            prob = p ** grown * q ** (nz - grown)
            new = tuple(new)
            if 0 in new:
                rows_q.append(i)
                cols_q.append(t_index[new])
                vals_q.append(prob)
            else:
                rows_u.append(i)
                cols_u.append(a_index[new])
                vals_u.append(prob)

    labels = [",".join(map(str, tup)) for tup in transient + absorbing]
    dense = nt < 64
    Q = sp.coo_matrix((vals_q, (rows_q, cols_q)), shape=(nt, nt))
    U = sp.coo_matrix((vals_u, (rows_u, cols_u)), shape=(nt, na))
    if dense:
        return AbsorbingChain(labels, na, Q.toarray(), U.toarray())
    return AbsorbingChain(labels, na, Q.tocsr(), U.tocsr())


# -- classical communication ---------------------------------------------------


def double_with_cc(base: AbsorbingChain, a: float, c: int) -> AbsorbingChain:
    """Double a repeater, inserting c delay steps after a failed top-level swap.

    The two halves run independent copies of ``base``; when both complete,
    the top swap succeeds with probability a or routes through the delay
    states ``*1 .. *c`` back to the initial state.
    """
    _check_prob("a", a)
    if c < 1:
        raise ValueError("c must be >= 1; use combine_fixed for instant restarts")
    if base.n_absorbing != 1:
        raise ValueError("base chain must have a single absorbing state")
    n_states = base.n_states
    total_states = n_states * n_states + c
    if total_states ** 2 > 5 * 10 ** 8:
        raise SizeCapError(
            f"dense cc chain would need {total_states}^2 entries; "
            f"{total_states} states is beyond the supported range"
        )
    n_digits = 2 * label_digits(base.labels[0])
    kron = np.kron(base.full_matrix(), base.full_matrix())
    t = n_states * n_states - 1
    total = t + c + 1
    P = np.zeros((total, total))
    P[:t, :t] = kron[:t, :t]
    u_d = kron[:t, t]
    P[:t, t] = (1.0 - a) * u_d
    P[:t, total - 1] = a * u_d
    for i in range(c - 1):
        P[t + i, t + i + 1] = 1.0
    P[t + c - 1, 0] = 1.0
    P[total - 1, total - 1] = 1.0

    # bracketed pair labels: plain concatenation is ambiguous once delay
    # markers from earlier levels appear inside the half labels
    labels = [f"[{la}|{lb}]" for la in base.labels for lb in base.labels][:-1]
    labels += [f"*{i}" for i in range(1, c + 1)]
    labels.append("(" + "1" * n_digits + ")")
    return AbsorbingChain.from_full(P, labels, 1)


def doubling_with_cc(d: int, p: float, a: float) -> AbsorbingChain:
    """Full classical-communication chain for 2**d segments.

    Each doubling level i is given a restart delay of 2**(i-1) time units,
    the signalling distance of that level.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    chain = build_single_segment(p)
    for level in range(1, d + 1):
        chain = double_with_cc(chain, a, 2 ** (level - 1))
    return chain


def build_two_segment_with_swap_state(p: float, a: float) -> AbsorbingChain:
    """Two-segment chain keeping the both-ready state explicit.

    The extra state makes the failed-swap restart a distinct edge, which is
    what per-edge cost accounting needs; the transitions out of it take no
    distribution time.
    """
    _check_prob("p", p)
    _check_prob("a", a)
    q = 1.0 - p
    P = np.array(
        [
            [q * q, p * q, p * q, p * p, 0.0],
            [0.0, q, 0.0, p, 0.0],
            [0.0, 0.0, q, p, 0.0],
            [1.0 - a, 0.0, 0.0, 0.0, a],
            [0.0, 0.0, 0.0, 0.0, 1.0],
        ]
    )
    return AbsorbingChain.from_full(P, ("00", "01", "10", "11", "(11)"), 1)


def _from_triplets(rows, cols, vals, labels, n_absorbing) -> AbsorbingChain:
    n = len(labels)
    t = n - n_absorbing
    P = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tolil()
    for k in range(t, n):
        P[k, k] = 1.0
    return AbsorbingChain.from_full(P.tocsr(), labels, n_absorbing)
