"""State-space compression of repeater chains via lumpable partitions.

A partition is lumpable when every state of a group sends the same total
probability into each other group; the quotient chain then reproduces the
absorption-time statistics of the original exactly.  Two scheme-specific
compressions are provided: the (n+1)-state chain counting ready segments
under deterministic swapping, and the unordered-pair quotient of the
doubling scheme, which reaches 32 segments with 26796 states instead of
2**32.

For the largest quotient the transition matrix is structurally full, so it
is never materialized for solving: its action on a vector is two small
matrix products (the pair matrix is the symmetric square of the previous
level's matrix, up to rank-one swap corrections), and the moments follow
either from a Krylov solve on that operator or from composing the half
chain's survival function.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, lgmres
from scipy.stats import binom as binom_dist

from . import analysis
from .builders import build_fixed_scheme
from .chain import AbsorbingChain, SchemeTree, SolveError

LUMP_TOL = 1e-12

DOUBLING_LEVEL_MAX = 5
DOUBLING_STATE_COUNTS = (3, 6, 21, 231, 26796)

_SURVIVAL_RTOL = 1e-13
_SURVIVAL_CAP = 2 * 10 ** 7


class LumpabilityError(ValueError):
    """The partition does not satisfy the lumpability condition."""


@dataclass(frozen=True)
class Partition:
    """Disjoint groups of state indices covering a chain.

    The initial state must form group 0 by itself and every absorbing state
    must sit alone in one of the trailing groups, preserving the global
    state-ordering convention in the quotient.
    """

    groups: Tuple[Tuple[int, ...], ...]

    def __init__(self, groups: Sequence[Sequence[int]]):
        object.__setattr__(
            self, "groups", tuple(tuple(int(i) for i in g) for g in groups)
        )
        seen = set()
        for g in self.groups:
            if not g:
                raise ValueError("empty group in partition")
            if seen & set(g):
                raise ValueError("groups must be disjoint")
            seen.update(g)

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls([(i,) for i in range(n)])

    def validate_for(self, chain: AbsorbingChain) -> None:
        covered = sorted(i for g in self.groups for i in g)
        if covered != list(range(chain.n_states)):
            raise ValueError("partition must cover every state exactly once")
        if self.groups[0] != (0,):
            raise ValueError("initial state must be alone in group 0")
        t = chain.n_transient
        for k, g in enumerate(self.groups):
            has_absorbing = any(i >= t for i in g)
            if has_absorbing and len(g) != 1:
                raise ValueError(f"absorbing state in non-singleton group {k}")
            if has_absorbing and k < len(self.groups) - chain.n_absorbing:
                raise ValueError("absorbing groups must come last")


def _group_label(labels: Sequence[str]) -> str:
    if len(labels) == 1:
        return labels[0]
    if len(labels) <= 3:
        return "{" + "|".join(labels) + "}"
    return "{" + labels[0] + f"|+{len(labels) - 1}" + "}"


def lump(chain: AbsorbingChain, partition: Partition, atol: float = LUMP_TOL) -> AbsorbingChain:
    """Quotient chain over a verified lumpable partition.

    For every pair of groups the outgoing probability mass is compared
    across the source group's members; disagreement beyond ``atol`` raises
    :class:`LumpabilityError` naming the offending groups and states.
    """
    partition.validate_for(chain)
    n = chain.n_states
    m = len(partition.groups)
    P = chain.full_matrix(dense=not chain.is_sparse)
    cols, rows = [], []
    for j, g in enumerate(partition.groups):
        cols.extend([j] * len(g))
        rows.extend(g)
    C = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, m)).tocsr()
    G = P @ C
    if sp.issparse(G):
        G = G.toarray()
    quotient = np.empty((m, m))
    for i, g in enumerate(partition.groups):
        ref = G[g[0]]
        for s in g[1:]:
            dev = np.abs(G[s] - ref)
            j = int(np.argmax(dev))
            if dev[j] > atol:
                raise LumpabilityError(
                    f"groups ({i} -> {j}): states {g[0]} and {s} send "
                    f"{ref[j]!r} vs {G[s, j]!r}"
                )
        quotient[i] = ref
    n_absorbing = chain.n_absorbing
    labels = [_group_label([chain.labels[s] for s in g]) for g in partition.groups]
    return AbsorbingChain.from_full(quotient, labels, n_absorbing)


def deterministic_lumped(n: int, p: float) -> AbsorbingChain:
    """Ready-segment-count chain of n segments with deterministic swapping.

    All states with i ready segments are equivalent, so n+1 states suffice:
    ``P(S_i -> S_j) = C(n-i, j-i) p**(j-i) q**(n-j)``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")
    P = np.zeros((n + 1, n + 1))
    for i in range(n):
        js = np.arange(i, n + 1)
        P[i, i:] = binom_dist.pmf(js - i, n - i, p)
    P[n, n] = 1.0
    labels = [f"S{i}" for i in range(n + 1)]
    return AbsorbingChain.from_full(P, labels, 1)


# -- doubling-scheme quotient ---------------------------------------------------


def _two_segment_lumped_full(p: float, a: float) -> np.ndarray:
    chain = build_fixed_scheme(SchemeTree.complete(1), p, a)
    small = lump(chain, Partition([(0,), (1, 2), (3,)]))
    return small.full_matrix()


def _pair_double(P: np.ndarray, a: float) -> np.ndarray:
    """Unordered-pair quotient of the doubled chain, with swap rerouting.

    The two halves evolve independently, so ordered pairs carry product
    probabilities and the states (i, j) and (j, i) are interchangeable.  For
    sources i != j the pair transition is
    ``P(i,k) P(j,l) + [k != l] P(i,l) P(j,k)`` and for i = j it is
    ``P(i,k) P(i,l)`` doubled when k != l; both come out of one symmetrized
    outer product.  The final column rerouting accounts for the top swap.
    """
    n = P.shape[0]
    iu, ju = np.triu_indices(n)
    m = len(iu)
    di = np.diag_indices(n)
    out = np.empty((m, m))
    for r in range(m):
        T = np.outer(P[iu[r]], P[ju[r]])
        T = T + T.T
        T[di] *= 0.5
        out[r] = T[iu, ju]
    out[:-1, 0] += (1.0 - a) * out[:-1, -1]
    out[:-1, -1] *= a
    out[-1] = 0.0
    out[-1, -1] = 1.0
    return out


def doubling_lumped(d: int, p: float, a: float) -> AbsorbingChain:
    """Symmetry-compressed chain of the doubling scheme over 2**d segments.

    Level 1 is the three-state quotient of the two-segment chain; each
    further level keeps one state per unordered pair of the previous
    level's states.  State counts grow as N -> N(N+1)/2: 3, 6, 21, 231,
    26796 for d = 1..5.  The matrices are structurally full and therefore
    stored dense; at d = 5 that is a ~5.7 GB allocation, so for statistics
    prefer :func:`doubling_stats`, which never materializes that level.
    """
    if not 1 <= d <= DOUBLING_LEVEL_MAX:
        raise ValueError(f"d must be in [1, {DOUBLING_LEVEL_MAX}], got {d}")
    P = _two_segment_lumped_full(p, a)
    labels = ["00", "{01|10}", "(11)"]
    for _ in range(d - 1):
        P = _pair_double(P, a)
        n_prev = len(labels)
        iu, ju = np.triu_indices(n_prev)
        labels = [f"[{i},{j}]" for i, j in zip(iu, ju)]
    return AbsorbingChain.from_full(P, labels, 1, force_dense=True)


@dataclass(frozen=True)
class MomentStats:
    """First two absorption-time moments from the initial state."""

    mean: float
    second_moment: float
    variance: float

    @property
    def std(self) -> float:
        return float(np.sqrt(max(self.variance, 0.0)))


def doubling_stats(d: int, p: float, a: float) -> MomentStats:
    """Waiting-time moments of the doubling scheme over 2**d segments.

    Levels up to 4 are solved directly on the materialized quotient chain.
    Level 5 is composed from the level-4 chain: one doubling round is the
    maximum of two independent half waiting times, and the number of rounds
    is geometric in the swap probability, which fixes the first two moments
    of the compound sum without ever forming the 26796-state matrix.
    """
    if not 1 <= d <= DOUBLING_LEVEL_MAX:
        raise ValueError(f"d must be in [1, {DOUBLING_LEVEL_MAX}], got {d}")
    if d <= 4:
        chain = doubling_lumped(d, p, a)
        k = analysis.mean_absorption(chain)
        k2 = analysis.second_moment(chain, k)
        return MomentStats(float(k[0]), float(k2[0]), float(k2[0] - k[0] ** 2))
    half = doubling_lumped(d - 1, p, a)
    return compound_doubling_stats(half, a)


def compound_doubling_stats(half: AbsorbingChain, a: float) -> MomentStats:
    """Moments of one doubling level built on top of the ``half`` chain.

    Uses the compound-geometric structure of the doubling round: with M the
    maximum of two independent half waiting times and G ~ Geom(a) rounds,
    the level's waiting time is the sum of G copies of M.  E[M] and E[M^2]
    are accumulated from the half chain's survival function
    ``s_k = P(K > k)`` via ``E[M] = sum (2 s_k - s_k^2)`` and
    ``E[M^2] = sum (2k+1)(2 s_k - s_k^2)``, with the geometric tail beyond
    the truncation point added in closed form.
    """
    if not 0.0 < a <= 1.0:
        raise ValueError(f"a must be in (0, 1], got {a}")
    Q = half.q_dense()
    lam = analysis.dominant_eigenvalue(half)
    v = np.zeros(half.n_transient)
    v[0] = 1.0
    em = 0.0
    em2 = 0.0
    k = 0
    s = 1.0
    while True:
        term = 2.0 * s - s * s
        em += term
        em2 += (2.0 * k + 1.0) * term
        if lam <= 0.0:
            tail_gone = s == 0.0
        else:
            tail_gone = 2.0 * s * lam / (1.0 - lam) <= _SURVIVAL_RTOL * em
        if tail_gone:
            break
        if k >= _SURVIVAL_CAP:
            raise SolveError(f"survival series not converged in {k} terms")
        v = v @ Q
        s = float(v.sum())
        k += 1
    if lam > 0.0 and s > 0.0:
        x, x2 = lam, lam * lam
        em += 2.0 * s * x / (1.0 - x) - s * s * x2 / (1.0 - x2)
        em2 += 2.0 * s * ((2 * k + 1) * x / (1 - x) + 2 * x / (1 - x) ** 2)
        em2 -= s * s * ((2 * k + 1) * x2 / (1 - x2) + 2 * x2 / (1 - x2) ** 2)
    var_m = em2 - em * em
    mean = em / a
    var = var_m / a + (1.0 - a) / (a * a) * em * em
    return MomentStats(mean, var + mean * mean, var)


def pair_operator(half_full: np.ndarray, a: float):
    """Implicit transient block of the next doubling level.

    Returns ``(apply_A, u_vec, m)`` where ``apply_A`` computes
    ``(I - Q) x`` for the pair quotient built on the given half-chain matrix,
    ``u_vec`` is the absorption column, and ``m`` the number of pair states.
    A vector over pairs is lifted to a symmetric matrix X, pushed through
    ``P X P^T`` (the symmetric-square action), and gathered back; the swap
    rerouting enters as a rank-one correction.
    """
    P = np.asarray(half_full, dtype=float)
    n = P.shape[0]
    iu, ju = np.triu_indices(n)
    m = len(iu)
    di = np.diag_indices(n)
    u_half = P[:, -1].copy()
    uu = np.outer(u_half, u_half)[iu, ju]

    def apply_sym_square(xh: np.ndarray) -> np.ndarray:
        X = np.zeros((n, n))
        X[iu, ju] = xh
        X = X + X.T
        X[di] *= 0.5
        return (P @ X @ P.T)[iu, ju]

    def apply_A(x: np.ndarray) -> np.ndarray:
        xh = np.concatenate([x, [0.0]])
        y = apply_sym_square(xh)[:-1]
        y += (1.0 - a) * uu[:-1] * x[0]
        return x - y

    return apply_A, a * uu[:-1], m


def doubling_stats_matrix_free(
    d: int, p: float, a: float, rtol: float = 1e-12, maxiter: int = 2000
) -> MomentStats:
    """Moments of the 2**d-segment doubling scheme via the implicit pair system.

    Solves ``(I - Q) k = 1`` for the level-d quotient without materializing
    it, using a Krylov method on the symmetric-square operator; memory stays
    at the size of the level-(d-1) chain.  Mostly useful at d = 5, where the
    explicit matrix would be ~5.7 GB.
    """
    if not 2 <= d <= DOUBLING_LEVEL_MAX:
        raise ValueError(f"d must be in [2, {DOUBLING_LEVEL_MAX}], got {d}")
    half = doubling_lumped(d - 1, p, a)
    apply_A, _, m = pair_operator(half.full_matrix(), a)
    A = LinearOperator((m - 1, m - 1), matvec=apply_A)
    ones = np.ones(m - 1)
    k, info = lgmres(A, ones, rtol=rtol, atol=0.0, maxiter=maxiter)
    if info != 0:
        raise SolveError(f"pair-system solve did not converge (info={info})")
    k2, info = lgmres(A, 2.0 * k - ones, rtol=rtol, atol=0.0, maxiter=maxiter, x0=k)
    if info != 0:
        raise SolveError(f"pair-system second-moment solve did not converge (info={info})")
    return MomentStats(float(k[0]), float(k2[0]), float(k2[0] - k[0] ** 2))


def doubling_state_count(d: int) -> int:
    """Size of the compressed doubling chain at level d (N -> N(N+1)/2 from 3)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    n = 3
    for _ in range(d - 1):
        n = n * (n + 1) // 2
    return n
