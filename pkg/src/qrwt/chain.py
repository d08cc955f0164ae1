"""Core data model for absorbing-chain analysis of repeater waiting times.

States are labeled by ASCII strings: a segment that holds entanglement is
``1``, an empty segment is ``0``, and a parenthesized group such as
``(11)0`` marks segments that have been merged into one longer link by a
successful swap.  Every chain keeps the convention that the initial state
has index 0 and all absorbing states occupy the final indices.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

# Below this many transient states the matrices are kept dense; chains at or
# above it use CSR storage.
DENSE_LIMIT = 64

Matrix = Union[np.ndarray, sp.csr_matrix]

ROW_SUM_TOL = 1e-12


class SizeCapError(ValueError):
    """Requested construction would exceed the configured state cap."""


class SolveError(RuntimeError):
    """A linear solve or iteration failed to produce a usable result."""


class UnsupportedSchemeError(ValueError):
    """Parameter combination has no chain construction."""


@dataclass(frozen=True)
class RepeaterParams:
    """Physical and protocol parameters of one repeater scenario.

    Attributes
    ----------
    n : int
        Number of elementary segments (>= 1).
    p : float
        Per-attempt entanglement distribution success probability, in (0, 1].
    a : float
        Swap success probability, in (0, 1].
    m : int or None
        Memory cutoff in time units; ``None`` means unbounded storage.
    tau : float
        Duration of one distribution attempt (time unit).
    tau_prime : float
        Duration of a restart after a failed swap, when modeled separately.
    c : int
        Classical-communication delay in time units for restart signalling.
    """

    n: int
    p: float
    a: float = 1.0
    m: Optional[int] = None
    tau: float = 1.0
    tau_prime: float = 0.0
    c: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"segment count must be >= 1, got {self.n}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must be in (0, 1], got {self.p}")
        if not 0.0 < self.a <= 1.0:
            raise ValueError(f"a must be in (0, 1], got {self.a}")
        if self.m is not None and self.m < 1:
            raise ValueError(f"memory cutoff must be >= 1 or None, got {self.m}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.tau_prime < 0:
            raise ValueError("tau_prime must be nonnegative")
        if self.c < 0:
            raise ValueError("c must be nonnegative")


@dataclass(frozen=True)
class SchemeTree:
    """Binary tree fixing the swap order: each node merges its two subtrees."""

    left: Optional["SchemeTree"] = None
    right: Optional["SchemeTree"] = None

    def __post_init__(self):
        if (self.left is None) != (self.right is None):
            raise ValueError("node must have either two children or none")

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def n_leaves(self) -> int:
        if self.is_leaf:
            return 1
        return self.left.n_leaves + self.right.n_leaves

    @classmethod
    def leaf(cls) -> "SchemeTree":
        return cls()

    @classmethod
    def complete(cls, depth: int) -> "SchemeTree":
        """Complete tree of the doubling scheme over 2**depth segments."""
        if depth < 0:
            raise ValueError("depth must be >= 0")
        if depth == 0:
            return cls.leaf()
        sub = cls.complete(depth - 1)
        return cls(sub, sub)

    @classmethod
    def balanced(cls, n: int) -> "SchemeTree":
        """Tree splitting n segments into halves of ceil(n/2) and floor(n/2)."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if n == 1:
            return cls.leaf()
        half = (n + 1) // 2
        return cls(cls.balanced(half), cls.balanced(n - half))

    @classmethod
    def left_comb(cls, n: int) -> "SchemeTree":
        """Tree merging segments one at a time from the left."""
        if n < 1:
            raise ValueError("n must be >= 1")
        tree = cls.leaf()
        for _ in range(n - 1):
            tree = cls(tree, cls.leaf())
        return tree


class AbsorbingChain:
    """Absorbing Markov chain split into its transient and absorbing blocks.

    ``Q`` holds transition probabilities among the transient states and ``U``
    the probabilities from transient into absorbing states, so the full
    transition matrix is ``[[Q, U], [0, I]]``.  Instances are immutable;
    the arrays are marked read-only on construction.
    """

    __slots__ = ("labels", "n_absorbing", "Q", "U")

    def __init__(self, labels: Sequence[str], n_absorbing: int, Q: Matrix, U: Matrix):
        labels = tuple(labels)
        n = len(labels)
        t = n - n_absorbing
        if n_absorbing < 1:
            raise ValueError("chain needs at least one absorbing state")
        if t < 1:
            raise ValueError("chain needs at least one transient state")
        if Q.shape != (t, t):
            raise ValueError(f"Q must be {t}x{t}, got {Q.shape}")
        if U.shape != (t, n_absorbing):
            raise ValueError(f"U must be {t}x{n_absorbing}, got {U.shape}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "n_absorbing", int(n_absorbing))
        object.__setattr__(self, "Q", _freeze(Q))
        object.__setattr__(self, "U", _freeze(U))

    def __setattr__(self, name, value):
        raise AttributeError("AbsorbingChain is immutable")

    @property
    def n_states(self) -> int:
        return len(self.labels)

    @property
    def n_transient(self) -> int:
        return len(self.labels) - self.n_absorbing

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.Q)

    def q_dense(self) -> np.ndarray:
        return self.Q.toarray() if self.is_sparse else np.asarray(self.Q)

    def u_dense(self) -> np.ndarray:
        return self.U.toarray() if sp.issparse(self.U) else np.asarray(self.U)

    def u_total(self) -> np.ndarray:
        """Per-state probability of absorbing (into any absorbing state)."""
        u = self.U.sum(axis=1)
        return np.asarray(u).ravel()

    def full_matrix(self, dense: bool = True):
        """Full transition matrix [[Q, U], [0, I]]."""
        t, n1 = self.n_transient, self.n_absorbing
        if dense:
            P = np.zeros((t + n1, t + n1))
            P[:t, :t] = self.q_dense()
            P[:t, t:] = self.u_dense()
            P[t:, t:] = np.eye(n1)
            return P
        top = sp.hstack([sp.csr_matrix(self.Q), sp.csr_matrix(self.U)])
        bottom = sp.hstack(
            [sp.csr_matrix((n1, t)), sp.identity(n1, format="csr")]
        )
        return sp.vstack([top, bottom]).tocsr()

    @classmethod
    def from_full(
        cls,
        P: Matrix,
        labels: Sequence[str],
        n_absorbing: int = 1,
        force_dense: bool = False,
    ) -> "AbsorbingChain":
        """Split a full transition matrix into blocks, applying storage policy."""
        n = len(labels)
        t = n - n_absorbing
        if sp.issparse(P):
            P = P.tocsr()
            Q, U = P[:t, :t], P[:t, t:]
        else:
            P = np.asarray(P, dtype=float)
            Q, U = P[:t, :t].copy(), P[:t, t:].copy()
        if not force_dense and t >= DENSE_LIMIT:
            Q, U = sp.csr_matrix(Q), sp.csr_matrix(U)
        elif sp.issparse(Q) and (t < DENSE_LIMIT or force_dense):
            Q, U = Q.toarray(), U.toarray()
        return cls(labels, n_absorbing, Q, U)

    def dump(self, stream) -> None:
        """Write the chain in the plain-text exchange format.

        Header line ``N N1``, one line per state label, then the nonzero
        entries of the full matrix as ``row col value`` triplets in row-major
        order with 17 significant digits.
        """
        close = False
        if isinstance(stream, (str, bytes)):
            stream = open(stream, "w")
            close = True
        try:
            stream.write(f"{self.n_states} {self.n_absorbing}\n")
            for lab in self.labels:
                stream.write(lab + "\n")
            P = sp.coo_matrix(self.full_matrix(dense=False))
            order = np.lexsort((P.col, P.row))
            for i, j, v in zip(P.row[order], P.col[order], P.data[order]):
                if v != 0.0:
                    stream.write(f"{i} {j} {v:.17g}\n")
        finally:
            if close:
                stream.close()

    def dumps(self) -> str:
        buf = io.StringIO()
        self.dump(buf)
        return buf.getvalue()


def load_chain(stream) -> AbsorbingChain:
    """Read a chain written by :meth:`AbsorbingChain.dump`."""
    close = False
    if isinstance(stream, (str, bytes)):
        stream = open(stream)
        close = True
    try:
        n, n1 = map(int, stream.readline().split())
        labels = [stream.readline().rstrip("\n") for _ in range(n)]
        rows, cols, vals = [], [], []
        for line in stream:
            if not line.strip():
                continue
            i, j, v = line.split()
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(v))
        P = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        return AbsorbingChain.from_full(P, labels, n1)
    finally:
        if close:
            stream.close()


def _freeze(mat: Matrix) -> Matrix:
    if sp.issparse(mat):
        mat = mat.tocsr()
        mat.data.flags.writeable = False
        return mat
    mat = np.asarray(mat, dtype=float)
    mat.flags.writeable = False
    return mat


def validate_chain(chain: AbsorbingChain) -> list:
    """Diagnostic scan of a chain; returns a list of violations (empty if valid).

    Checks entry ranges, per-row normalization against ``ROW_SUM_TOL``, label
    uniqueness, and block shape consistency.
    """
    report = []
    t, n1 = chain.n_transient, chain.n_absorbing
    if len(set(chain.labels)) != len(chain.labels):
        report.append("duplicate state labels")
    q, u = chain.q_dense(), chain.u_dense()
    if q.shape != (t, t) or u.shape != (t, n1):
        report.append(f"inconsistent block shapes Q{q.shape} U{u.shape}")
        return report
    for name, block in (("Q", q), ("U", u)):
        bad = np.argwhere((block < 0.0) | (block > 1.0))
        for i, j in bad:
            report.append(f"{name}[{i},{j}] = {block[i, j]!r} outside [0, 1]")
    sums = q.sum(axis=1) + u.sum(axis=1)
    for i in np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]:
        report.append(f"row {i} sums to {sums[i]!r}")
    return report


# -- state label helpers ------------------------------------------------------

FULL_STATE_LIMIT = 12


def swapped_label(bits: Sequence[int]) -> str:
    """Label for a ready-pattern where every maximal run of 1s is merged.

    A run of two or more ready segments is wrapped in parentheses (it forms a
    single swapped link); isolated ready segments stay bare.
    """
    out = []
    i, n = 0, len(bits)
    while i < n:
        if not bits[i]:
            out.append("0")
            i += 1
            continue
        j = i
        while j < n and bits[j]:
            j += 1
        run = "1" * (j - i)
        out.append(f"({run})" if j - i >= 2 else run)
        i = j
    return "".join(out)


def enumerate_full_states(n: int) -> list:
    """All labels of an n-segment repeater: binary strings with every legal
    assignment of merged (parenthesized) groups of consecutive 1s.

    The initial all-zero state comes first and the fully merged state last;
    the remaining labels are in lexicographic order.  The count equals the
    (2n+1)-th Fibonacci number.
    """
    if not 1 <= n <= FULL_STATE_LIMIT:
        raise ValueError(f"n must be in [1, {FULL_STATE_LIMIT}], got {n}")

    def gen(remaining):
        if remaining == 0:
            yield ""
            return
        for rest in gen(remaining - 1):
            yield "0" + rest
            yield "1" + rest
        for size in range(2, remaining + 1):
            group = "(" + "1" * size + ")"
            for rest in gen(remaining - size):
                yield group + rest

    labels = list(gen(n))
    initial = "0" * n
    absorbing = "(" + "1" * n + ")" if n >= 2 else "1"
    middle = sorted(lab for lab in labels if lab not in (initial, absorbing))
    return [initial] + middle + [absorbing]


def label_digits(label: str) -> int:
    """Number of segments covered by a label (parentheses excluded)."""
    return sum(ch in "01" for ch in label)


@dataclass(frozen=True)
class EdgeMark:
    """Per-edge weights for expected-cost accounting.

    ``weights`` maps ``(source, target)`` state-index pairs (targets may be
    absorbing indices) to weights; every other edge carries ``default``.
    Timed transitions conventionally weigh 1 and instantaneous ones 0.
    """

    default: float = 1.0
    weights: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.default) or self.default < 0:
            raise ValueError("default weight must be finite and nonnegative")
        for edge, w in self.weights.items():
            if not math.isfinite(w) or w < 0:
                raise ValueError(f"weight for edge {edge} must be finite and nonnegative")


@dataclass
class WaitingStats:
    """Waiting-time statistics extracted from one chain.

    ``pdf_k``/``pdf_p`` hold the truncated distribution (step counts and their
    probabilities), ``tail_lambda`` and ``tail_c`` the asymptotic geometric
    law ``p_k ~ tail_c * tail_lambda**(k-1)``.
    """

    mean: float
    second_moment: float
    variance: float
    pdf_k: np.ndarray
    pdf_p: np.ndarray
    tail_lambda: float
    tail_c: float
    tail_residual: float = 0.0

    def to_record(self) -> dict:
        return {
            "mean": self.mean,
            "second_moment": self.second_moment,
            "variance": self.variance,
            "std": math.sqrt(max(self.variance, 0.0)),
            "pdf_points": int(len(self.pdf_k)),
            "pdf_mass": float(self.pdf_p.sum()) if len(self.pdf_p) else 0.0,
            "tail_lambda": self.tail_lambda,
            "tail_c": self.tail_c,
            "tail_residual": self.tail_residual,
        }
