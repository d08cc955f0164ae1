"""Waiting-time statistics of absorbing chains.

Everything here reduces to linear algebra on the transient block Q: the mean
absorption time solves ``(I - Q) k = 1``, the second moment solves the same
system against ``(I + Q) k``, the distribution is the iterated product
``p_k = Q**(k-1) u``, and the tail is governed by the dominant eigenvalue
of Q.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .chain import AbsorbingChain, EdgeMark, SolveError, WaitingStats

PDF_EPS_DEFAULT = 1e-9
PDF_STEP_CAP = 10 ** 7
POWER_TOL = 1e-12
POWER_ITER_CAP = 10 ** 5
TAIL_FIT_POINTS = 10


def _solve_transient(chain: AbsorbingChain, rhs: np.ndarray) -> np.ndarray:
    """Solve (I - Q) x = rhs with one step of iterative refinement."""
    rhs = np.asarray(rhs, dtype=float)
    try:
        if chain.is_sparse:
            A = (sp.identity(chain.n_transient, format="csc") - chain.Q).tocsc()
            lu = spla.splu(A)
            x = lu.solve(rhs)
            x += lu.solve(rhs - A @ x)
        else:
            A = np.eye(chain.n_transient) - chain.Q
            lu, piv = sla.lu_factor(A)
            x = sla.lu_solve((lu, piv), rhs)
            x += sla.lu_solve((lu, piv), rhs - A @ x)
    except (RuntimeError, sla.LinAlgError, ValueError) as exc:
        raise SolveError(f"transient solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolveError("transient solve produced non-finite values")
    return x


def mean_absorption(chain: AbsorbingChain) -> np.ndarray:
    """Expected steps to absorption from each transient state."""
    return _solve_transient(chain, np.ones(chain.n_transient))


def second_moment(chain: AbsorbingChain, mean: np.ndarray) -> np.ndarray:
    """Per-state second moment of the absorption time, given the mean vector."""
    rhs = mean + chain.Q @ mean
    return _solve_transient(chain, rhs)


def variance(chain: AbsorbingChain, mean: Optional[np.ndarray] = None) -> np.ndarray:
    if mean is None:
        mean = mean_absorption(chain)
    return second_moment(chain, mean) - mean ** 2


def waiting_pdf(
    chain: AbsorbingChain,
    eps: float = PDF_EPS_DEFAULT,
    max_steps: int = PDF_STEP_CAP,
) -> Tuple[np.ndarray, np.ndarray]:
    """Distribution of the absorption time from the initial state.

    Iterates the row vector e0 Q**(k-1) against the total absorption column,
    never forming matrix powers, until the accumulated mass reaches
    ``1 - eps``.  Returns the step numbers and their probabilities.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    u = chain.u_total()
    v = np.zeros(chain.n_transient)
    v[0] = 1.0
    probs = []
    mass = 0.0
    target = 1.0 - eps
    for _ in range(max_steps):
        pk = float(v @ u)
        probs.append(pk)
        mass += pk
        if mass >= target:
            ks = np.arange(1, len(probs) + 1)
            return ks, np.array(probs)
        v = v @ chain.Q
    raise SolveError(
        f"pdf truncation not reached in {max_steps} steps (mass {mass!r})"
    )


def dominant_eigenvalue(
    chain: AbsorbingChain,
    tol: float = POWER_TOL,
    max_iter: int = POWER_ITER_CAP,
) -> float:
    """Largest eigenvalue of Q by power iteration with a Rayleigh-quotient test."""
    t = chain.n_transient
    x = np.full(t, 1.0 / np.sqrt(t))
    lam = 0.0
    for _ in range(max_iter):
        y = chain.Q @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        lam_new = float(x @ y) / float(x @ x)
        x = y / norm
        if abs(lam_new - lam) <= tol:
            return lam_new
        lam = lam_new
    raise SolveError(f"power iteration did not converge in {max_iter} iterations")


def geometric_tail(
    chain: AbsorbingChain,
    pdf: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    eps: float = PDF_EPS_DEFAULT,
) -> Tuple[float, float, float]:
    """Asymptotic law p_k ~ c1 * lambda1**(k-1) of the waiting-time tail.

    lambda1 comes from power iteration; c1 is fitted geometrically on the
    last few points of the (given or freshly computed) pdf prefix.  Returns
    ``(lambda1, c1, residual)`` where the residual is the largest relative
    misfit over the fitted points.
    """
    lam = dominant_eigenvalue(chain)
    if pdf is None:
        pdf = waiting_pdf(chain, eps=eps)
    ks, ps = pdf
    if lam <= 0.0:
        return 0.0, float(ps[0]) if len(ps) else 0.0, 0.0
    npts = min(TAIL_FIT_POINTS, len(ks))
    ks_fit = ks[-npts:]
    ps_fit = ps[-npts:]
    good = ps_fit > 0.0
    if not np.any(good):
        raise SolveError("pdf prefix has no positive tail points to fit")
    log_r = np.log(ps_fit[good]) - (ks_fit[good] - 1) * np.log(lam)
    c1 = float(np.exp(np.mean(log_r)))
    residual = float(np.max(np.abs(np.exp(log_r) / c1 - 1.0)))
    return lam, c1, residual


def pgf_eval(chain: AbsorbingChain, t: float) -> float:
    """Probability generating function of the waiting time, evaluated at t.

    Solves ``(I - t Q) x = t u`` and returns the initial-state component;
    t = 1 is answered by the normalization identity g(1) = 1 instead of a
    near-singular solve.
    """
    if chain.n_absorbing != 1:
        raise ValueError("pgf is defined for single-absorbing chains")
    if abs(t) > 1.0:
        raise ValueError(f"|t| must be <= 1, got {t}")
    if t == 1.0:
        return 1.0
    u = chain.u_total()
    try:
        if chain.is_sparse:
            A = (sp.identity(chain.n_transient, format="csc") - t * chain.Q).tocsc()
            x = spla.splu(A).solve(t * u)
        else:
            A = np.eye(chain.n_transient) - t * chain.q_dense()
            x = sla.solve(A, t * u)
    except (RuntimeError, sla.LinAlgError, ValueError) as exc:
        raise SolveError(f"pgf solve failed: {exc}") from exc
    return float(x[0])


def expected_visits(chain: AbsorbingChain) -> np.ndarray:
    """Expected number of visits to each transient state, starting from state 0."""
    e0 = np.zeros(chain.n_transient)
    e0[0] = 1.0
    try:
        if chain.is_sparse:
            A = (sp.identity(chain.n_transient, format="csc") - chain.Q).T.tocsc()
            w = spla.splu(A).solve(e0)
        else:
            A = (np.eye(chain.n_transient) - chain.q_dense()).T
            w = sla.solve(A, e0)
    except (RuntimeError, sla.LinAlgError, ValueError) as exc:
        raise SolveError(f"visit-count solve failed: {exc}") from exc
    return w


def edge_expected_counts(chain: AbsorbingChain, marks: EdgeMark) -> float:
    """Expected total edge weight accumulated before absorption.

    Each edge (i, j) is traversed ``visits[i] * P[i, j]`` times in
    expectation; the result is the weighted sum over all edges, with
    unlisted edges at the default weight.  With all weights 1 this is the
    mean absorption time; weighting timed transitions by tau and restart
    transitions by tau' yields mixed-time-scale expected costs.
    """
    w = expected_visits(chain)
    total = marks.default * float(w.sum())
    if not marks.weights:
        return total
    q = chain.q_dense()
    u = chain.u_dense()
    t = chain.n_transient
    for (i, j), weight in marks.weights.items():
        if not 0 <= i < t or not 0 <= j < chain.n_states:
            raise ValueError(f"edge ({i}, {j}) outside chain")
        pij = q[i, j] if j < t else u[i, j - t]
        total += w[i] * pij * (weight - marks.default)
    return total


def waiting_stats(chain: AbsorbingChain, eps: float = PDF_EPS_DEFAULT) -> WaitingStats:
    """Bundle of mean, second moment, variance, pdf prefix, and tail fit."""
    k = mean_absorption(chain)
    k2 = second_moment(chain, k)
    ks, ps = waiting_pdf(chain, eps=eps)
    lam, c1, resid = geometric_tail(chain, pdf=(ks, ps))
    return WaitingStats(
        mean=float(k[0]),
        second_moment=float(k2[0]),
        variance=float(k2[0] - k[0] ** 2),
        pdf_k=ks,
        pdf_p=ps,
        tail_lambda=lam,
        tail_c=c1,
        tail_residual=resid,
    )
