"""Closed-form means, approximations, and error metrics.

These evaluators are independent of the Markov-chain machinery and serve as
oracles for it (and vice versa).  The alternating sums behind the
deterministic-swap means cancel catastrophically for many segments or small
success probability, so those regimes are rerouted through an equivalent
survival-function sum that only adds positive terms.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

import numpy as np

EULER_GAMMA = 0.577215664901533
ATTENUATION_KM = 22.0

# Beyond either bound the alternating form of the deterministic-swap mean
# loses double precision; switch to the survival sum.  The cancellation is
# roughly C(n, n/2) * eps relative, which crosses 1e-10 near n = 25.
ALTERNATING_N_MAX = 24
ALTERNATING_P_MIN = 0.02

_SURVIVAL_BLOCK = 4096
_SURVIVAL_CAP = 5 * 10 ** 7


def _check_prob(name: str, value: float) -> None:
    if not 0.0 < value <= 1.0:
        raise ValueError(f"{name} must be in (0, 1], got {value}")


def transmission_probability(l0_km: float, l_att_km: float = ATTENUATION_KM) -> float:
    """Fiber transmission e**(-L0/L_att) of one segment of length L0."""
    if l0_km < 0:
        raise ValueError("segment length must be nonnegative")
    return math.exp(-l0_km / l_att_km)


def k2_cutoff(p: float, a: float, m: Optional[int] = None) -> float:
    """Mean waiting time of two segments with swap probability a and cutoff m.

        (1 + 2q - 2q**(m+1)) / (a p (1 + q - 2q**(m+1)))

    ``m=None`` means unbounded storage, dropping the q**(m+1) terms.
    """
    _check_prob("p", p)
    _check_prob("a", a)
    q = 1.0 - p
    if m is None or math.isinf(m):
        tail = 0.0
    else:
        if m < 1:
            raise ValueError(f"cutoff must be >= 1 or None, got {m}")
        tail = 2.0 * q ** (m + 1)
    return (1.0 + 2.0 * q - tail) / (a * p * (1.0 + q - tail))


def kn_det(p: float, n: int) -> float:
    """Mean waiting time of n segments with deterministic swapping.

    Evaluates ``sum_j (-1)**(j+1) C(n, j) / (1 - q**j)``; outside the safe
    range of the alternating form the identity
    ``sum_{k>=0} (1 - (1 - q**k)**n)`` is summed instead.
    """
    _check_prob("p", p)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if p == 1.0:
        return 1.0
    q = 1.0 - p
    if n > ALTERNATING_N_MAX or p < ALTERNATING_P_MIN:
        return _survival_sum(q, n)
    return sum(
        (-1) ** (j + 1) * math.comb(n, j) / (1.0 - q ** j) for j in range(1, n + 1)
    )


def _survival_sum(q: float, n: int) -> float:
    log_q = math.log(q)
    total = 1.0  # k = 0 term
    k = 1
    while k < _SURVIVAL_CAP:
        ks = np.arange(k, k + _SURVIVAL_BLOCK, dtype=float)
        terms = -np.expm1(n * np.log1p(-np.exp(ks * log_q)))
        total += float(terms.sum())
        if terms[-1] < 1e-16 * max(total, 1.0):
            return total
        k += _SURVIVAL_BLOCK
    raise RuntimeError(f"survival sum did not converge within {_SURVIVAL_CAP} terms")


def kn_det_cutoff(p: float, n: int, m: int) -> float:
    """Mean waiting time of n segments, deterministic swapping, memory cutoff m.

    The bracket ``m - sum_{i<m} (1 - q**i)**n`` is accumulated as
    ``1 + sum_{i<m} (1 - (1 - q**i)**n)`` so that large cutoffs do not cancel.
    """
    _check_prob("p", p)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if m < 1:
        raise ValueError(f"cutoff must be >= 1, got {m}")
    if p == 1.0:
        return 1.0
    q = 1.0 - p
    log_q = math.log(q)
    i = np.arange(1, m, dtype=float)
    bracket = 1.0 + float((-np.expm1(n * np.log1p(-np.exp(i * log_q)))).sum())
    one_minus_qn = -math.expm1(n * log_q)
    num = -math.expm1(n * math.log1p(-q ** m)) + one_minus_qn * bracket
    den = math.exp(n * math.log1p(-(q ** (m + 1)))) - math.exp(
        n * (log_q + math.log1p(-q ** m))
    )
    return num / den


def small_repeater_mean(scheme: str, p: float, a: float) -> float:
    """Explicit rational mean for the small repeaters: fixed3, dyn3, doubling4."""
    _check_prob("p", p)
    _check_prob("a", a)
    if scheme == "fixed3":
        num = (
            a * a * (p ** 4 - 5 * p ** 3 + 10 * p * p - 10 * p + 4)
            + a * (2 * p ** 4 - 9 * p ** 3 + 17 * p * p - 16 * p + 6)
            - 4 * p ** 3 + 16 * p * p - 23 * p + 12
        )
        den = (
            a * a * p * (2 - p)
            * (a * (-p ** 3 + 3 * p * p - 4 * p + 2) + 2 * p * p - 5 * p + 4)
        )
    elif scheme == "dyn3":
        num = (
            a * a * (p ** 4 - 4 * p ** 3 + 6 * p * p - 5 * p + 2)
            + a * (2 * p ** 4 - 10 * p ** 3 + 21 * p * p - 22 * p + 9)
            - 4 * p ** 3 + 16 * p * p - 22 * p + 11
        )
        den = (
            a * a * p * (2 - p)
            * (a * (-p ** 3 + 2 * p * p - 2 * p + 1) + 3 * p * p - 7 * p + 5)
        )
    elif scheme == "doubling4":
        num = (
            2 * a * a * p ** 4 * (p - 1) * (2 * p - 3)
            - a * (20 * p ** 5 - 72 * p ** 4 + 93 * p ** 3 - 53 * p * p + 10 * p + 4)
            + 3 * (3 - 2 * p) ** 2 * (2 * p * p - 3 * p + 2)
        )
        den = (
            a * a * p * (2 - p)
            * (a * p * p - (a + 2) * p + 3)
            * (-a * p ** 3 + 4 * p * p - 6 * p + 4)
        )
    else:
        raise ValueError(f"unknown scheme {scheme!r}; use fixed3, dyn3 or doubling4")
    return num / den


def asymmetric_mean(ready: Iterable[int], p_list: Sequence[float]) -> float:
    """Mean waiting time with per-segment probabilities, given already-ready segments.

    Sums ``(-1)**(|J|+1) / (1 - prod_{i in J} q_i)`` over the nonempty
    subsets J of the not-yet-ready segments.
    """
    p_list = list(p_list)
    n = len(p_list)
    if n == 0:
        raise ValueError("p_list must not be empty")
    if n > 25:
        raise ValueError("subset sum limited to 25 segments")
    for i, pi in enumerate(p_list):
        _check_prob(f"p[{i}]", pi)
    ready = frozenset(ready)
    if not ready <= frozenset(range(n)):
        raise ValueError("ready-set indices must be within range(len(p_list))")
    pending = [i for i in range(n) if i not in ready]
    q = [1.0 - pi for pi in p_list]
    total = 0.0
    for bits in range(1, 2 ** len(pending)):
        q_j = 1.0
        size = 0
        for k, idx in enumerate(pending):
            if (bits >> k) & 1:
                q_j *= q[idx]
                size += 1
        total += (-1.0) ** (size + 1) / (1.0 - q_j)
    return total


def approx_doubling(p: float, a: float, d: int) -> float:
    """Widely used doubling estimate (3 / 2a)**d / p for 2**d segments."""
    _check_prob("p", p)
    _check_prob("a", a)
    if d < 0:
        raise ValueError(f"d must be >= 0, got {d}")
    return (3.0 / (2.0 * a)) ** d / p


def harmonic_approx(p: float, n: int) -> float:
    """Small-p deterministic-swap estimate (gamma + ln n + 1/2n) / p."""
    _check_prob("p", p)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return (EULER_GAMMA + math.log(n) + 0.5 / n) / p


NESTED_FACTORS = (2, 4, 8, 16, 32)


def nested_approx(schedule: Sequence[int], p: float, a: float) -> float:
    """Mean estimate for a large repeater by nesting exact sub-repeater means.

    The innermost factor (first in the schedule) is evaluated exactly at
    (p, a); each following factor treats the previous repeater as a single
    segment with effective probability 1/mean.  ``[2, 8]`` therefore
    estimates 16 segments by an 8-segment repeater whose segments are
    2-segment repeaters.
    """
    _check_prob("p", p)
    _check_prob("a", a)
    if not schedule:
        raise ValueError("schedule must not be empty")
    for f in schedule:
        if f not in NESTED_FACTORS:
            raise ValueError(f"no exact backend for factor {f}; use one of {NESTED_FACTORS}")
    mean = _exact_doubling_mean(schedule[0], p, a)
    for f in schedule[1:]:
        mean = _exact_doubling_mean(f, 1.0 / mean, a)
    return mean


def _exact_doubling_mean(n: int, p: float, a: float) -> float:
    if n == 2:
        return k2_cutoff(p, a)
    if n == 4:
        return small_repeater_mean("doubling4", p, a)
    from .lumping import doubling_stats

    return doubling_stats(n.bit_length() - 1, p, a).mean


def relative_error(approx: float, exact: float) -> float:
    """Relative deviation in percent: 100 |approx/exact - 1|."""
    if exact <= 0:
        raise ValueError(f"exact value must be positive, got {exact}")
    return 100.0 * abs(approx / exact - 1.0)
