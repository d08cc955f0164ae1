"""Monte Carlo simulation of the doubling scheme.

This is the independent check on everything the chains produce: it samples
the recursive protocol directly.  A repeater over 2**d segments repeatedly
readies both halves (recursively), pays the slower half's waiting time, and
attempts the top swap; on failure everything restarts, optionally after the
classical-communication delay 2**(d-1) of that level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

CI99_FACTOR = 2.5758293035489004  # two-sided 99% normal quantile


def simulate_once(d: int, p: float, a: float, cc: bool, rng) -> int:
    """Single waiting-time sample, following the recursive protocol literally.

    Level 0 draws one geometric attempt count by inverse transform; higher
    levels loop: simulate both halves, add the larger count, stop when the
    swap succeeds (probability a), else add the restart delay when ``cc``.
    """
    if d < 0:
        raise ValueError("d must be >= 0")
    if not 0.0 < p <= 1.0 or not 0.0 < a <= 1.0:
        raise ValueError("p and a must be in (0, 1]")
    if d == 0:
        if p == 1.0:
            return 1
        return 1 + int(math.log(rng.random()) / math.log(1.0 - p))
    k = 0
    while True:
        k1 = simulate_once(d - 1, p, a, cc, rng)
        k2 = simulate_once(d - 1, p, a, cc, rng)
        k += max(k1, k2)
        if rng.random() < a:
            return k
        if cc:
            k += 2 ** (d - 1)


@dataclass(frozen=True)
class MCEstimate:
    """Aggregated simulation output for one parameter point."""

    trials: int
    mean: float
    variance: float
    stderr: float
    ci99: float
    hist_steps: np.ndarray
    hist_counts: np.ndarray
    restarts_mean: float
    steps_restarts_mean: float

    def to_record(self) -> dict:
        return {
            "trials": self.trials,
            "mean": self.mean,
            "variance": self.variance,
            "std": math.sqrt(self.variance),
            "stderr": self.stderr,
            "ci99": self.ci99,
            "restarts_mean": self.restarts_mean,
            "steps_restarts_mean": self.steps_restarts_mean,
        }


def estimate(
    d: int, p: float, a: float, cc: bool = False, trials: int = 100_000, seed: int = 0
) -> MCEstimate:
    """Sample statistics over many independent runs.

    Reproducible for a given seed: every trial derives its own random stream
    from (seed, trial index), so the outcome does not depend on batching.
    Alongside the step statistics the estimate carries the mean number of
    top-level restarts and the mixed moment E[steps * restarts], which tie
    into the separate-restart-cost model.
    """
    if d < 0:
        raise ValueError("d must be >= 0")
    if not 0.0 < p <= 1.0 or not 0.0 < a <= 1.0:
        raise ValueError("p and a must be in (0, 1]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    steps, restarts = _kernels.sample_batch(
        trials, d, float(p), float(a), bool(cc), np.uint64(seed)
    )
    mean = float(steps.mean())
    var = float(steps.var(ddof=1)) if trials > 1 else 0.0
    stderr = math.sqrt(var / trials)
    values, counts = np.unique(steps, return_counts=True)
    return MCEstimate(
        trials=trials,
        mean=mean,
        variance=var,
        stderr=stderr,
        ci99=CI99_FACTOR * stderr,
        hist_steps=values,
        hist_counts=counts,
        restarts_mean=float(restarts.mean()),
        steps_restarts_mean=float((steps * restarts).mean()),
    )
