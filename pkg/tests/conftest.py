"""Shared oracles: hand-written reference matrices and label permutation."""

import numpy as np
import pytest


def permuted_full(chain, label_order):
    """Full transition matrix of `chain` reordered to the given label order."""
    P = chain.full_matrix()
    idx = [chain.labels.index(lab) for lab in label_order]
    return P[np.ix_(idx, idx)]


def two_segment_matrix(p, a):
    """Reduced two-segment chain over (00, 01, 10, merged), written out by hand."""
    q = 1.0 - p
    return np.array(
        [
            [q * q + (1 - a) * p * p, p * q, p * q, a * p * p],
            [(1 - a) * p, q, 0.0, a * p],
            [(1 - a) * p, 0.0, q, a * p],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


THREE_SEGMENT_ORDER = ["000", "001", "010", "0(11)", "100", "101", "110", "(111)"]


def three_segment_fixed_matrix(p, a):
    """Fixed-scheme three-segment chain (last pair first), hand-written.

    Row/column order follows THREE_SEGMENT_ORDER.
    """
    q = 1.0 - p
    return np.array(
        [
            [q**3 + (1-a)*p*p*q + a*(1-a)*p**3, p*q*q, p*q*q, a*p*p*q,
             p*q*q + (1-a)*p**3, p*p*q, p*p*q, a*a*p**3],
            [(1-a)*p*q + a*(1-a)*p*p, q*q, 0, a*p*q, (1-a)*p*p, p*q, 0, a*a*p*p],
            [(1-a)*p*q + a*(1-a)*p*p, 0, q*q, a*p*q, (1-a)*p*p, 0, p*q, a*a*p*p],
            [(1-a)*p, 0, 0, q, 0, 0, 0, a*p],
            [a*(1-a)*p*p, 0, 0, 0, q*q + (1-a)*p*p, p*q, p*q, a*a*p*p],
            [a*(1-a)*p, 0, 0, 0, (1-a)*p, q, 0, a*a*p],
            [a*(1-a)*p, 0, 0, 0, (1-a)*p, 0, q, a*a*p],
            [0, 0, 0, 0, 0, 0, 0, 1.0],
        ]
    )


DYNAMICAL_ORDER = ["000", "001", "010", "0(11)", "100", "101", "(11)0", "(111)"]


def three_segment_dynamical_matrix(p, a):
    """Dynamical three-segment chain, hand-written in DYNAMICAL_ORDER."""
    q = 1.0 - p
    return np.array(
        [
            [q**3 + 2*(1-a)*p*p*q + a*(1-a)*p**3, p*q*q + (1-a)*p**3, p*q*q,
             a*p*p*q, p*q*q, p*p*q, a*p*p*q, a*a*p**3],
            [(1-a)*p*q + a*(1-a)*p*p, q*q + (1-a)*p*p, 0, a*p*q, 0, p*q, 0, a*a*p*p],
            [2*(1-a)*p*q + a*(1-a)*p*p, (1-a)*p*p, q*q, a*p*q, 0, 0, a*p*q, a*a*p*p],
            [(1-a)*p, 0, 0, q, 0, 0, 0, a*p],
            [(1-a)*p*q + a*(1-a)*p*p, (1-a)*p*p, 0, 0, q*q, p*q, a*p*q, a*a*p*p],
            [a*(1-a)*p, (1-a)*p, 0, 0, 0, q, 0, a*a*p],
            [(1-a)*p, 0, 0, 0, 0, 0, q, a*p],
            [0, 0, 0, 0, 0, 0, 0, 1.0],
        ]
    )


def two_segment_cc_matrix(p, a):
    """Two-segment chain with one classical-communication delay state."""
    q = 1.0 - p
    return np.array(
        [
            [q * q, p * q, p * q, (1 - a) * p * p, a * p * p],
            [0, q, 0, (1 - a) * p, a * p],
            [0, 0, q, (1 - a) * p, a * p],
            [1, 0, 0, 0, 0],
            [0, 0, 0, 0, 1.0],
        ]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
