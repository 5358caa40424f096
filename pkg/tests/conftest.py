"""Shared fixtures and the independent enumeration oracle.

The oracle computes the exact final-fraction variance of the two-party
election process by walking every winner sequence with its probability; it
deliberately shares no code with the closed forms it validates.
"""

from __future__ import annotations

import numpy as np
import pytest

from stakesim.montecarlo import derive_stream


def enumerate_two_party_variance(per_slot, s0: float, v0: float) -> float:
    """Exact Var of party 1's final fraction over all 2^T winner sequences.

    Walks the binary tree of outcomes breadth-first, carrying party 1's
    stake and the path probability for every branch.
    """
    per_slot = np.asarray(per_slot, dtype=np.float64)
    stakes = np.array([v0 * s0])
    probs = np.array([1.0])
    total = s0
    for reward in per_slot:
        p_win = stakes / total
        stakes = np.concatenate([stakes + reward, stakes])
        probs = np.concatenate([probs * p_win, probs * (1.0 - p_win)])
        total += reward
    fractions = stakes / total
    mean = float(np.sum(probs * fractions))
    second = float(np.sum(probs * fractions * fractions))
    return second - mean * mean


def enumerate_two_party_mean(per_slot, s0: float, v0: float) -> float:
    """Exact E of party 1's final fraction, same enumeration as the variance."""
    per_slot = np.asarray(per_slot, dtype=np.float64)
    stakes = np.array([v0 * s0])
    probs = np.array([1.0])
    total = s0
    for reward in per_slot:
        p_win = stakes / total
        stakes = np.concatenate([stakes + reward, stakes])
        probs = np.concatenate([probs * p_win, probs * (1.0 - p_win)])
        total += reward
    return float(np.sum(probs * stakes / total))


@pytest.fixture
def rng():
    return derive_stream(1234, 0)
