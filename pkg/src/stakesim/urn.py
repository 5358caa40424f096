"""Honest multi-party stake evolution under proportional leader election.

Each slot elects one winner with probability equal to its current stake
fraction; the winner's stake grows by that slot's reward, which compounds
into future elections.  The module also covers proportional reward sharing
through stake pools and the no-compounding baseline where win probabilities
stay fixed at the initial fractions (the proof-of-work analogue).

Winner selection is inverse-CDF over party index order: the winner is the
smallest index whose cumulative stake exceeds draw * total.  Exactly one
uniform is consumed per slot in every scenario, including degenerate ones,
so trajectories stay aligned across configuration changes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import InvalidParameterError
from .rewards import RewardSchedule

__all__ = [
    "UrnState",
    "PoolAssignment",
    "TrajectorySample",
    "step",
    "simulate_trajectory",
    "simulate_with_pools",
    "pow_baseline",
]

_REL_TOL = 1e-9


@dataclass(frozen=True)
class UrnState:
    """Per-party stakes and their total at one slot."""

    stakes: np.ndarray
    total: float
    slot: int = 0

    def __post_init__(self) -> None:
        stakes = np.asarray(self.stakes, dtype=np.float64)
        stakes.setflags(write=False)
        object.__setattr__(self, "stakes", stakes)
        if stakes.ndim != 1 or stakes.size == 0:
            raise InvalidParameterError("stakes must be a nonempty vector")
        if np.any(stakes < 0):
            raise InvalidParameterError("stakes must be nonnegative")
        if not self.total > 0:
            raise InvalidParameterError(f"total stake must be > 0, got {self.total}")
        if abs(stakes.sum() - self.total) > _REL_TOL * self.total:
            raise InvalidParameterError(
                f"stakes sum {stakes.sum()!r} inconsistent with total {self.total!r}"
            )

    @classmethod
    def from_fractions(
        cls, fractions: Sequence[float], s0: float = 1.0
    ) -> "UrnState":
        fractions = _validated_fractions(fractions)
        return cls(stakes=fractions * s0, total=s0, slot=0)

    @property
    def fractions(self) -> np.ndarray:
        return self.stakes / self.total


@dataclass(frozen=True)
class PoolAssignment:
    """Maps each party to a reward-sharing pool.

    pool_of:        pool index per party
    pool_fractions: each pool's initial share of the total stake
    """

    pool_of: np.ndarray
    pool_fractions: np.ndarray

    def __post_init__(self) -> None:
        pool_of = np.asarray(self.pool_of, dtype=np.int64)
        pool_fractions = np.asarray(self.pool_fractions, dtype=np.float64)
        pool_of.setflags(write=False)
        pool_fractions.setflags(write=False)
        object.__setattr__(self, "pool_of", pool_of)
        object.__setattr__(self, "pool_fractions", pool_fractions)
        n_pools = pool_fractions.size
        if pool_of.ndim != 1 or pool_of.size == 0:
            raise InvalidParameterError("pool_of must be a nonempty vector")
        if np.any(pool_of < 0) or np.any(pool_of >= n_pools):
            raise InvalidParameterError("pool indices out of range")
        members = np.bincount(pool_of, minlength=n_pools)
        if np.any(members == 0):
            raise InvalidParameterError("every pool must have at least one member")
        if abs(pool_fractions.sum() - 1.0) > _REL_TOL:
            raise InvalidParameterError("pool fractions must sum to 1")

    @classmethod
    def singletons(cls, n_parties: int, fractions: Sequence[float]) -> "PoolAssignment":
        return cls(np.arange(n_parties), np.asarray(fractions, dtype=np.float64))


@dataclass(frozen=True)
class TrajectorySample:
    """Endpoint of one simulated trajectory."""

    final_fractions: np.ndarray
    winner_counts: np.ndarray


def _validated_fractions(fractions: Sequence[float]) -> np.ndarray:
    arr = np.asarray(fractions, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidParameterError("fractions must be a nonempty vector")
    if np.any(arr < 0):
        raise InvalidParameterError("fractions must be nonnegative")
    if abs(arr.sum() - 1.0) > _REL_TOL:
        raise InvalidParameterError(f"fractions must sum to 1, got {arr.sum()!r}")
    return arr


def step(state: UrnState, reward: float, draw: float) -> UrnState:
    """Advance one slot: the elected winner's stake grows by ``reward``.

    The winner is the smallest index j with cumulative stake over parties
    0..j exceeding draw * total.
    """
    if reward < 0:
        raise InvalidParameterError(f"reward must be >= 0, got {reward}")
    u = draw * state.total
    cum = 0.0
    winner = state.stakes.size - 1
    for i, s in enumerate(state.stakes):
        cum += s
        if u < cum:
            winner = i
            break
    stakes = state.stakes.copy()
    stakes[winner] += reward
    return UrnState(stakes=stakes, total=state.total + reward, slot=state.slot + 1)


def simulate_trajectory(
    schedule: RewardSchedule,
    initial_fractions: Sequence[float],
    rng: np.random.Generator,
) -> TrajectorySample:
    """Run the full schedule from the given initial stake split."""
    fractions = _validated_fractions(initial_fractions)
    stakes = fractions * schedule.initial_stake
    counts = np.zeros(fractions.size, dtype=np.int64)
    draws = rng.random(schedule.slots)
    total = _kernels.urn_run(stakes, schedule.per_slot, draws, counts)
    return TrajectorySample(final_fractions=stakes / total, winner_counts=counts)


def simulate_with_pools(
    schedule: RewardSchedule,
    pools: PoolAssignment,
    initial_fractions: Sequence[float],
    rng: np.random.Generator,
) -> TrajectorySample:
    """Run the schedule with rewards shared proportionally inside pools.

    The winning slot is attributed to a party exactly as in
    :func:`simulate_trajectory` (pool election and within-pool attribution
    collapse into one draw because member stakes tile the pool's interval);
    the reward is then split across the winner's pool in proportion to the
    members' stakes, so within-pool ratios never move.
    """
    fractions = _validated_fractions(initial_fractions)
    if pools.pool_of.size != fractions.size:
        raise InvalidParameterError("pool assignment size must match party count")
    pool_sums = np.bincount(
        pools.pool_of, weights=fractions, minlength=pools.pool_fractions.size
    )
    if not np.allclose(pool_sums, pools.pool_fractions, rtol=_REL_TOL, atol=1e-12):
        raise InvalidParameterError(
            "pool fractions inconsistent with member initial fractions"
        )
    weights = fractions / pool_sums[pools.pool_of]
    pool_totals = pool_sums * schedule.initial_stake
    counts = np.zeros(fractions.size, dtype=np.int64)
    draws = rng.random(schedule.slots)
    total = _kernels.pooled_urn_run(
        pool_totals, weights, pools.pool_of, schedule.per_slot, draws, counts
    )
    final_stakes = weights * pool_totals[pools.pool_of]
    return TrajectorySample(final_fractions=final_stakes / total, winner_counts=counts)


def pow_baseline(
    t: int,
    per_block: float,
    initial_fractions: Sequence[float],
    rng: np.random.Generator,
    s0: float = 1.0,
) -> TrajectorySample:
    """No-compounding baseline: win probabilities stay at the initial split.

    Stakes start at ``initial_fractions * s0`` and grow by ``per_block`` per
    win, but wins never feed back into the election.
    """
    if t < 0:
        raise InvalidParameterError(f"T must be >= 0, got {t}")
    if per_block < 0:
        raise InvalidParameterError(f"per-block reward must be >= 0, got {per_block}")
    if not s0 > 0:
        raise InvalidParameterError(f"S(0) must be > 0, got {s0}")
    fractions = _validated_fractions(initial_fractions)
    boundaries = np.cumsum(fractions)[:-1]
    draws = rng.random(t)
    winners = np.searchsorted(boundaries, draws, side="right")
    counts = np.bincount(winners, minlength=fractions.size).astype(np.int64)
    stakes = fractions * s0 + per_block * counts
    return TrajectorySample(
        final_fractions=stakes / (s0 + per_block * t), winner_counts=counts
    )
