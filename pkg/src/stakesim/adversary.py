"""Chain simulator with one honest party and one withhold-and-release party.

Wall-clock time and block slots share the index t = 1..T: slot t's leader is
elected at tick t with probability proportional to stake implied by the
currently published main chain (withheld blocks earn nothing and do not
compound).  Honest wins are published immediately.  The strategic party
instead grows private side chains and releases them through two actions:

* match  - on an honest win, if some side chain is at least as long as the
  main chain, release enough of the deepest such chain to equal the main
  chain's length; the honest side then builds on the released branch with
  probability gamma, in which case the published blocks above the branch
  point are replaced one-for-one by the withheld blocks.  The matched chain
  survives, every other side chain is discarded.
* override - on an adversarial win, if the (single) side chain branches at
  the current tip with a lead of at least k blocks, release the earliest
  withheld block, lengthening the main chain by one adversarial block.

Otherwise the party waits.  Side chains that fall behind the main chain, or
whose branch point drops more than ``delta`` slots below the tip (the
adoption window honest nodes enforce), are discarded.  Releases stay covert:
discarding all rival chains on every release means no two conflicting
withheld blocks for the same slot are ever published.

The per-step logic here is the reference implementation; bulk trajectories
run the compiled replica in :mod:`stakesim._kernels` via
:func:`run_strategy`, which reproduces it draw for draw.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import _kernels
from .errors import InvalidParameterError
from .rewards import RewardSchedule

__all__ = [
    "Party",
    "Action",
    "SideChain",
    "ChainState",
    "StrategyOutcome",
    "elect_leader",
    "mo_k_step",
    "run_strategy",
    "reward_vector",
    "make_scratch",
]


class Party(enum.Enum):
    HONEST = "honest"
    ADVERSARY = "adversary"


class Action(enum.Enum):
    MATCH = "match"
    OVERRIDE = "override"
    WAIT = "wait"


@dataclass
class SideChain:
    """A private fork: the last shared slot plus the withheld blocks beyond it.

    ``prefix_blocks`` caches how many main-chain blocks sit at or below the
    branch point, so the fork's total length is prefix_blocks + len(blocks).
    """

    branch_point: int
    blocks: list[int]
    prefix_blocks: int

    @property
    def length(self) -> int:
        return self.prefix_blocks + len(self.blocks)

    @property
    def height(self) -> int:
        return self.blocks[-1] if self.blocks else self.branch_point


@dataclass
class ChainState:
    """Main-chain occupancy, the private fork set, and election stakes.

    ``main_owner`` maps slot -> winning party for published blocks; absent
    slots are empty (withheld or displaced).  Election stakes are implied by
    the published chain: each side's initial stake plus the rewards of its
    on-chain blocks, tracked in ``honest_published``/``adversary_published``.
    ``reward_of`` gives the reward attached to each block slot (entry 0
    unused).
    """

    clock: int
    gamma: float
    delta: int
    k: int
    reward_of: np.ndarray
    honest_base: float
    adversary_base: float
    honest_published: float = 0.0
    adversary_published: float = 0.0
    main_owner: dict[int, Party] = field(default_factory=dict)
    side_chains: list[SideChain] = field(default_factory=list)
    length: int = 0
    height: int = 0
    action_counts: dict[str, int] = field(
        default_factory=lambda: {a.value: 0 for a in Action}
    )

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidParameterError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.delta < 1:
            raise InvalidParameterError(f"delta must be >= 1, got {self.delta}")
        if self.k < 1:
            raise InvalidParameterError(f"k must be >= 1, got {self.k}")
        if self.honest_base < 0 or self.adversary_base < 0:
            raise InvalidParameterError("stakes must be nonnegative")
        if self.honest_base + self.adversary_base <= 0:
            raise InvalidParameterError("total initial stake must be positive")

    @classmethod
    def initial(
        cls,
        t: int,
        k: int,
        gamma: float,
        delta: int,
        c: float,
        v_adversary0: float,
        s0: float,
        schedule: RewardSchedule | None = None,
    ) -> "ChainState":
        reward_of = reward_vector(t, c, schedule)
        if not 0.0 <= v_adversary0 <= 1.0:
            raise InvalidParameterError(
                f"initial fraction must be in [0, 1], got {v_adversary0}"
            )
        if not s0 > 0:
            raise InvalidParameterError(f"S(0) must be > 0, got {s0}")
        return cls(
            clock=0,
            gamma=gamma,
            delta=delta,
            k=k,
            reward_of=reward_of,
            honest_base=(1.0 - v_adversary0) * s0,
            adversary_base=v_adversary0 * s0,
        )

    @property
    def honest_stake(self) -> float:
        return self.honest_base + self.honest_published

    @property
    def adversary_stake(self) -> float:
        return self.adversary_base + self.adversary_published

    @property
    def total_stake(self) -> float:
        return self.adversary_stake + self.honest_stake

    def adversary_blocks(self) -> int:
        return sum(1 for p in self.main_owner.values() if p is Party.ADVERSARY)

    def outcome(self) -> "StrategyOutcome":
        adv_blocks = self.adversary_blocks()
        return StrategyOutcome(
            final_fraction_stake=self.adversary_stake / self.total_stake,
            final_fraction_blocks=(
                adv_blocks / self.length if self.length > 0 else 0.0
            ),
            action_counts=dict(self.action_counts),
            chain_length=self.length,
            adversary_blocks=adv_blocks,
        )


@dataclass(frozen=True)
class StrategyOutcome:
    """Endpoint of one strategic trajectory, under both objective readings."""

    final_fraction_stake: float
    final_fraction_blocks: float
    action_counts: Mapping[str, int]
    chain_length: int
    adversary_blocks: int


def reward_vector(t: int, c: float, schedule: RewardSchedule | None = None) -> np.ndarray:
    """Per-slot reward lookup for the chain simulator (entry 0 unused)."""
    if t < 1:
        raise InvalidParameterError(f"T must be a positive integer, got {t}")
    if schedule is not None:
        if schedule.slots != t:
            raise InvalidParameterError(
                f"schedule covers {schedule.slots} slots, expected {t}"
            )
        rewards = np.concatenate(([0.0], schedule.per_slot))
    else:
        if c < 0:
            raise InvalidParameterError(f"per-block reward must be >= 0, got {c}")
        rewards = np.full(t + 1, c)
        rewards[0] = 0.0
    rewards.setflags(write=False)
    return rewards


def elect_leader(state: ChainState, draw: float) -> Party:
    """Elect slot clock+1's leader from the published-chain stakes."""
    adv = state.adversary_stake
    if draw * (adv + state.honest_stake) < adv:
        return Party.ADVERSARY
    return Party.HONEST


def mo_k_step(
    state: ChainState, k: int, winner: Party, match_draw: float
) -> ChainState:
    """Advance one wall-clock slot; mutates and returns ``state``.

    ``k`` is the override lead threshold (kept explicit so one state can be
    probed under different thresholds; it normally equals ``state.k``).
    ``match_draw`` resolves branch adoption and is consumed logically every
    slot, used only when a match fires.
    """
    t = state.clock + 1
    if winner is Party.HONEST:
        state.main_owner[t] = Party.HONEST
        state.honest_published += state.reward_of[t]
        state.length += 1
        state.height = t
        state.side_chains = [
            sc
            for sc in state.side_chains
            if state.height - sc.branch_point <= state.delta
        ]
        candidates = [sc for sc in state.side_chains if sc.length >= state.length]
        if candidates:
            state.action_counts[Action.MATCH.value] += 1
            chosen = min(candidates, key=lambda sc: sc.branch_point)
            if match_draw < state.gamma:
                _adopt_released_branch(state, chosen)
            state.side_chains = [chosen] if chosen.blocks else []
        else:
            state.action_counts[Action.WAIT.value] += 1
            state.side_chains = [
                sc for sc in state.side_chains if sc.length >= state.length
            ]
    else:
        if not any(sc.branch_point == state.height for sc in state.side_chains):
            state.side_chains.append(
                SideChain(
                    branch_point=state.height,
                    blocks=[],
                    prefix_blocks=state.length,
                )
            )
        for sc in state.side_chains:
            sc.blocks.append(t)
        lone = state.side_chains[0] if len(state.side_chains) == 1 else None
        if (
            lone is not None
            and lone.branch_point == state.height
            and lone.length >= state.length + k
        ):
            state.action_counts[Action.OVERRIDE.value] += 1
            slot = lone.blocks.pop(0)
            state.main_owner[slot] = Party.ADVERSARY
            state.adversary_published += state.reward_of[slot]
            state.length += 1
            state.height = slot
            lone.branch_point = slot
            lone.prefix_blocks = state.length
            if not lone.blocks:
                state.side_chains = []
        else:
            state.action_counts[Action.WAIT.value] += 1
    state.clock = t
    return state


def _adopt_released_branch(state: ChainState, chosen: SideChain) -> None:
    """Honest nodes switch to the released branch of ``chosen``.

    Published blocks above the branch point are displaced by the chain's
    first (length - prefix) withheld blocks, keeping the main-chain length
    unchanged; the chain then branches at the new tip.
    """
    released = state.length - chosen.prefix_blocks
    for slot in range(chosen.branch_point + 1, state.height + 1):
        owner = state.main_owner.pop(slot, None)
        if owner is Party.HONEST:
            state.honest_published -= state.reward_of[slot]
        elif owner is Party.ADVERSARY:
            # Unreachable: published adversarial blocks never sit above a
            # retained branch point (every release discards rival chains).
            state.adversary_published -= state.reward_of[slot]
    for slot in chosen.blocks[:released]:
        state.main_owner[slot] = Party.ADVERSARY
        state.adversary_published += state.reward_of[slot]
    state.height = chosen.blocks[released - 1]
    del chosen.blocks[:released]
    chosen.branch_point = state.height
    chosen.prefix_blocks = state.length


def run_strategy(
    t: int,
    k: int,
    gamma: float,
    delta: int | None,
    c: float,
    v_adversary0: float,
    s0: float,
    rng: np.random.Generator,
    schedule: RewardSchedule | None = None,
) -> StrategyOutcome:
    """Simulate T slots of elections plus the match-override-k strategy.

    ``delta`` defaults to 10*k.  A ``schedule`` replaces the constant
    per-block reward c with its per-slot rewards (slot n's block carries
    r(n) whenever it lands on the main chain).  Consumes two uniforms per
    slot (election, match) regardless of the trajectory taken.
    """
    if delta is None:
        delta = 10 * k
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    if delta < 1:
        raise InvalidParameterError(f"delta must be >= 1, got {delta}")
    if not 0.0 <= gamma <= 1.0:
        raise InvalidParameterError(f"gamma must be in [0, 1], got {gamma}")
    if not 0.0 <= v_adversary0 <= 1.0:
        raise InvalidParameterError(
            f"initial fraction must be in [0, 1], got {v_adversary0}"
        )
    if not s0 > 0:
        raise InvalidParameterError(f"S(0) must be > 0, got {s0}")
    rewards = reward_vector(t, c, schedule)
    draws = rng.random(2 * t).reshape(t, 2)
    scratch = make_scratch(t)
    return run_prepared(
        draws, rewards, k, gamma, delta, v_adversary0 * s0, (1.0 - v_adversary0) * s0,
        scratch,
    )


def make_scratch(t: int) -> tuple[np.ndarray, ...]:
    """Reusable scratch buffers for :func:`_run_kernel` at horizon t."""
    return (
        np.zeros(t + 1, dtype=np.int8),
        np.empty(t + 1, dtype=np.int64),
        np.empty(_kernels.SIDE_CHAIN_CAP, dtype=np.int64),
        np.empty(_kernels.SIDE_CHAIN_CAP, dtype=np.int64),
        np.empty(_kernels.SIDE_CHAIN_CAP, dtype=np.int64),
    )


def run_prepared(
    draws: np.ndarray,
    rewards: np.ndarray,
    k: int,
    gamma: float,
    delta: int,
    stake_adversary: float,
    stake_honest: float,
    scratch: tuple[np.ndarray, ...],
) -> StrategyOutcome:
    owner, adv_wins, sc_branch, sc_start, sc_prefix = scratch
    owner[:] = 0
    (
        stake_fraction,
        block_fraction,
        length,
        adv_blocks,
        n_match,
        n_override,
        n_wait,
    ) = _kernels.mo_k_run(
        np.ascontiguousarray(draws[:, 0]),
        np.ascontiguousarray(draws[:, 1]),
        rewards,
        k,
        gamma,
        delta,
        stake_adversary,
        stake_honest,
        owner,
        adv_wins,
        sc_branch,
        sc_start,
        sc_prefix,
    )
    return StrategyOutcome(
        final_fraction_stake=float(stake_fraction),
        final_fraction_blocks=float(block_fraction),
        action_counts={
            Action.MATCH.value: int(n_match),
            Action.OVERRIDE.value: int(n_override),
            Action.WAIT.value: int(n_wait),
        },
        chain_length=int(length),
        adversary_blocks=int(adv_blocks),
    )
