"""Compiled inner loops for the trial harness.

Each kernel consumes a pre-drawn array of uniforms from a per-trial stream,
so results are a pure function of the stream and independent of scheduling.
The pure-Python step functions in :mod:`stakesim.urn`, :mod:`stakesim.bounds`
and :mod:`stakesim.adversary` define the semantics; these kernels replicate
them operation-for-operation (same comparison arithmetic, same draw
consumption order) and the test suite pins the two paths against each other.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = [
    "urn_run",
    "pooled_urn_run",
    "am_run",
    "mo_k_run",
    "SIDE_CHAIN_CAP",
]

# An honest append collapses the side-chain set to at most one survivor and
# at most one new chain appears per tip move, so 2 live chains is the true
# maximum; 8 leaves headroom and makes the overflow branch unreachable.
SIDE_CHAIN_CAP = 8

_EMPTY, _HONEST, _ADVERSARY = 0, 1, 2


@njit(cache=True, nogil=True)
def urn_run(stakes, rewards, draws, counts):
    """Proportional-election stake evolution; one uniform per slot.

    Mutates ``stakes`` (per-party tokens) and ``counts`` (wins per party)
    in place; returns the final total stake.
    """
    m = stakes.size
    total = 0.0
    for i in range(m):
        total += stakes[i]
    for n in range(draws.size):
        u = draws[n] * total
        winner = m - 1
        cum = 0.0
        for i in range(m):
            cum += stakes[i]
            if u < cum:
                winner = i
                break
        stakes[winner] += rewards[n]
        total += rewards[n]
        counts[winner] += 1
    return total


@njit(cache=True, nogil=True)
def pooled_urn_run(pool_totals, weights, pool_of, rewards, draws, counts):
    """Stake evolution with proportional reward sharing inside pools.

    Party i's stake is materialised as weights[i] * pool_totals[pool_of[i]],
    where the weight is the party's fixed within-pool ratio.  The winner draw
    runs over parties (so singleton pools replay :func:`urn_run` exactly);
    the reward is credited to the winner's pool total.
    """
    m = weights.size
    total = 0.0
    for p in range(pool_totals.size):
        total += pool_totals[p]
    for n in range(draws.size):
        u = draws[n] * total
        winner = m - 1
        cum = 0.0
        for i in range(m):
            cum += weights[i] * pool_totals[pool_of[i]]
            if u < cum:
                winner = i
                break
        pool_totals[pool_of[winner]] += rewards[n]
        total += rewards[n]
        counts[winner] += 1
    return total


@njit(cache=True, nogil=True)
def am_run(draws, c, x_adversary, x_honest, adversary_gain):
    """Two-component dominating urn; returns the final adversary fraction.

    Honest draw: honest side gains c.  Adversary draw: adversary side gains
    ``adversary_gain`` (c or 2c) and the honest side loses c, floored at 0.
    """
    xa = x_adversary
    xh = x_honest
    for n in range(draws.size):
        if draws[n] * (xa + xh) < xa:
            xa += adversary_gain
            xh -= c
            if xh < 0.0:
                xh = 0.0
        else:
            xh += c
    return xa / (xa + xh)


@njit(cache=True, nogil=True)
def mo_k_run(
    elect_draws,
    match_draws,
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
):
    """One full trajectory of the match-override strategy with window k.

    Slot t consumes elect_draws[t-1] (leader election over published stake)
    and match_draws[t-1] (branch adoption on a match; drawn every slot).
    ``rewards[t]`` is the reward of the block occupying slot t.

    Scratch arrays: ``owner`` (int8, length T+1, zeroed by the caller) holds
    the main-chain slot occupancy; ``adv_wins`` (int64, length T+1) the
    global list of adversary-won slots; ``sc_*`` (int64, SIDE_CHAIN_CAP) the
    side-chain set as (branch point, first withheld-win index, shared-prefix
    block count) triples, where a chain's withheld blocks are the global win
    list from its start index onward.

    Returns (final stake fraction, final block fraction, lead length,
    adversary blocks on chain, match count, override count, wait count).
    """
    t_slots = elect_draws.size
    n_wins = 0
    n_chains = 0
    length = 0
    height = 0
    adv_pub = 0.0  # published adversary rewards
    hon_pub = 0.0

    n_match = 0
    n_override = 0
    n_wait = 0

    for t in range(1, t_slots + 1):
        adv_stake = stake_adversary + adv_pub
        hon_stake = stake_honest + hon_pub
        adversary_won = elect_draws[t - 1] * (adv_stake + hon_stake) < adv_stake

        if not adversary_won:
            # Honest block lands on the main chain immediately.
            owner[t] = _HONEST
            hon_pub += rewards[t]
            length += 1
            height = t
            # Chains branching deeper than the adoption window are dead.
            kept = 0
            for i in range(n_chains):
                if height - sc_branch[i] <= delta:
                    sc_branch[kept] = sc_branch[i]
                    sc_start[kept] = sc_start[i]
                    sc_prefix[kept] = sc_prefix[i]
                    kept += 1
            n_chains = kept
            # Match with the deepest-branching chain at least as long as the
            # main chain, if any; otherwise wait and drop the stragglers.
            chosen = -1
            for i in range(n_chains):
                if sc_prefix[i] + (n_wins - sc_start[i]) >= length:
                    if chosen < 0 or sc_branch[i] < sc_branch[chosen]:
                        chosen = i
            if chosen >= 0:
                n_match += 1
                branch = sc_branch[chosen]
                start = sc_start[chosen]
                prefix = sc_prefix[chosen]
                if match_draws[t - 1] < gamma:
                    # Honest nodes adopt the released branch: published
                    # blocks above the branch point are replaced by the
                    # chain's first withheld blocks, one for one.
                    released = length - prefix
                    for s in range(branch + 1, height + 1):
                        if owner[s] == _HONEST:
                            hon_pub -= rewards[s]
                            owner[s] = _EMPTY
                        elif owner[s] == _ADVERSARY:
                            # Unreachable: published adversary blocks always
                            # sit at or below every retained branch point.
                            adv_pub -= rewards[s]
                            owner[s] = _EMPTY
                    for j in range(released):
                        s = adv_wins[start + j]
                        owner[s] = _ADVERSARY
                        adv_pub += rewards[s]
                    height = adv_wins[start + released - 1]
                    start += released
                    prefix = length
                    branch = height
                # Failed match keeps the main chain; either way only the
                # matched chain survives.
                if start < n_wins:
                    sc_branch[0] = branch
                    sc_start[0] = start
                    sc_prefix[0] = prefix
                    n_chains = 1
                else:
                    n_chains = 0
            else:
                n_wait += 1
                kept = 0
                for i in range(n_chains):
                    if sc_prefix[i] + (n_wins - sc_start[i]) >= length:
                        sc_branch[kept] = sc_branch[i]
                        sc_start[kept] = sc_start[i]
                        sc_prefix[kept] = sc_prefix[i]
                        kept += 1
                n_chains = kept
        else:
            # Withhold: the new block extends every side chain, plus a fresh
            # chain from the tip when none branches there.
            at_tip = False
            for i in range(n_chains):
                if sc_branch[i] == height:
                    at_tip = True
                    break
            if not at_tip and n_chains < SIDE_CHAIN_CAP:
                sc_branch[n_chains] = height
                sc_start[n_chains] = n_wins
                sc_prefix[n_chains] = length
                n_chains += 1
            adv_wins[n_wins] = t
            n_wins += 1
            # Override only from a lone tip chain holding a lead of >= k.
            if (
                n_chains == 1
                and sc_branch[0] == height
                and sc_prefix[0] + (n_wins - sc_start[0]) >= length + k
            ):
                n_override += 1
                s = adv_wins[sc_start[0]]
                owner[s] = _ADVERSARY
                adv_pub += rewards[s]
                length += 1
                height = s
                sc_start[0] += 1
                sc_branch[0] = s
                sc_prefix[0] = length
                if sc_start[0] >= n_wins:
                    n_chains = 0
            else:
                n_wait += 1

    adv_stake = stake_adversary + adv_pub
    total = adv_stake + (stake_honest + hon_pub)
    adv_blocks = 0
    for s in range(1, t_slots + 1):
        if owner[s] == _ADVERSARY:
            adv_blocks += 1
    block_fraction = adv_blocks / length if length > 0 else 0.0
    return (
        adv_stake / total,
        block_fraction,
        length,
        adv_blocks,
        n_match,
        n_override,
        n_wait,
    )
