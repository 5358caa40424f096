"""Block-reward schedules: constant, geometric, checkpoint-composed, decreasing.

A schedule fixes the per-slot reward r(n) for n = 1..T together with the
cumulative stake curve S(n) = S(0) + sum_{i<=n} r(i).  All constructors build
S(n) from a closed form first and derive r(n) as differences, so the curve
carries no accumulated summation error even for T in the millions.  The
equitability math lives in :mod:`stakesim.analytics` and consumes the growth
ratios S(n)/S(n-1); for reward totals so large that S(T) overflows a float,
use the analytics functions that take (T, R, S0) directly instead of
materialising a schedule.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "RewardSchedule",
    "Checkpoint",
    "DecreasingRewardParams",
    "constant_schedule",
    "geometric_schedule",
    "composed_schedule",
    "decreasing_schedule",
    "schedule_from_spec",
]

_REL_TOL = 1e-9


@dataclass(frozen=True)
class RewardSchedule:
    """Per-slot rewards r(1..T) plus the cumulative stake curve S(0..T).

    slots:          number of block slots T
    initial_stake:  S(0), in tokens
    per_slot:       length-T vector of nonnegative rewards
    cumulative:     length-(T+1) vector with cumulative[n] = S(n)
    """

    slots: int
    initial_stake: float
    per_slot: np.ndarray
    cumulative: np.ndarray

    def __post_init__(self) -> None:
        if self.slots < 1:
            raise InvalidParameterError(f"slots must be >= 1, got {self.slots}")
        if not self.initial_stake > 0:
            raise InvalidParameterError(
                f"initial_stake must be > 0, got {self.initial_stake}"
            )
        per_slot = np.asarray(self.per_slot, dtype=np.float64)
        cumulative = np.asarray(self.cumulative, dtype=np.float64)
        per_slot.setflags(write=False)
        cumulative.setflags(write=False)
        object.__setattr__(self, "per_slot", per_slot)
        object.__setattr__(self, "cumulative", cumulative)
        if per_slot.shape != (self.slots,):
            raise InvalidParameterError("per_slot must have length T")
        if cumulative.shape != (self.slots + 1,):
            raise InvalidParameterError("cumulative must have length T+1")
        if np.any(per_slot < 0):
            raise InvalidParameterError("per-slot rewards must be nonnegative")
        if not np.all(cumulative > 0):
            raise InvalidParameterError("cumulative stake must stay positive")
        recon = cumulative[:-1] + per_slot
        if not np.allclose(recon, cumulative[1:], rtol=_REL_TOL, atol=0.0):
            raise InvalidParameterError(
                "cumulative curve inconsistent with per-slot rewards"
            )

    @property
    def total_reward(self) -> float:
        """R = S(T) - S(0)."""
        return float(self.cumulative[-1] - self.cumulative[0])

    def growth_ratios(self) -> np.ndarray:
        """S(n)/S(n-1) for n = 1..T."""
        return self.cumulative[1:] / self.cumulative[:-1]

    def scaled(self, k: float) -> "RewardSchedule":
        """Schedule with stakes and rewards jointly scaled by k > 0."""
        if not k > 0:
            raise InvalidParameterError(f"scale factor must be > 0, got {k}")
        return RewardSchedule(
            slots=self.slots,
            initial_stake=self.initial_stake * k,
            per_slot=self.per_slot * k,
            cumulative=self.cumulative * k,
        )

    def to_csv(self) -> str:
        """CSV with header ``slot,reward,cumulative_stake``, one row per slot.

        Values carry 12 significant digits.
        """
        buf = io.StringIO()
        buf.write("slot,reward,cumulative_stake\n")
        for n in range(1, self.slots + 1):
            buf.write(
                f"{n},{self.per_slot[n - 1]:.12g},{self.cumulative[n]:.12g}\n"
            )
        return buf.getvalue()


@dataclass(frozen=True)
class Checkpoint:
    """One (end_slot, interval_reward) pair of a checkpoint sequence.

    ``interval_reward`` is the total dispensed between the previous
    checkpoint's end slot (exclusive) and ``end_slot`` (inclusive).
    """

    end_slot: int
    interval_reward: float

    def __post_init__(self) -> None:
        if self.end_slot < 1:
            raise InvalidParameterError(
                f"checkpoint end_slot must be >= 1, got {self.end_slot}"
            )
        if self.interval_reward < 0:
            raise InvalidParameterError(
                f"checkpoint reward must be >= 0, got {self.interval_reward}"
            )


@dataclass(frozen=True)
class DecreasingRewardParams:
    """Parameters of the exponentially decaying reward family.

    alpha:        per-slot decay rate in (0, 1)
    target_total: total reward R dispensed over the horizon
    """

    alpha: float
    target_total: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise InvalidParameterError(
                f"alpha must lie strictly inside (0, 1), got {self.alpha}"
            )
        if not self.target_total > 0:
            raise InvalidParameterError(
                f"target_total must be > 0, got {self.target_total}"
            )

    def ceiling(self, slots: int) -> float:
        """The stake ceiling M with R = M * (1 - (1-alpha)^T)."""
        depletion = -math.expm1(slots * math.log1p(-self.alpha))
        m = self.target_total / depletion
        if not math.isfinite(m) or m <= 0:
            raise InvalidParameterError("derived reward ceiling is not positive")
        return m


def _check_t_r_s0(t: int, r: float, s0: float) -> None:
    if t < 1:
        raise InvalidParameterError(f"T must be a positive integer, got {t}")
    if r < 0:
        raise InvalidParameterError(f"total reward must be >= 0, got {r}")
    if not s0 > 0:
        raise InvalidParameterError(f"S(0) must be > 0, got {s0}")


def constant_schedule(t: int, r: float, s0: float = 1.0) -> RewardSchedule:
    """Uniform rewards: r(n) = R/T, so S(n) = S(0) + n*R/T."""
    _check_t_r_s0(t, r, s0)
    n = np.arange(t + 1, dtype=np.float64)
    cumulative = s0 + n * (r / t)
    per_slot = np.full(t, r / t)
    return RewardSchedule(t, s0, per_slot, cumulative)


def _geometric_segment(
    start: float, log_ratio: float, length: int, offset: int = 0
) -> np.ndarray:
    """S values over one constant-growth segment.

    Returns S(offset..offset+length) where S(offset) = start and
    S(n) = start * exp(((n - offset)/length) * log_ratio).
    """
    frac = np.arange(length + 1, dtype=np.float64) / length
    return start * np.exp(frac * log_ratio)


def geometric_schedule(t: int, r: float, s0: float = 1.0) -> RewardSchedule:
    """Constant-growth-ratio rewards: S(n) = S(0) * (1 + R/S(0))^(n/T).

    Each cumulative value comes straight from the closed form, so the ratio
    S(n)/S(n-1) = (1 + R/S0)^(1/T) holds to machine precision for every slot.
    """
    _check_t_r_s0(t, r, s0)
    cumulative = _geometric_segment(s0, math.log1p(r / s0), t)
    per_slot = np.diff(cumulative)
    return RewardSchedule(t, s0, per_slot, cumulative)


def composed_schedule(
    checkpoints: Sequence[Checkpoint], s0: float = 1.0
) -> RewardSchedule:
    """Geometric growth applied independently over each checkpoint interval.

    For checkpoints (T_1, R_1), ..., (T_k, R_k) with running totals
    Rc_j = R_1 + ... + R_j, the curve inside interval i is

        S(n) = S0 * (1 + Rc_{i-1}/S0)
                  * ((1 + Rc_i/S0) / (1 + Rc_{i-1}/S0)) ^ ((n-T_{i-1}) / (T_i-T_{i-1}))

    With a single checkpoint this reduces to :func:`geometric_schedule`
    bit-for-bit (both run the same segment construction).
    """
    if len(checkpoints) == 0:
        raise InvalidParameterError("checkpoint sequence must be nonempty")
    if not s0 > 0:
        raise InvalidParameterError(f"S(0) must be > 0, got {s0}")
    ends = [cp.end_slot for cp in checkpoints]
    if any(b <= a for a, b in zip(ends, ends[1:])):
        raise InvalidParameterError(
            f"checkpoint end_slots must be strictly increasing, got {ends}"
        )

    t_total = ends[-1]
    cumulative = np.empty(t_total + 1, dtype=np.float64)
    prev_end = 0
    running = 0.0
    log_prev = 0.0  # log(1 + Rc_{i-1}/S0)
    for cp in checkpoints:
        length = cp.end_slot - prev_end
        start = s0 * (1.0 + running / s0)
        log_cur = math.log1p((running + cp.interval_reward) / s0)
        segment = _geometric_segment(start, log_cur - log_prev, length)
        cumulative[prev_end : cp.end_slot + 1] = segment
        prev_end = cp.end_slot
        running += cp.interval_reward
        log_prev = log_cur
    per_slot = np.diff(cumulative)
    return RewardSchedule(t_total, s0, per_slot, cumulative)


def schedule_from_spec(spec) -> RewardSchedule:
    """Build a schedule from a family mapping, as found in config documents.

    Expected keys: ``family`` plus the family's parameters -
    constant/geometric: T, R; composed: checkpoints as [end_slot, reward]
    pairs; decreasing: T, R, alpha (defaults to 1/T).  S0 defaults to 1.
    """
    family = spec.get("family")
    s0 = float(spec.get("S0", 1.0))
    if family == "constant":
        return constant_schedule(int(spec["T"]), float(spec["R"]), s0)
    if family == "geometric":
        return geometric_schedule(int(spec["T"]), float(spec["R"]), s0)
    if family == "composed":
        checkpoints = [
            Checkpoint(end_slot=int(end), interval_reward=float(reward))
            for end, reward in spec["checkpoints"]
        ]
        return composed_schedule(checkpoints, s0)
    if family == "decreasing":
        t = int(spec["T"])
        alpha = float(spec.get("alpha", 1.0 / t))
        params = DecreasingRewardParams(alpha=alpha, target_total=float(spec["R"]))
        return decreasing_schedule(t, params, s0)
    raise InvalidParameterError(f"unknown schedule family {family!r}")


def decreasing_schedule(
    t: int, params: DecreasingRewardParams, s0: float = 1.0
) -> RewardSchedule:
    """Exponentially decaying rewards r(n) = alpha * (1-alpha)^(n-1) * M.

    M is chosen so the horizon total equals ``params.target_total``; the
    cumulative curve is S(n) = S(0) + (1 - (1-alpha)^n) * M.
    """
    _check_t_r_s0(t, params.target_total, s0)
    alpha = params.alpha
    m = params.ceiling(t)
    n = np.arange(t + 1, dtype=np.float64)
    decay = np.exp(n * math.log1p(-alpha))  # (1-alpha)^n
    cumulative = s0 + (1.0 - decay) * m
    per_slot = alpha * decay[:-1] * m
    return RewardSchedule(t, s0, per_slot, cumulative)
