"""Closed-form equitability analytics for stake-evolution processes.

The central quantity is the variance of a party's final stake fraction after
T proportional-election slots under a reward schedule.  With growth ratios
e^theta_n = S(n)/S(n-1) it equals

    Var(v(T)) = v0*(1-v0) * (1 - (S(0)^2/S(T)^2) * prod_n (2*e^theta_n - 1))

and the normalized variance Var / (v0*(1-v0)) is party-independent, which is
what makes it usable as a single fairness score for a schedule.  Everything
here evaluates the product in the log domain: the factor S(T)^2 overflows
64-bit floats long before the normalized variance becomes uninformative
(total rewards can usefully grow like e^sqrt(T)).

Also provided: per-family specializations, inverse design helpers (largest
reward total achieving a target normalized variance), the variance multiplier
obtained by joining a stake pool, and a brute-force grid certificate that the
constant-growth (geometric) schedule minimizes the variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidParameterError, ResourceLimitError
from .rewards import DecreasingRewardParams, RewardSchedule

__all__ = [
    "LogGrowthProfile",
    "EquitabilityReport",
    "OptimalityCertificate",
    "variance_closed_form",
    "normalized_variance",
    "variance_constant",
    "variance_geometric",
    "variance_decreasing",
    "normalized_variance_constant",
    "normalized_variance_geometric",
    "normalized_variance_decreasing",
    "equitability_report",
    "max_reward_geometric",
    "max_reward_constant",
    "pool_gain",
    "verify_geometric_optimality",
    "variance_curve_rows",
    "max_reward_curve_rows",
]

_GRID_POINT_LIMIT = 10_000_000
_NEG_CLAMP = -1e-12


@dataclass(frozen=True)
class LogGrowthProfile:
    """Per-slot log growth rates theta_n = log(S(n)/S(n-1))."""

    thetas: np.ndarray

    def __post_init__(self) -> None:
        thetas = np.asarray(self.thetas, dtype=np.float64)
        thetas.setflags(write=False)
        object.__setattr__(self, "thetas", thetas)
        if thetas.ndim != 1 or thetas.size == 0:
            raise InvalidParameterError("thetas must be a nonempty vector")
        if np.any(thetas < 0):
            raise InvalidParameterError("log growth rates must be nonnegative")

    @classmethod
    def from_schedule(cls, schedule: RewardSchedule) -> "LogGrowthProfile":
        return cls(np.log(schedule.cumulative[1:] / schedule.cumulative[:-1]))

    @property
    def total_log_growth(self) -> float:
        """log(S(T)/S(0))."""
        return float(self.thetas.sum())


@dataclass(frozen=True)
class EquitabilityReport:
    """Normalized variance plus its per-party absolute variances.

    ``normalized_variance`` is Var/(v0*(1-v0)), identical for every party;
    ``epsilon_tilde`` is the single bound that therefore covers all parties
    simultaneously.  ``variance_cap_per_party`` is the v0*(1-v0) ceiling that
    no schedule can exceed.
    """

    normalized_variance: float
    per_party_variance: np.ndarray
    epsilon_tilde: float
    variance_cap_per_party: np.ndarray


@dataclass(frozen=True)
class OptimalityCertificate:
    """Outcome of the exhaustive grid search over growth profiles."""

    slots: int
    total_reward: float
    step: float
    points_evaluated: int
    grid_minimizer: np.ndarray
    grid_min_value: float
    uniform_value: float
    max_violation: float  # uniform_value - grid_min_value; optimal iff <= 0 (fp slack aside)


def _log_factor(theta: float) -> float:
    """log(2*e^theta - 1), stable for arbitrarily large theta."""
    return theta + math.log(2.0 - math.exp(-theta))


def _normalized_from_profile(thetas: np.ndarray) -> float:
    """1 - exp(sum log(2 e^theta - 1) - 2 sum theta), clamped to [0, 1]."""
    log_prod = float(np.sum(thetas + np.log(2.0 - np.exp(-thetas))))
    exponent = log_prod - 2.0 * float(np.sum(thetas))
    return _clamp_normalized(-math.expm1(exponent))


def _clamp_normalized(value: float) -> float:
    if value < 0.0:
        if value < _NEG_CLAMP:
            raise ArithmeticError(
                f"normalized variance {value} below cancellation tolerance"
            )
        return 0.0
    return min(value, 1.0)


def _check_v0(v0: float) -> None:
    if not 0.0 <= v0 <= 1.0:
        raise InvalidParameterError(f"initial fraction must be in [0, 1], got {v0}")


def variance_closed_form(schedule: RewardSchedule, v0: float) -> float:
    """Exact final-fraction variance for a party starting with fraction v0."""
    _check_v0(v0)
    thetas = np.log(schedule.cumulative[1:] / schedule.cumulative[:-1])
    return v0 * (1.0 - v0) * _normalized_from_profile(thetas)


def normalized_variance(schedule: RewardSchedule) -> float:
    """Party-independent normalized variance of a schedule."""
    thetas = np.log(schedule.cumulative[1:] / schedule.cumulative[:-1])
    return _normalized_from_profile(thetas)


def normalized_variance_constant(t: int, r: float, s0: float = 1.0) -> float:
    """Normalized variance of uniform rewards: rho^2/((T+rho)(1+rho)),
    rho = R/S0."""
    _check_params(t, r, s0)
    rho = r / s0
    return rho * rho / ((t + rho) * (1.0 + rho))


def normalized_variance_geometric(t: int, r: float, s0: float = 1.0) -> float:
    """Normalized variance of constant-growth rewards:
    1 - (2(1+rho)^(1/T) - 1)^T / (1+rho)^2, evaluated in the log domain."""
    _check_params(t, r, s0)
    log_growth = math.log1p(r / s0)
    theta = log_growth / t
    return _clamp_normalized(-math.expm1(t * _log_factor(theta) - 2.0 * log_growth))


def normalized_variance_decreasing(
    t: int, params: DecreasingRewardParams, s0: float = 1.0
) -> float:
    """Normalized variance of exponentially decaying rewards.

    Product form with m = M/S0 and a = 1-alpha:

        1 - (S0/S(T))^2 * prod_n (1 + m(1 - a^(n-1)(1-2*alpha))) / (1 + m(1 - a^(n-1)))
    """
    _check_params(t, params.target_total, s0)
    alpha = params.alpha
    m = params.ceiling(t) / s0
    decay = np.exp(np.arange(t, dtype=np.float64) * math.log1p(-alpha))  # a^(n-1)
    numer = 1.0 + m * (1.0 - decay * (1.0 - 2.0 * alpha))
    denom = 1.0 + m * (1.0 - decay)
    log_prod = float(np.sum(np.log(numer) - np.log(denom)))
    total_log_growth = math.log1p(params.target_total / s0)
    return _clamp_normalized(-math.expm1(log_prod - 2.0 * total_log_growth))


def variance_constant(t: int, r: float, s0: float = 1.0, v0: float = 0.5) -> float:
    """Final-fraction variance under uniform rewards."""
    _check_v0(v0)
    return v0 * (1.0 - v0) * normalized_variance_constant(t, r, s0)


def variance_geometric(t: int, r: float, s0: float = 1.0, v0: float = 0.5) -> float:
    """Final-fraction variance under constant-growth rewards."""
    _check_v0(v0)
    return v0 * (1.0 - v0) * normalized_variance_geometric(t, r, s0)


def variance_decreasing(
    t: int, params: DecreasingRewardParams, s0: float = 1.0, v0: float = 0.5
) -> float:
    """Final-fraction variance under exponentially decaying rewards."""
    _check_v0(v0)
    return v0 * (1.0 - v0) * normalized_variance_decreasing(t, params, s0)


def _check_params(t: int, r: float, s0: float) -> None:
    if t < 1:
        raise InvalidParameterError(f"T must be a positive integer, got {t}")
    if r < 0:
        raise InvalidParameterError(f"total reward must be >= 0, got {r}")
    if not s0 > 0:
        raise InvalidParameterError(f"S(0) must be > 0, got {s0}")


def equitability_report(
    schedule: RewardSchedule, initial_fractions: Sequence[float]
) -> EquitabilityReport:
    """Per-party variance report for a schedule and an initial stake split."""
    fractions = np.asarray(initial_fractions, dtype=np.float64)
    if np.any(fractions < 0) or np.any(fractions > 1):
        raise InvalidParameterError("initial fractions must lie in [0, 1]")
    if abs(fractions.sum() - 1.0) > 1e-9:
        raise InvalidParameterError(
            f"initial fractions must sum to 1, got {fractions.sum()!r}"
        )
    norm = normalized_variance(schedule)
    cap = fractions * (1.0 - fractions)
    return EquitabilityReport(
        normalized_variance=norm,
        per_party_variance=norm * cap,
        epsilon_tilde=norm,
        variance_cap_per_party=cap,
    )


def max_reward_geometric(t: int, eps: float) -> float:
    """Largest total reward (leading order) for which constant-growth rewards
    keep the normalized variance near eps over T slots.

    Returns R(T) = (1/(1 - sqrt(log(1/(1-eps))/T)))^T - 1.  This is the
    asymptotic answer with the vanishing correction dropped; report the exact
    achieved variance via :func:`variance_geometric` alongside it.
    """
    _check_eps(eps)
    if t < 1:
        raise InvalidParameterError(f"T must be a positive integer, got {t}")
    x = -math.log1p(-eps) / t
    root = math.sqrt(x)
    if root >= 1.0:
        raise InvalidParameterError(
            f"horizon T={t} too small for target eps={eps} (sqrt term >= 1)"
        )
    return math.expm1(-t * math.log1p(-root))


def max_reward_constant(t: int, eps: float) -> float:
    """Largest total reward (leading order) for uniform rewards: eps*T/(1-eps)."""
    _check_eps(eps)
    if t < 1:
        raise InvalidParameterError(f"T must be a positive integer, got {t}")
    return eps * t / (1.0 - eps)


def _check_eps(eps: float) -> None:
    if not 0.0 < eps < 1.0:
        raise InvalidParameterError(f"eps must lie strictly inside (0, 1), got {eps}")


def pool_gain(v_party: float, v_pool: float) -> float:
    """Variance multiplier from joining a pool holding v_pool of stake.

    A party with initial fraction v_party sharing rewards proportionally
    inside a pool with initial fraction v_pool >= v_party sees its final
    variance multiplied by ((1-v_pool)/v_pool) * (v_party/(1-v_party)) <= 1.
    """
    if not 0.0 < v_party < 1.0 or not 0.0 < v_pool < 1.0:
        raise InvalidParameterError("fractions must lie strictly inside (0, 1)")
    if v_party > v_pool:
        raise InvalidParameterError(
            f"party fraction {v_party} cannot exceed pool fraction {v_pool}"
        )
    return (1.0 - v_pool) / v_pool * v_party / (1.0 - v_party)


def verify_geometric_optimality(
    t: int, r: float, grid_step: float
) -> OptimalityCertificate:
    """Exhaustively check that the uniform growth profile minimizes variance.

    Enumerates every grid point of the scaled simplex
    {theta >= 0, sum theta = log(1+R)} with spacing at most ``grid_step``,
    evaluates the normalized variance at each, and compares the minimum
    against the uniform profile theta* = (log(1+R)/T) * ones.  The returned
    certificate records the worst gap uniform_value - grid_min_value; the
    uniform profile is confirmed optimal on the grid when that gap is <= 0
    up to floating-point slack.

    Grids above 10^7 points are refused.
    """
    _check_params(t, r, 1.0)
    if not grid_step > 0:
        raise InvalidParameterError(f"grid step must be > 0, got {grid_step}")

    log_growth = math.log1p(r)
    n_steps = max(1, math.ceil(log_growth / grid_step)) if log_growth > 0 else 0
    n_points = math.comb(n_steps + t - 1, t - 1)
    if n_points > _GRID_POINT_LIMIT:
        raise ResourceLimitError(
            f"grid of {n_points} points exceeds the {_GRID_POINT_LIMIT} limit; "
            "increase grid_step or reduce T"
        )

    uniform = np.full(t, log_growth / t)
    uniform_value = _normalized_from_profile(uniform)

    if log_growth == 0.0 or t == 1:
        profile = np.full(t, log_growth / t)
        return OptimalityCertificate(
            slots=t,
            total_reward=r,
            step=grid_step,
            points_evaluated=1,
            grid_minimizer=profile,
            grid_min_value=_normalized_from_profile(profile),
            uniform_value=uniform_value,
            max_violation=uniform_value - _normalized_from_profile(profile),
        )

    step = log_growth / n_steps
    # Objective decomposes over coordinates: maximizing sum of table[k_i]
    # minimizes the variance, so precompute log(2 e^(k*step) - 1) per level.
    table = np.array([_log_factor(k * step) for k in range(n_steps + 1)])

    best_obj = -math.inf
    best_counts: tuple[int, ...] = ()
    tail = np.arange(n_steps + 1)

    def scan(prefix: tuple[int, ...], remaining: int, prefix_obj: float) -> None:
        nonlocal best_obj, best_counts
        if len(prefix) == t - 2:
            # last two coordinates vectorized: (j, remaining - j)
            j = tail[: remaining + 1]
            objs = prefix_obj + table[j] + table[remaining - j]
            arg = int(np.argmax(objs))
            if objs[arg] > best_obj:
                best_obj = float(objs[arg])
                best_counts = prefix + (arg, remaining - arg)
            return
        for k in range(remaining + 1):
            scan(prefix + (k,), remaining - k, prefix_obj + table[k])

    scan((), n_steps, 0.0)

    minimizer = np.array(best_counts, dtype=np.float64) * step
    grid_min_value = _clamp_normalized(-math.expm1(best_obj - 2.0 * log_growth))
    return OptimalityCertificate(
        slots=t,
        total_reward=r,
        step=grid_step,
        points_evaluated=n_points,
        grid_minimizer=minimizer,
        grid_min_value=grid_min_value,
        uniform_value=uniform_value,
        max_violation=uniform_value - grid_min_value,
    )


def variance_curve_rows(
    t_grid: Sequence[int],
    r: float,
    s0: float = 1.0,
    families: Sequence[str] = ("constant", "geometric", "decreasing"),
    alpha: float | None = None,
) -> list[tuple[int, str, float]]:
    """Rows (T, family, normalized_variance) for fixed total reward R.

    The decreasing family uses alpha = 1/T at each grid point unless a fixed
    alpha is supplied.
    """
    rows = []
    for t in t_grid:
        for family in families:
            if family == "constant":
                value = normalized_variance_constant(t, r, s0)
            elif family == "geometric":
                value = normalized_variance_geometric(t, r, s0)
            elif family == "decreasing":
                a = alpha if alpha is not None else 1.0 / t
                if t == 1 and a >= 1.0:
                    a = 0.5
                params = DecreasingRewardParams(alpha=a, target_total=r)
                value = normalized_variance_decreasing(t, params, s0)
            else:
                raise InvalidParameterError(f"unknown schedule family {family!r}")
            rows.append((t, family, value))
    return rows


def max_reward_curve_rows(
    t_grid: Sequence[int],
    eps: float,
    families: Sequence[str] = ("constant", "geometric"),
) -> list[tuple[int, str, float]]:
    """Rows (T, family, max_reward) achieving normalized variance eps."""
    rows = []
    for t in t_grid:
        for family in families:
            if family == "constant":
                value = max_reward_constant(t, eps)
            elif family == "geometric":
                value = max_reward_geometric(t, eps)
            else:
                raise InvalidParameterError(f"unknown schedule family {family!r}")
            rows.append((t, family, value))
    return rows
