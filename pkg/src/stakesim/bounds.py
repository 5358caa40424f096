"""Dominating urn processes bounding strategic stake gain.

Two-component urns (adversary side, honest side) under constant per-draw
reward c.  On an honest draw the honest side gains c.  On an adversary draw
the honest side loses c (floored at zero) while the adversary side gains c
("am1" variant) or 2c ("am2").  The am2 update keeps the total growing by
exactly c per step until the honest side hits the floor, which is what makes
its mean fraction tractable in closed form:

    E[v(T)] = (1 + eta) * v(0),   eta = c*T / (S(0) + c),

valid whenever the dispensed total R = c*T stays at or below the honest
side's initial stake S(0)*(1 - v(0)), so the floor is never engaged.

These processes upper-bound (stochastically dominate) the stake fraction any
withhold-and-release chain strategy can reach, and am2 dominates am1; the
test suite checks both dominances empirically on observed CDFs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import _kernels
from .errors import InvalidParameterError, OutOfRegimeError

__all__ = [
    "BoundProcessState",
    "GainBound",
    "am_step",
    "run_bound",
    "am2_mean_closed_form",
    "am2_mean_recursion",
    "closed_form_regime_ok",
    "no_compounding_bound",
]

Variant = Literal["am1", "am2"]


@dataclass(frozen=True)
class BoundProcessState:
    """State of a dominating urn: the two component sizes and the reward."""

    x_adversary: float
    x_honest: float
    c: float
    variant: Variant = "am1"

    def __post_init__(self) -> None:
        if self.x_adversary < 0 or self.x_honest < 0:
            raise InvalidParameterError("urn components must be nonnegative")
        if self.x_adversary + self.x_honest <= 0:
            raise InvalidParameterError("urn must start nonempty")
        if not self.c > 0:
            raise InvalidParameterError(f"per-draw reward must be > 0, got {self.c}")
        if self.variant not in ("am1", "am2"):
            raise InvalidParameterError(f"unknown variant {self.variant!r}")

    @property
    def fraction(self) -> float:
        """Adversary share of the urn; 1.0 if the honest side is empty."""
        total = self.x_adversary + self.x_honest
        return self.x_adversary / total if total > 0 else 1.0


@dataclass(frozen=True)
class GainBound:
    """Closed-form adversarial gain under the am2 urn."""

    eta: float
    expected_final_fraction: float


def am_step(state: BoundProcessState, draw: float) -> BoundProcessState:
    """One urn draw: adversary wins iff draw < current adversary fraction."""
    xa, xh, c = state.x_adversary, state.x_honest, state.c
    if draw * (xa + xh) < xa:
        gain = c if state.variant == "am1" else 2.0 * c
        return BoundProcessState(
            x_adversary=xa + gain,
            x_honest=max(xh - c, 0.0),
            c=c,
            variant=state.variant,
        )
    return BoundProcessState(
        x_adversary=xa, x_honest=xh + c, c=c, variant=state.variant
    )


def run_bound(
    variant: Variant,
    t: int,
    c: float,
    v_adversary0: float,
    s0: float,
    rng: np.random.Generator,
) -> float:
    """Final adversary fraction after t draws.

    Consumes exactly t uniforms even when c = 0 leaves the urn unchanged.
    """
    _check_run_params(t, c, v_adversary0, s0)
    if variant not in ("am1", "am2"):
        raise InvalidParameterError(f"unknown variant {variant!r}")
    if t == 0:
        return v_adversary0
    draws = rng.random(t)
    gain = c if variant == "am1" else 2.0 * c
    return float(
        _kernels.am_run(draws, c, v_adversary0 * s0, (1.0 - v_adversary0) * s0, gain)
    )


def _check_run_params(t: int, c: float, v_adversary0: float, s0: float) -> None:
    if t < 0:
        raise InvalidParameterError(f"T must be >= 0, got {t}")
    if c < 0:
        raise InvalidParameterError(f"per-draw reward must be >= 0, got {c}")
    if not 0.0 <= v_adversary0 <= 1.0:
        raise InvalidParameterError(
            f"initial fraction must be in [0, 1], got {v_adversary0}"
        )
    if not s0 > 0:
        raise InvalidParameterError(f"S(0) must be > 0, got {s0}")


def closed_form_regime_ok(t: int, c: float, v_adversary0: float, s0: float) -> bool:
    """True when R = c*T is at most the honest side's initial stake."""
    return c * t <= s0 * (1.0 - v_adversary0)


def am2_mean_closed_form(
    t: int, c: float, v_adversary0: float, s0: float
) -> GainBound:
    """Exact mean final fraction of the am2 urn, inside its validity regime.

    Raises :class:`OutOfRegimeError` when R = c*T exceeds the honest side's
    initial stake; the process can still be simulated there, but the floor
    may engage and the closed form stops being exact.
    """
    _check_run_params(t, c, v_adversary0, s0)
    if not closed_form_regime_ok(t, c, v_adversary0, s0):
        raise OutOfRegimeError(
            f"R = c*T = {c * t} exceeds honest initial stake "
            f"{s0 * (1.0 - v_adversary0)}; closed form not guaranteed, "
            "simulate instead"
        )
    eta = c * t / (s0 + c)
    return GainBound(eta=eta, expected_final_fraction=(1.0 + eta) * v_adversary0)


def am2_mean_recursion(t: int, c: float, v_adversary0: float, s0: float) -> float:
    """Mean final fraction by iterating E[v(t+1)|v(t)] = v(t) S(t+2)/S(t+1).

    With the am2 update the total is the deterministic S(t) = S(0) + c*t
    while the honest floor stays disengaged, so the one-step conditional
    mean telescopes; this iterates it literally as an independent check on
    the closed form.
    """
    _check_run_params(t, c, v_adversary0, s0)
    mean = v_adversary0
    for i in range(t):
        mean *= (s0 + c * (i + 2)) / (s0 + c * (i + 1))
    return mean


def no_compounding_bound(v_adversary0: float, eta: float) -> float:
    """Leading-order strategic-gain cap when rewards do not compound.

    Returns (1 + v0*eta/(1 + (1-v0)*eta)) * v0: bounded in eta, in contrast
    with the compounding case where the gain grows linearly in eta.
    """
    if not 0.0 <= v_adversary0 <= 1.0:
        raise InvalidParameterError(
            f"initial fraction must be in [0, 1], got {v_adversary0}"
        )
    if eta < 0:
        raise InvalidParameterError(f"eta must be >= 0, got {eta}")
    if math.isinf(eta):
        return v_adversary0 / (1.0 - v_adversary0) if v_adversary0 < 1 else 1.0
    return (1.0 + v_adversary0 * eta / (1.0 + (1.0 - v_adversary0) * eta)) * v_adversary0
