"""Simulation and analytics toolkit for proof-of-stake block-reward design.

Submodules

* :mod:`stakesim.rewards`    reward schedules (constant, geometric, composed,
  decreasing) and their cumulative stake curves
* :mod:`stakesim.urn`        honest stake evolution, stake pools, and the
  fixed-probability baseline
* :mod:`stakesim.analytics`  closed-form variance/equitability math, design
  helpers, and the brute-force optimality certificate
* :mod:`stakesim.adversary`  withhold-and-release chain simulator (match /
  override / wait) with side chains
* :mod:`stakesim.bounds`     dominating urn processes and closed-form gain
  bounds
* :mod:`stakesim.montecarlo` reproducible trial harness, KS and dominance
  checks
* :mod:`stakesim.cli`        command-line front end and figure recipes
"""

from . import adversary, analytics, bounds, cli, montecarlo, rewards, urn
from .errors import (
    ConfigError,
    InvalidParameterError,
    OutOfRegimeError,
    ResourceLimitError,
    StakeSimError,
)

__version__ = "0.1.0"

__all__ = [
    "adversary",
    "analytics",
    "bounds",
    "cli",
    "montecarlo",
    "rewards",
    "urn",
    "StakeSimError",
    "InvalidParameterError",
    "ResourceLimitError",
    "OutOfRegimeError",
    "ConfigError",
    "__version__",
]
