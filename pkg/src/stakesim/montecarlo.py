"""Deterministic trial harness: derived streams, aggregation, CDF tests.

Every trial draws from its own counter-based random stream, a pure function
of (master seed, trial index); see :func:`derive_stream`.  Results are
therefore reproducible bit for bit regardless of execution order or worker
count: trials are written into a results vector by index and every reduction
(mean, variance, histogram, sorted ECDF) runs over that vector in index
order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from . import adversary, bounds, urn
from .errors import ConfigError, InvalidParameterError
from .rewards import RewardSchedule, schedule_from_spec

__all__ = [
    "SCENARIOS",
    "ExperimentPlan",
    "AggregateResult",
    "DominanceReport",
    "derive_stream",
    "run_experiment",
    "ks_distance",
    "dominance_check",
    "two_sample_ks_noise",
]

SCENARIOS = ("honest-urn", "pooled-urn", "pow-baseline", "mo-k", "am-bound")

DEFAULT_TRIALS = 100_000
DEFAULT_BINS = 100


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run: a scenario, its parameters, and the trial budget."""

    trials: int
    master_seed: int
    scenario: str
    params: Mapping

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise InvalidParameterError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.master_seed < 2**64:
            raise InvalidParameterError("master_seed must fit in 64 bits")
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}"
            )


@dataclass(frozen=True)
class AggregateResult:
    """Moments, histogram and sorted samples of the final-fraction statistic."""

    mean: float
    sample_variance: float
    stderr_of_mean: float
    variance_stderr: float
    histogram: np.ndarray
    bin_edges: np.ndarray
    ecdf: np.ndarray
    trials: int
    master_seed: int


@dataclass(frozen=True)
class DominanceReport:
    """Worst-case ECDF crossing for a claimed stochastic dominance."""

    max_violation: float
    noise_threshold: float
    within_noise: bool


def derive_stream(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent, reproducible stream for one trial.

    The stream is a Philox counter-based generator keyed with the 128-bit
    pair (master_seed, trial_index), so the mapping is a fixed pure function
    of its two arguments and streams for distinct indices never overlap.
    """
    if not 0 <= master_seed < 2**64:
        raise InvalidParameterError("master_seed must fit in 64 bits")
    if not 0 <= trial_index < 2**64:
        raise InvalidParameterError("trial_index must fit in 64 bits")
    key = np.array([master_seed, trial_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _schedule_of(params: Mapping) -> RewardSchedule:
    spec = params.get("schedule")
    if isinstance(spec, RewardSchedule):
        return spec
    if isinstance(spec, Mapping):
        return schedule_from_spec(spec)
    raise ConfigError("scenario requires a 'schedule' (object or family mapping)")


def _make_trial_fn(scenario: str, params: Mapping) -> Callable[[np.random.Generator], float]:
    """Bind a scenario to a single-trial callable.

    Called once per worker chunk, so any scratch state created here is
    thread-local.
    """
    if scenario == "honest-urn":
        schedule = _schedule_of(params)
        fractions = np.asarray(params["fractions"], dtype=np.float64)
        party = int(params.get("party", 0))

        def trial(rng: np.random.Generator) -> float:
            sample = urn.simulate_trajectory(schedule, fractions, rng)
            return float(sample.final_fractions[party])

        return trial

    if scenario == "pooled-urn":
        schedule = _schedule_of(params)
        fractions = np.asarray(params["fractions"], dtype=np.float64)
        pools = urn.PoolAssignment(
            np.asarray(params["pool_of"], dtype=np.int64),
            np.asarray(params["pool_fractions"], dtype=np.float64),
        )
        party = int(params.get("party", 0))

        def trial(rng: np.random.Generator) -> float:
            sample = urn.simulate_with_pools(schedule, pools, fractions, rng)
            return float(sample.final_fractions[party])

        return trial

    if scenario == "pow-baseline":
        t = int(params["t"])
        per_block = float(params["per_block"])
        fractions = np.asarray(params["fractions"], dtype=np.float64)
        s0 = float(params.get("s0", 1.0))
        party = int(params.get("party", 0))

        def trial(rng: np.random.Generator) -> float:
            sample = urn.pow_baseline(t, per_block, fractions, rng, s0)
            return float(sample.final_fractions[party])

        return trial

    if scenario == "mo-k":
        t = int(params["t"])
        k = int(params["k"])
        gamma = float(params["gamma"])
        delta = int(params["delta"]) if params.get("delta") is not None else 10 * k
        schedule = None
        if params.get("schedule") is not None:
            schedule = _schedule_of(params)
            c = 0.0
        else:
            c = float(params["c"])
        v0 = float(params["v0"])
        s0 = float(params.get("s0", 1.0))
        objective = params.get("objective", "stake")
        if objective not in ("stake", "blocks"):
            raise ConfigError(f"unknown objective {objective!r}")
        rewards = adversary.reward_vector(t, c, schedule)
        scratch = adversary.make_scratch(t)
        draw_buf = np.empty(2 * t)

        def trial(rng: np.random.Generator) -> float:
            rng.random(out=draw_buf)
            outcome = adversary.run_prepared(
                draw_buf.reshape(t, 2),
                rewards,
                k,
                gamma,
                delta,
                v0 * s0,
                (1.0 - v0) * s0,
                scratch,
            )
            if objective == "stake":
                return outcome.final_fraction_stake
            return outcome.final_fraction_blocks

        return trial

    if scenario == "am-bound":
        variant = str(params["variant"]).lower()
        t = int(params["t"])
        c = float(params["c"])
        v0 = float(params["v0"])
        s0 = float(params.get("s0", 1.0))

        def trial(rng: np.random.Generator) -> float:
            return bounds.run_bound(variant, t, c, v0, s0, rng)

        return trial

    raise ConfigError(f"unknown scenario {scenario!r}")


def run_experiment(plan: ExperimentPlan, workers: int = 1) -> AggregateResult:
    """Execute the plan and aggregate final fractions across trials.

    ``workers`` only controls wall-clock parallelism; the result is
    bit-identical for any value because trial i always consumes stream
    (master_seed, i) and reductions run in index order.
    """
    if workers < 1:
        raise InvalidParameterError(f"workers must be >= 1, got {workers}")
    samples = np.empty(plan.trials)

    def run_chunk(start: int, stop: int) -> None:
        trial_fn = _make_trial_fn(plan.scenario, plan.params)
        for i in range(start, stop):
            samples[i] = trial_fn(derive_stream(plan.master_seed, i))

    if workers == 1 or plan.trials < 2 * workers:
        run_chunk(0, plan.trials)
    else:
        bounds_idx = np.linspace(0, plan.trials, workers + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_chunk, int(a), int(b))
                for a, b in zip(bounds_idx[:-1], bounds_idx[1:])
            ]
            for fut in futures:
                fut.result()

    return aggregate_samples(samples, plan.trials, plan.master_seed)


def aggregate_samples(
    samples: np.ndarray, trials: int, master_seed: int, bins: int = DEFAULT_BINS
) -> AggregateResult:
    """Moments, histogram over [0, 1], and the sorted ECDF of the samples."""
    n = samples.size
    mean = float(samples.mean())
    if n > 1:
        var = float(samples.var(ddof=1))
        m4 = float(np.mean((samples - mean) ** 4))
        var_of_var = (m4 - var * var * (n - 3) / (n - 1)) / n
        variance_stderr = math.sqrt(max(var_of_var, 0.0))
    else:
        var = 0.0
        variance_stderr = math.nan
    hist, edges = np.histogram(samples, bins=bins, range=(0.0, 1.0))
    return AggregateResult(
        mean=mean,
        sample_variance=var,
        stderr_of_mean=math.sqrt(var / n),
        variance_stderr=variance_stderr,
        histogram=hist,
        bin_edges=edges,
        ecdf=np.sort(samples),
        trials=trials,
        master_seed=master_seed,
    )


def ks_distance(ecdf: np.ndarray, reference_cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """One-sample Kolmogorov-Smirnov statistic against a reference CDF.

    ``ecdf`` must be the sorted sample vector.
    """
    samples = np.asarray(ecdf, dtype=np.float64)
    if samples.size == 0:
        raise InvalidParameterError("cannot compute KS distance of an empty sample")
    n = samples.size
    ref = np.asarray(reference_cdf(samples), dtype=np.float64)
    upper = np.arange(1, n + 1) / n - ref
    lower = ref - np.arange(0, n) / n
    return float(max(upper.max(), lower.max(), 0.0))


def two_sample_ks_noise(n_a: int, n_b: int, coefficient: float = 1.36) -> float:
    """Two-sample KS critical distance at the conventional 5% level."""
    return coefficient * math.sqrt((n_a + n_b) / (n_a * n_b))


def dominance_check(ecdf_a: np.ndarray, ecdf_b: np.ndarray) -> DominanceReport:
    """Check that sample b stochastically dominates sample a.

    Dominance means CDF_b(x) <= CDF_a(x) everywhere; the report's violation
    is the largest CDF_b - CDF_a over the merged sample grid (<= 0 when
    dominance holds exactly) and is compared against two-sample KS noise.
    """
    a = np.sort(np.asarray(ecdf_a, dtype=np.float64))
    b = np.sort(np.asarray(ecdf_b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise InvalidParameterError("cannot compare empty samples")
    grid = np.concatenate([a, b])
    grid.sort()
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    violation = float(np.max(cdf_b - cdf_a))
    threshold = two_sample_ks_noise(a.size, b.size)
    return DominanceReport(
        max_violation=violation,
        noise_threshold=threshold,
        within_noise=violation < threshold,
    )
