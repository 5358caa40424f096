"""Command-line front end: variance reports, design helper, experiment runner.

Commands

* ``variance``       closed-form normalized/absolute variance of a schedule
* ``design``         largest dispensable total for a target normalized variance
* ``simulate``       run a YAML experiment config, write CSVs and summaries
* ``verify-optimal`` brute-force grid certificate for the constant-growth
  profile

Every command is a pure function of its flags, config and seed: rerunning
writes byte-identical outputs.  Exit codes: 0 success, 1 bad input, 2
internal error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import IO, Mapping, Sequence

import numpy as np
import yaml

from . import analytics, bounds, montecarlo
from .errors import ConfigError, StakeSimError
from .rewards import DecreasingRewardParams, schedule_from_spec

__all__ = ["main", "load_config", "dump_config", "run_config"]

_EXIT_OK = 0
_EXIT_USER = 1
_EXIT_INTERNAL = 2

_SCENARIO_SECTIONS = ("parties", "pools", "baseline", "adversary", "bound")


def _fmt(x: float) -> str:
    """Locale-independent decimal with 12 significant digits."""
    return format(float(x), ".12g")


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def load_config(path: str | Path) -> dict:
    """Parse a YAML experiment config; errors carry line positions."""
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"invalid config {path}{where}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping document")
    return doc


def dump_config(doc: Mapping) -> str:
    """Canonical serialization; load(dump(load(x))) == load(x)."""
    return yaml.safe_dump(dict(doc), sort_keys=True)


def _experiment_plans(doc: Mapping) -> list[tuple[str, dict]]:
    """Expand a config document into named single-scenario run mappings."""
    if "runs" in doc:
        shared = {k: v for k, v in doc.items() if k != "runs"}
        plans = []
        for name, sub in doc["runs"].items():
            merged = dict(shared)
            merged.update(sub)
            plans.append((str(name), merged))
        return plans
    return [("run", dict(doc))]


def _scenario_section(doc: Mapping) -> str:
    present = [s for s in _SCENARIO_SECTIONS if s in doc]
    if len(present) != 1:
        raise ConfigError(
            f"config must contain exactly one scenario section out of "
            f"{_SCENARIO_SECTIONS}, found {present or 'none'}"
        )
    return present[0]


def _plan_from_config(doc: Mapping) -> montecarlo.ExperimentPlan:
    """Map one config document onto an ExperimentPlan."""
    run = doc.get("run", {})
    trials = int(run.get("trials", montecarlo.DEFAULT_TRIALS))
    seed = int(run.get("seed", 0))
    section = _scenario_section(doc)
    reward = doc.get("reward")
    if reward is None and section not in ("bound",):
        raise ConfigError("config is missing the 'reward' section")

    if section == "parties":
        fractions = _fractions_of(doc["parties"])
        params = {
            "schedule": dict(reward),
            "fractions": fractions,
            "party": int(doc["parties"].get("party", 0)),
        }
        return montecarlo.ExperimentPlan(trials, seed, "honest-urn", params)

    if section == "pools":
        sec = doc["pools"]
        fractions = _fractions_of(sec)
        params = {
            "schedule": dict(reward),
            "fractions": fractions,
            "pool_of": [int(i) for i in sec["assignment"]],
            "pool_fractions": [float(x) for x in sec["pool_fractions"]],
            "party": int(sec.get("party", 0)),
        }
        return montecarlo.ExperimentPlan(trials, seed, "pooled-urn", params)

    if section == "baseline":
        sec = doc["baseline"]
        fractions = _fractions_of(sec)
        t = int(reward["T"])
        params = {
            "t": t,
            "per_block": float(reward["R"]) / t,
            "fractions": fractions,
            "s0": float(reward.get("S0", 1.0)),
            "party": int(sec.get("party", 0)),
        }
        return montecarlo.ExperimentPlan(trials, seed, "pow-baseline", params)

    if section == "adversary":
        sec = doc["adversary"]
        t = int(reward["T"])
        params = {
            "t": t,
            "k": int(sec["k"]),
            "gamma": float(sec["gamma"]),
            "delta": int(sec["delta"]) if sec.get("delta") is not None else None,
            "c": float(sec["c"]) if sec.get("c") is not None
            else float(reward["R"]) / t,
            "v0": float(sec["v0"]),
            "s0": float(reward.get("S0", 1.0)),
            "objective": sec.get("objective", "stake"),
        }
        return montecarlo.ExperimentPlan(trials, seed, "mo-k", params)

    sec = doc["bound"]
    if reward is None:
        raise ConfigError("bound scenario needs the 'reward' section")
    t = int(reward["T"])
    params = {
        "variant": str(sec["variant"]).lower(),
        "t": t,
        "c": float(sec["c"]) if sec.get("c") is not None else float(reward["R"]) / t,
        "v0": float(sec["v0"]),
        "s0": float(reward.get("S0", 1.0)),
    }
    return montecarlo.ExperimentPlan(trials, seed, "am-bound", params)


def _fractions_of(section: Mapping) -> list[float]:
    fractions = [float(x) for x in section["fractions"]]
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(
            f"party fractions must sum to 1, got {sum(fractions)!r}"
        )
    return fractions


# ---------------------------------------------------------------------------
# output writers
# ---------------------------------------------------------------------------


def _write_histogram_csv(path: Path, result: montecarlo.AggregateResult) -> None:
    lines = ["bin_left,bin_right,count"]
    for left, right, count in zip(
        result.bin_edges[:-1], result.bin_edges[1:], result.histogram
    ):
        lines.append(f"{_fmt(left)},{_fmt(right)},{int(count)}")
    path.write_text("\n".join(lines) + "\n")


def _write_summary(
    path: Path, result: montecarlo.AggregateResult, ks: float | None = None
) -> None:
    lines = [
        f"mean: {_fmt(result.mean)}",
        f"variance: {_fmt(result.sample_variance)}",
        f"stderr: {_fmt(result.stderr_of_mean)}",
        f"ks: {_fmt(ks) if ks is not None else 'n/a'}",
        f"trials: {result.trials}",
        f"seed: {result.master_seed}",
    ]
    path.write_text("\n".join(lines) + "\n")


def _reference_cdf(name: str, args: Sequence[float]):
    if name == "beta":
        from scipy.stats import beta as beta_dist

        a, b = float(args[0]), float(args[1])
        return lambda x: beta_dist.cdf(x, a, b)
    raise ConfigError(f"unknown reference distribution {name!r}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_variance(args: argparse.Namespace, out: IO[str]) -> int:
    t, r, s0, v0 = args.T, args.R, args.S0, args.v0
    if args.family == "constant":
        norm = analytics.normalized_variance_constant(t, r, s0)
    elif args.family == "geometric":
        norm = analytics.normalized_variance_geometric(t, r, s0)
    elif args.family == "decreasing":
        alpha = args.alpha if args.alpha is not None else 1.0 / t
        params = DecreasingRewardParams(alpha=alpha, target_total=r)
        norm = analytics.normalized_variance_decreasing(t, params, s0)
    else:
        checkpoints = _parse_checkpoints(args.checkpoints)
        schedule = schedule_from_spec(
            {"family": "composed", "checkpoints": checkpoints, "S0": s0}
        )
        norm = analytics.normalized_variance(schedule)
    cap = v0 * (1.0 - v0)
    out.write(f"family: {args.family}\n")
    out.write(f"normalized_variance: {_fmt(norm)}\n")
    out.write(f"absolute_variance: {_fmt(norm * cap)}\n")
    out.write(f"epsilon_tilde: {_fmt(norm)}\n")
    out.write(f"variance_cap: {_fmt(cap)}\n")
    return _EXIT_OK


def _parse_checkpoints(text: str | None) -> list[list[float]]:
    if not text:
        raise ConfigError(
            "--checkpoints is required for the composed family "
            "(format: end:reward,end:reward,...)"
        )
    pairs = []
    for chunk in text.split(","):
        end, _, reward = chunk.partition(":")
        pairs.append([int(end), float(reward)])
    return pairs


def cmd_design(args: argparse.Namespace, out: IO[str]) -> int:
    t, eps = args.T, args.eps
    if args.family == "geometric":
        r = analytics.max_reward_geometric(t, eps)
        achieved = analytics.normalized_variance_geometric(t, r)
    else:
        r = analytics.max_reward_constant(t, eps)
        achieved = analytics.normalized_variance_constant(t, r)
    out.write(f"family: {args.family}\n")
    out.write(f"T: {t}\n")
    out.write(f"target_eps: {_fmt(eps)}\n")
    out.write(f"max_reward: {_fmt(r)}\n")
    out.write(f"achieved_normalized_variance: {_fmt(achieved)}\n")
    out.write(f"residual: {_fmt(achieved - eps)}\n")
    return _EXIT_OK


def _run_curves(name: str, doc: Mapping, outdir: Path, out: IO[str]) -> None:
    sec = doc["curves"]
    kind = sec.get("kind")
    t_grid = [int(t) for t in sec["T_grid"]]
    if kind == "variance":
        rows = analytics.variance_curve_rows(
            t_grid,
            float(sec["R"]),
            float(sec.get("S0", 1.0)),
            families=sec.get("families", ("constant", "geometric", "decreasing")),
            alpha=sec.get("alpha"),
        )
        header = "T,family,normalized_variance"
    elif kind == "max_reward":
        rows = analytics.max_reward_curve_rows(
            t_grid,
            float(sec["eps"]),
            families=sec.get("families", ("constant", "geometric")),
        )
        header = "T,family,max_reward"
    else:
        raise ConfigError(f"unknown curves kind {kind!r}")
    path = outdir / f"{name}_curve.csv"
    lines = [header] + [f"{t},{family},{_fmt(value)}" for t, family, value in rows]
    path.write_text("\n".join(lines) + "\n")
    out.write(f"{name}: wrote {path}\n")


def _run_sweep(name: str, doc: Mapping, outdir: Path, workers: int, out: IO[str]) -> None:
    """Reward sweep producing one CSV row per (R, scenario variant)."""
    sweep = doc["sweep"]
    r_values = [float(r) for r in sweep["R"]]
    section = _scenario_section(doc)
    if section not in ("adversary", "bound"):
        raise ConfigError("sweeps support adversary and bound scenarios")
    rows = []
    for r in r_values:
        sub = {k: v for k, v in doc.items() if k != "sweep"}
        sub["reward"] = dict(sub["reward"])
        sub["reward"]["R"] = r
        plan = _plan_from_config(sub)
        result = montecarlo.run_experiment(plan, workers=workers)
        s0 = float(sub["reward"].get("S0", 1.0))
        v0 = float(plan.params["v0"])
        mean_rel = result.mean / v0
        stderr_rel = result.stderr_of_mean / v0
        if section == "adversary":
            rows.append(
                f"{_fmt(r / s0)},{plan.params['k']},{_fmt(plan.params['gamma'])},"
                f"{_fmt(mean_rel)},{_fmt(stderr_rel)}"
            )
        else:
            t = plan.params["t"]
            c = plan.params["c"]
            if bounds.closed_form_regime_ok(t, c, v0, s0):
                closed = bounds.am2_mean_closed_form(t, c, v0, s0)
                closed_text = _fmt(closed.expected_final_fraction / v0)
            else:
                closed_text = ""
            rows.append(
                f"{_fmt(r / s0)},{plan.params['variant']},"
                f"{_fmt(mean_rel)},{_fmt(stderr_rel)},{closed_text}"
            )
    if section == "adversary":
        header = "R_over_S0,k,gamma,mean_relative_fraction,stderr"
    else:
        header = "R_over_S0,variant,mean_relative_fraction,stderr,closed_form_if_valid"
    path = outdir / f"{name}_sweep.csv"
    path.write_text("\n".join([header] + rows) + "\n")
    out.write(f"{name}: wrote {path}\n")


def run_config(
    doc: Mapping, outdir: Path, workers: int = 1, out: IO[str] = sys.stdout
) -> None:
    """Execute every run in a config document, writing outputs to ``outdir``."""
    outdir.mkdir(parents=True, exist_ok=True)
    for name, sub in _experiment_plans(doc):
        if "curves" in sub:
            _run_curves(name, sub, outdir, out)
            continue
        if "sweep" in sub:
            _run_sweep(name, sub, outdir, workers, out)
            continue
        plan = _plan_from_config(sub)
        result = montecarlo.run_experiment(plan, workers=workers)
        ks = None
        ref = sub.get("ks_reference")
        if ref:
            cdf = _reference_cdf(ref["distribution"], ref.get("args", ()))
            ks = montecarlo.ks_distance(result.ecdf, cdf)
        _write_histogram_csv(outdir / f"{name}_hist.csv", result)
        _write_summary(outdir / f"{name}_summary.txt", result, ks)
        out.write(
            f"{name}: mean={_fmt(result.mean)} variance="
            f"{_fmt(result.sample_variance)} trials={result.trials}\n"
        )


def cmd_simulate(args: argparse.Namespace, out: IO[str]) -> int:
    doc = load_config(args.config)
    if args.trials is not None:
        doc = dict(doc)
        doc.setdefault("run", {})
        doc["run"] = dict(doc["run"])
        doc["run"]["trials"] = args.trials
    run_config(doc, Path(args.out), workers=args.workers, out=out)
    return _EXIT_OK


def cmd_verify_optimal(args: argparse.Namespace, out: IO[str]) -> int:
    certificate = analytics.verify_geometric_optimality(args.T, args.R, args.step)
    out.write(f"T: {certificate.slots}\n")
    out.write(f"R: {_fmt(certificate.total_reward)}\n")
    out.write(f"points_evaluated: {certificate.points_evaluated}\n")
    out.write(
        "grid_minimizer: "
        + " ".join(_fmt(x) for x in certificate.grid_minimizer)
        + "\n"
    )
    out.write(f"grid_min_value: {_fmt(certificate.grid_min_value)}\n")
    out.write(f"uniform_value: {_fmt(certificate.uniform_value)}\n")
    out.write(f"max_violation: {_fmt(certificate.max_violation)}\n")
    if certificate.max_violation > 1e-12:
        out.write("verdict: FAIL\n")
        return _EXIT_USER
    out.write("verdict: PASS\n")
    return _EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stakesim",
        description="Stake-evolution simulation and reward-schedule analytics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_var = sub.add_parser("variance", help="closed-form variance of a schedule")
    p_var.add_argument(
        "--family",
        required=True,
        choices=["constant", "geometric", "decreasing", "composed"],
    )
    p_var.add_argument("--T", type=int, default=1)
    p_var.add_argument("--R", type=float, default=0.0)
    p_var.add_argument("--S0", type=float, default=1.0)
    p_var.add_argument("--v0", type=float, default=0.5)
    p_var.add_argument("--alpha", type=float, default=None)
    p_var.add_argument("--checkpoints", type=str, default=None)
    p_var.set_defaults(func=cmd_variance)

    p_design = sub.add_parser(
        "design", help="largest reward total for a target normalized variance"
    )
    p_design.add_argument("--family", required=True, choices=["constant", "geometric"])
    p_design.add_argument("--T", type=int, required=True)
    p_design.add_argument("--eps", type=float, required=True)
    p_design.set_defaults(func=cmd_design)

    p_sim = sub.add_parser("simulate", help="run an experiment config")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", default=".")
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.add_argument("--trials", type=int, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_verify = sub.add_parser(
        "verify-optimal", help="grid certificate for the constant-growth profile"
    )
    p_verify.add_argument("--T", type=int, required=True)
    p_verify.add_argument("--R", type=float, required=True)
    p_verify.add_argument("--step", type=float, required=True)
    p_verify.set_defaults(func=cmd_verify_optimal)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, sys.stdout)
    except (StakeSimError, FileNotFoundError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_USER
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return _EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
