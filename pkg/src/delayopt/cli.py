"""Command line for the delay-optimal time-sharing toolkit.

Subcommands:
    solve      optimal priority split and the closed-form quantities behind it
    simulate   replicated discrete-event runs of the configured scheduler
    sweep      class-2 load sweep over all schedulers, written as CSV
    validate   closed-form delay table versus pure-priority simulations

All subcommands read the same INI config (``--config``), refined by repeated
``--set section.key=value`` overrides.  Exit codes: 0 on success, 1 when a
validation or conservation check fails, 2 for configuration or usage errors.
"""
from __future__ import annotations

import argparse
import sys
from contextlib import contextmanager
from dataclasses import replace
from typing import IO, Iterator, Sequence

from .alphaopt import (
    DegenerateGapError,
    optimality_constants,
    solve_alpha,
)
from .config import AppConfig, ConfigError, load_config
from .engine import (
    RNG_ALGORITHM,
    InsufficientDataError,
    SimSpec,
    WorkConservationError,
    replicate,
)
from .harness import replicate_rows, run_sweep, validate, write_sweep_csv
from .mg1 import blended_delay, delay_table
from .policies import TimeShared, WeightedRoundRobin
from .traffic import UnstableSystemError

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_FAILED", "EXIT_USAGE"]

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delayopt",
        description=(
            "Delay-optimal time-shared priority scheduling for two Poisson "
            "traffic classes on one server."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--config",
            metavar="PATH",
            default=None,
            help="INI config file; omitted means the built-in defaults",
        )
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override one config value; repeatable",
        )
        p.add_argument(
            "--out",
            metavar="PATH",
            default=None,
            help="write output to this file instead of stdout",
        )
        p.add_argument(
            "--format",
            choices=("text", "csv"),
            default="text",
            help="output format (sweep always writes CSV)",
        )
        p.add_argument(
            "--seed",
            type=int,
            default=None,
            metavar="N",
            help="override simulation.master_seed",
        )
        p.add_argument(
            "--jobs",
            type=int,
            default=1,
            metavar="N",
            help="worker processes for replicates; 1 runs inline",
        )

    p_solve = sub.add_parser(
        "solve", help="optimal priority split for the configured system"
    )
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sim = sub.add_parser(
        "simulate", help="replicated simulations of the configured scheduler"
    )
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser(
        "sweep", help="class-2 load sweep over all schedulers, written as CSV"
    )
    common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser(
        "validate", help="closed-form delays versus pure-priority simulations"
    )
    common(p_val)
    p_val.add_argument(
        "--tolerance",
        type=float,
        default=0.02,
        metavar="REL",
        help="relative error allowed per delay check (default 0.02)",
    )
    p_val.set_defaults(func=cmd_validate)
    return parser


@contextmanager
def _open_out(path: str | None) -> Iterator[IO[str]]:
    if path is None:
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8", newline="") as f:
        yield f


def _emit_pairs(pairs: Sequence[tuple[str, object]], fmt: str, out: IO[str]) -> None:
    """key/value report as aligned text or two-column CSV."""
    def render(value: object) -> str:
        if isinstance(value, float):
            return repr(value)
        return str(value)

    if fmt == "csv":
        out.write("key,value\n")
        for key, value in pairs:
            out.write(f"{key},{render(value)}\n")
    else:
        for key, value in pairs:
            out.write(f"{key} = {render(value)}\n")


def _load(args: argparse.Namespace) -> AppConfig:
    app = load_config(args.config, args.overrides)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be nonnegative, got {args.seed}")
        app = replace(
            app, simulation=replace(app.simulation, master_seed=args.seed)
        )
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be at least 1, got {args.jobs}")
    return app


def cmd_solve(app: AppConfig, args: argparse.Namespace) -> int:
    cfg = app.system
    cfg.require_stable()
    table = delay_table(cfg)
    sol = solve_alpha(cfg, table=table)
    blend = blended_delay(cfg, sol.alpha, table)
    pairs: list[tuple[str, object]] = [
        ("alpha_star", sol.alpha),
        ("branch", sol.method),
        ("iterations", sol.iterations),
        ("z_prime_at_0", sol.z_prime_at_0),
        ("z_prime_at_1", sol.z_prime_at_1),
        ("l11", table.l11),
        ("l12", table.l12),
        ("l21", table.l21),
        ("l22", table.l22),
        ("blended_l1", blend.l1),
        ("blended_l2", blend.l2),
        ("log_system_utility", sol.log_utility),
    ]
    try:
        consts = optimality_constants(cfg, table=table)
        pairs += [
            ("theta", consts.theta),
            ("phi", consts.phi),
            ("phi11", consts.phi11),
            ("phi12", consts.phi12),
            ("phi21", consts.phi21),
            ("phi22", consts.phi22),
        ]
    except DegenerateGapError:
        # one-sided traffic has no interior stationary point to characterize
        pass
    with _open_out(args.out) as out:
        _emit_pairs(pairs, args.format, out)
    return EXIT_OK


def cmd_simulate(app: AppConfig, args: argparse.Namespace) -> int:
    cfg = app.system
    cfg.require_stable()
    policy = app.build_policy()
    sim = app.simulation
    spec = SimSpec(
        config=cfg,
        policy=policy,
        horizon=sim.horizon,
        seed=sim.master_seed,
        warmup_fraction=sim.warmup_fraction,
    )
    runs, summary = replicate(spec, sim.replications, jobs=args.jobs)
    alpha = policy.alpha if isinstance(policy, TimeShared) else None
    if args.format == "csv":
        rows = replicate_rows(
            cfg,
            policy.name,
            runs,
            summary,
            sim.replications,
            sim.master_seed,
            alpha=alpha,
        )
        with _open_out(args.out) as out:
            write_sweep_csv(rows, out)
        return EXIT_OK
    l1, l2 = summary.l1.mean, summary.l2.mean
    u1 = cfg.class1.curve.utility(l1)
    u2 = cfg.class2.curve.utility(l2)
    logv = (
        cfg.class1.weight * cfg.class1.curve.log_utility(l1)
        + cfg.class2.weight * cfg.class2.curve.log_utility(l2)
    )
    pairs: list[tuple[str, object]] = [("scheduler", policy.name)]
    if alpha is not None:
        pairs.append(("alpha", alpha))
    if isinstance(policy, WeightedRoundRobin):
        pairs += [("weight1", policy.weight1), ("weight2", policy.weight2)]
    pairs += [
        ("replications", sim.replications),
        ("horizon", sim.horizon),
        ("warmup_fraction", sim.warmup_fraction),
        ("master_seed", sim.master_seed),
        ("rng", RNG_ALGORITHM),
        ("class1_mean_sojourn", l1),
        ("class1_ci95", summary.l1.ci_halfwidth),
        ("class1_sojourn_variance", summary.var1.mean),
        ("class2_mean_sojourn", l2),
        ("class2_ci95", summary.l2.ci_halfwidth),
        ("class2_sojourn_variance", summary.var2.mean),
        ("busy_fraction", summary.busy_fraction.mean),
        ("U1", u1),
        ("U2", u2),
        ("logV", logv),
    ]
    with _open_out(args.out) as out:
        _emit_pairs(pairs, args.format, out)
    return EXIT_OK


def cmd_sweep(app: AppConfig, args: argparse.Namespace) -> int:
    spec = app.sweep_spec(jobs=args.jobs)
    result = run_sweep(spec)
    with _open_out(args.out) as out:
        n = write_sweep_csv(result, out)
    print(
        f"sweep: {n} rows over {len(spec.lambda2_grid) - len(result.skipped)} "
        f"grid points ({len(result.skipped)} skipped)",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_validate(app: AppConfig, args: argparse.Namespace) -> int:
    if not args.tolerance > 0.0:
        raise ConfigError(f"--tolerance must be positive, got {args.tolerance}")
    sim = app.simulation
    report = validate(
        app.system,
        tolerance=args.tolerance,
        horizon=sim.horizon,
        warmup_fraction=sim.warmup_fraction,
        seed=sim.master_seed,
    )
    with _open_out(args.out) as out:
        if args.format == "csv":
            out.write("check,analytic,simulated,rel_error,tolerance,passed\n")
            for c in report.checks:
                cells = [
                    c.name,
                    "" if c.analytic is None else repr(c.analytic),
                    "" if c.simulated is None else repr(c.simulated),
                    "" if c.rel_error is None else repr(c.rel_error),
                    repr(c.tolerance),
                    "" if c.passed is None else str(c.passed),
                ]
                out.write(",".join(cells) + "\n")
            if report.error is not None:
                out.write(f"error,{report.error!r},,,,\n")
        else:
            out.write(f"tolerance = {report.tolerance!r}\n")
            if report.error is not None:
                out.write(f"error: {report.error}\n")
            for c in report.checks:
                if c.passed is None:
                    out.write(f"{c.name}: not applicable (no such traffic)\n")
                    continue
                verdict = "pass" if c.passed else "FAIL"
                out.write(
                    f"{c.name}: analytic={c.analytic!r} simulated={c.simulated!r} "
                    f"rel_error={c.rel_error:.3e} -> {verdict}\n"
                )
            out.write(
                f"validation {'PASSED' if report.passed else 'FAILED'}\n"
            )
    return EXIT_OK if report.passed else EXIT_FAILED


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        app = _load(args)
        return args.func(app, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnstableSystemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WorkConservationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
