"""Sweep experiments over class-2 load, CSV emission, and sim-vs-theory checks.

A sweep takes a base system, steps the class-2 arrival rate over a grid,
and for each stable point runs every requested scheduler for a set of
replicates.  The proposed time-share runs at the alpha the split solver
picks for that point, and an analytic row carrying the blended-delay
prediction is emitted alongside so theory and simulation are directly
comparable in one file.

Common random numbers: every (grid point, scheduler) replicate set derives
its per-replicate seeds from the one master seed, so schedulers are compared
on identical traffic sample paths and curves vary smoothly along the grid.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from typing import IO, Iterable

from .alphaopt import log_system_utility, solve_alpha
from .engine import SimSpec, replicate
from .mg1 import blended_delay, delay_table
from .policies import (
    FairAlternation,
    MaxWeight,
    Policy,
    PriorityTo,
    TimeShared,
    WeightedRoundRobin,
    wrr_weights,
)
from .traffic import SystemConfig, UnstableSystemError

__all__ = [
    "CSV_COLUMNS",
    "SCHEDULER_NAMES",
    "ANALYTIC_SCHEDULER",
    "SweepSpec",
    "SweepRow",
    "SweepResult",
    "ValidationCheck",
    "ValidationReport",
    "config_with_lambda2",
    "default_lambda2_grid",
    "grid_from_range",
    "policy_for",
    "replicate_rows",
    "run_sweep",
    "validate",
    "write_sweep_csv",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "lambda2",
    "scheduler",
    "alpha_star",
    "analytic_l1",
    "analytic_l2",
    "sim_l1",
    "sim_l1_ci",
    "sim_l2",
    "sim_l2_ci",
    "var_l1",
    "var_l2",
    "U1",
    "U2",
    "logV",
    "replications",
    "master_seed",
)

SCHEDULER_NAMES = ("proposed", "priority1", "priority2", "wrr", "maxweight", "fair")

# analytic prediction rows for the proposed scheduler use this pseudo-name
ANALYTIC_SCHEDULER = "proposed_analytic"


def config_with_lambda2(cfg: SystemConfig, lambda2: float) -> SystemConfig:
    """Copy of a system with the class-2 arrival rate replaced."""
    return replace(cfg, class2=replace(cfg.class2, arrival_rate=lambda2))


def grid_from_range(
    start: float, stop: float, step: float, fine: bool = True
) -> tuple[float, ...]:
    """Load grid in integer milli-units so float stepping cannot drift.

    The optional fine refinement adds 0.005-spaced points on [0.15, 0.20]
    (clipped to the requested range), where the optimal priority split
    transitions between its endpoints.
    """
    if not step > 0.0:
        raise ValueError(f"step must be positive, got {step}")
    if stop < start:
        raise ValueError(f"empty range: start {start} > stop {stop}")
    lo, hi, inc = round(start * 1000), round(stop * 1000), round(step * 1000)
    if inc < 1:
        raise ValueError(f"step {step} is below the 0.001 grid resolution")
    mills = set(range(lo, hi + 1, inc))
    if fine:
        mills.update(m for m in range(150, 201, 5) if lo <= m <= hi)
    return tuple(m / 1000.0 for m in sorted(mills))


def default_lambda2_grid(fine: bool = True) -> tuple[float, ...]:
    """The reference sweep: 0.01 to 0.46 step 0.025 plus the fine segment."""
    return grid_from_range(0.01, 0.46, 0.025, fine)


def policy_for(
    name: str,
    cfg: SystemConfig,
    alpha: float | None = None,
    weights: tuple[int, int] | None = None,
    mode: str = "per_busy_period",
    cycle: float | None = None,
) -> Policy:
    """Build a policy by its sweep name.

    For ``proposed`` the priority split defaults to the solver's optimum for
    ``cfg``; for ``wrr`` the weights default to :func:`wrr_weights`.
    """
    if name == "proposed":
        if alpha is None:
            alpha = solve_alpha(cfg).alpha
        return TimeShared(alpha=alpha, mode=mode, cycle=cycle)
    if name == "priority1":
        return PriorityTo(1)
    if name == "priority2":
        return PriorityTo(2)
    if name == "wrr":
        if weights is None:
            weights = wrr_weights(cfg)
        return WeightedRoundRobin(*weights)
    if name == "maxweight":
        return MaxWeight()
    if name == "fair":
        return FairAlternation()
    raise ValueError(
        f"unknown scheduler {name!r}; expected one of {', '.join(SCHEDULER_NAMES)}"
    )


@dataclass(frozen=True)
class SweepSpec:
    """A full sweep experiment.

    Attributes:
        base: System whose class-2 arrival rate the grid overrides.
        lambda2_grid: Class-2 arrival rates to visit.
        schedulers: Sweep names to run at every point.
        horizon: Simulated seconds per replicate.
        warmup_fraction: Leading fraction discarded per replicate.
        replications: Replicates per (point, scheduler).
        master_seed: Root of every random stream in the sweep.
        jobs: Worker processes for replicates; 1 runs inline.
    """

    base: SystemConfig
    lambda2_grid: tuple[float, ...]
    schedulers: tuple[str, ...] = SCHEDULER_NAMES
    horizon: float = 200_000.0
    warmup_fraction: float = 0.1
    replications: int = 5
    master_seed: int = 12345
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.lambda2_grid:
            raise ValueError("lambda2_grid must not be empty")
        if any(lam < 0.0 for lam in self.lambda2_grid):
            raise ValueError("lambda2 values must be nonnegative")
        if self.replications < 1:
            raise ValueError(f"replications must be at least 1, got {self.replications}")
        unknown = [s for s in self.schedulers if s not in SCHEDULER_NAMES]
        if unknown:
            raise ValueError(f"unknown schedulers: {', '.join(unknown)}")


@dataclass(frozen=True)
class SweepRow:
    """One CSV row; None marks a value that does not apply to the row."""

    lambda2: float
    scheduler: str
    alpha_star: float | None
    analytic_l1: float | None
    analytic_l2: float | None
    sim_l1: float | None
    sim_l1_ci: float | None
    sim_l2: float | None
    sim_l2_ci: float | None
    var_l1: float | None
    var_l2: float | None
    U1: float
    U2: float
    logV: float
    replications: int | None
    master_seed: int


@dataclass(frozen=True)
class SweepResult:
    """All rows of a sweep plus any skipped grid points."""

    spec: SweepSpec
    rows: tuple[SweepRow, ...]
    skipped: tuple[tuple[float, str], ...]

    def rows_for(self, scheduler: str) -> tuple[SweepRow, ...]:
        return tuple(r for r in self.rows if r.scheduler == scheduler)


def _utilities(cfg: SystemConfig, l1: float, l2: float) -> tuple[float, float, float]:
    u1 = cfg.class1.curve.utility(l1)
    u2 = cfg.class2.curve.utility(l2)
    logv = (
        cfg.class1.weight * cfg.class1.curve.log_utility(l1)
        + cfg.class2.weight * cfg.class2.curve.log_utility(l2)
    )
    return u1, u2, logv


def replicate_rows(
    cfg: SystemConfig,
    scheduler: str,
    runs: tuple,
    summary,
    replications: int,
    master_seed: int,
    alpha: float | None = None,
    table=None,
) -> list[SweepRow]:
    """Rows for one replicate set, one per run, with the set-level CI repeated.

    Analytic delay columns are filled for the schedulers with a closed form
    (proposed at the simulated alpha, and both pure priorities); ``alpha`` is
    required for the proposed scheduler so the row reports the split that was
    actually simulated.
    """
    if table is None:
        table = delay_table(cfg)
    if scheduler == "proposed":
        if alpha is None:
            raise ValueError("proposed rows need the alpha that was simulated")
        blend = blended_delay(cfg, alpha, table)
        alpha_star: float | None = alpha
        analytic: tuple[float | None, float | None] = (blend.l1, blend.l2)
    elif scheduler == "priority1":
        alpha_star, analytic = None, (table.l11, table.l21)
    elif scheduler == "priority2":
        alpha_star, analytic = None, (table.l12, table.l22)
    else:
        alpha_star, analytic = None, (None, None)
    rows = []
    for r in runs:
        l1 = r.class1.mean_sojourn
        l2 = r.class2.mean_sojourn
        u1, u2, logv = _utilities(cfg, l1, l2)
        rows.append(
            SweepRow(
                lambda2=cfg.class2.arrival_rate,
                scheduler=scheduler,
                alpha_star=alpha_star,
                analytic_l1=analytic[0],
                analytic_l2=analytic[1],
                sim_l1=l1,
                sim_l1_ci=summary.l1.ci_halfwidth,
                sim_l2=l2,
                sim_l2_ci=summary.l2.ci_halfwidth,
                var_l1=r.class1.sojourn_variance,
                var_l2=r.class2.sojourn_variance,
                U1=u1,
                U2=u2,
                logV=logv,
                replications=replications,
                master_seed=master_seed,
            )
        )
    return rows


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Run the sweep and collect every row.

    Unstable grid points are skipped with a logged reason instead of
    aborting the rest of the sweep.
    """
    rows: list[SweepRow] = []
    skipped: list[tuple[float, str]] = []
    for lambda2 in spec.lambda2_grid:
        cfg = config_with_lambda2(spec.base, lambda2)
        if not cfg.is_stable:
            reason = (
                f"utilization {cfg.total_utilization:.6g} >= 1 at lambda2={lambda2:g}"
            )
            log.warning("skipping unstable sweep point: %s", reason)
            skipped.append((lambda2, reason))
            continue
        table = delay_table(cfg)
        sol = solve_alpha(cfg, table=table)
        blend = blended_delay(cfg, sol.alpha, table)
        u1, u2, logv = _utilities(cfg, blend.l1, blend.l2)
        rows.append(
            SweepRow(
                lambda2=lambda2,
                scheduler=ANALYTIC_SCHEDULER,
                alpha_star=sol.alpha,
                analytic_l1=blend.l1,
                analytic_l2=blend.l2,
                sim_l1=None,
                sim_l1_ci=None,
                sim_l2=None,
                sim_l2_ci=None,
                var_l1=None,
                var_l2=None,
                U1=u1,
                U2=u2,
                logV=logv,
                replications=None,
                master_seed=spec.master_seed,
            )
        )
        for name in spec.schedulers:
            policy = policy_for(name, cfg, alpha=sol.alpha)
            sim_spec = SimSpec(
                config=cfg,
                policy=policy,
                horizon=spec.horizon,
                seed=spec.master_seed,
                warmup_fraction=spec.warmup_fraction,
            )
            runs, summary = replicate(sim_spec, spec.replications, jobs=spec.jobs)
            rows.extend(
                replicate_rows(
                    cfg,
                    name,
                    runs,
                    summary,
                    spec.replications,
                    spec.master_seed,
                    alpha=sol.alpha,
                    table=table,
                )
            )
    return SweepResult(spec=spec, rows=tuple(rows), skipped=tuple(skipped))


def _cell(value: float | int | str | None) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_sweep_csv(result: SweepResult | Iterable[SweepRow], out: IO[str]) -> int:
    """Write rows in the fixed column order; returns the data-row count.

    Floats are written with repr so identical sweeps produce byte-identical
    files.
    """
    rows = result.rows if isinstance(result, SweepResult) else tuple(result)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_cell(getattr(row, col)) for col in CSV_COLUMNS])
    return len(rows)


@dataclass(frozen=True)
class ValidationCheck:
    """One analytic-vs-simulated comparison.

    ``passed`` is None when the check does not apply (for example class-2
    delays with no class-2 traffic).
    """

    name: str
    analytic: float | None
    simulated: float | None
    rel_error: float | None
    tolerance: float
    passed: bool | None


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate`; ``error`` carries a setup failure."""

    checks: tuple[ValidationCheck, ...]
    tolerance: float
    error: str | None = None

    @property
    def passed(self) -> bool:
        if self.error is not None:
            return False
        return all(c.passed is not False for c in self.checks)


def validate(
    cfg: SystemConfig,
    tolerance: float = 0.02,
    horizon: float = 2_000_000.0,
    warmup_fraction: float = 0.1,
    seed: int = 0,
) -> ValidationReport:
    """Check the closed-form delay table against pure-priority simulations.

    Runs priority-to-1 and priority-to-2 once each and compares all four
    mean sojourn times at the given relative tolerance.
    """
    if not tolerance > 0.0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    try:
        cfg.require_stable()
    except UnstableSystemError as exc:
        return ValidationReport(checks=(), tolerance=tolerance, error=str(exc))
    table = delay_table(cfg)
    targets = {"l11": table.l11, "l21": table.l21, "l12": table.l12, "l22": table.l22}
    simulated: dict[str, float | None] = {}
    for cls, names in ((1, ("l11", "l21")), (2, ("l12", "l22"))):
        m = replicate(
            SimSpec(
                config=cfg,
                policy=PriorityTo(cls),
                horizon=horizon,
                seed=seed,
                warmup_fraction=warmup_fraction,
            ),
            1,
        )[0][0]
        simulated[names[0]] = m.class1.mean_sojourn
        simulated[names[1]] = m.class2.mean_sojourn
    checks = []
    for name, want in targets.items():
        got = simulated[name]
        applicable = (
            cfg.class1.arrival_rate > 0.0
            if name in ("l11", "l12")
            else cfg.class2.arrival_rate > 0.0
        )
        if not applicable:
            checks.append(ValidationCheck(name, want, None, None, tolerance, None))
            continue
        rel = abs(got - want) / want
        checks.append(
            ValidationCheck(name, want, got, rel, tolerance, rel <= tolerance)
        )
    return ValidationReport(checks=tuple(checks), tolerance=tolerance)
