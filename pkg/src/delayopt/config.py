"""INI-style configuration for the solver, simulator, and sweep.

Sections and keys mirror the model: ``[system]`` for the server,
``[class1]``/``[class2]`` for the traffic classes, ``[simulation]`` for run
control, ``[scheduler]`` for the policy under test, and ``[sweep]`` for the
class-2 load grid.  Every key has a default (the reference two-class
workload), unknown sections or keys are rejected, and ``section.key=value``
override strings refine a parsed file from the command line.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .harness import SCHEDULER_NAMES, SweepSpec, grid_from_range, policy_for
from .policies import Policy
from .traffic import ClassParams, SystemConfig, UtilityCurve

__all__ = [
    "AppConfig",
    "ConfigError",
    "SchedulerSettings",
    "SimulationSettings",
    "SweepSettings",
    "default_config_text",
    "load_config",
    "parse_config",
    "serialize_config",
]


class ConfigError(ValueError):
    """Raised for malformed, unknown, or out-of-range configuration."""


_DEFAULTS: dict[str, dict[str, str]] = {
    "system": {"r": "100.0"},
    "class1": {
        "lambda": "0.4",
        "size": "100.0",
        "a": "1.0",
        "b": "5.0",
        "beta": "1.0",
    },
    "class2": {
        "lambda": "0.2",
        "size": "100.0",
        "a": "0.3",
        "b": "10.0",
        "beta": "0.3",
    },
    "simulation": {
        "horizon": "200000.0",
        "warmup_fraction": "0.1",
        "replications": "5",
        "master_seed": "12345",
    },
    "scheduler": {
        "variant": "proposed",
        "alpha": "",
        "weight1": "",
        "weight2": "",
        "switching": "per_busy_period",
        "cycle": "",
    },
    "sweep": {
        "lambda2_start": "0.01",
        "lambda2_stop": "0.46",
        "lambda2_step": "0.025",
        "fine_grid": "true",
        "schedulers": ", ".join(SCHEDULER_NAMES),
    },
}

_BOOL_STRINGS = {
    "true": True,
    "yes": True,
    "on": True,
    "1": True,
    "false": False,
    "no": False,
    "off": False,
    "0": False,
}


@dataclass(frozen=True)
class SimulationSettings:
    horizon: float
    warmup_fraction: float
    replications: int
    master_seed: int


@dataclass(frozen=True)
class SchedulerSettings:
    variant: str
    alpha: float | None
    weight1: int | None
    weight2: int | None
    switching: str
    cycle: float | None


@dataclass(frozen=True)
class SweepSettings:
    lambda2_start: float
    lambda2_stop: float
    lambda2_step: float
    fine_grid: bool
    schedulers: tuple[str, ...]


@dataclass(frozen=True)
class AppConfig:
    """Fully validated configuration."""

    system: SystemConfig
    simulation: SimulationSettings
    scheduler: SchedulerSettings
    sweep: SweepSettings

    def build_policy(self) -> Policy:
        """The configured scheduling policy.

        For the proposed variant without an explicit alpha, the optimal
        split for the configured system is solved on the spot.
        """
        s = self.scheduler
        weights = None
        if s.weight1 is not None and s.weight2 is not None:
            weights = (s.weight1, s.weight2)
        return policy_for(
            s.variant,
            self.system,
            alpha=s.alpha,
            weights=weights,
            mode=s.switching,
            cycle=s.cycle,
        )

    def sweep_spec(self, jobs: int = 1) -> SweepSpec:
        """Sweep derived from the ``[sweep]`` and ``[simulation]`` sections."""
        sw = self.sweep
        return SweepSpec(
            base=self.system,
            lambda2_grid=grid_from_range(
                sw.lambda2_start, sw.lambda2_stop, sw.lambda2_step, sw.fine_grid
            ),
            schedulers=sw.schedulers,
            horizon=self.simulation.horizon,
            warmup_fraction=self.simulation.warmup_fraction,
            replications=self.simulation.replications,
            master_seed=self.simulation.master_seed,
            jobs=jobs,
        )


def _as_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} must be a number, got {raw!r}") from exc


def _as_int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} must be an integer, got {raw!r}") from exc


def _as_bool(section: str, key: str, raw: str) -> bool:
    try:
        return _BOOL_STRINGS[raw.strip().lower()]
    except KeyError as exc:
        raise ConfigError(f"[{section}] {key} must be a boolean, got {raw!r}") from exc


def _optional(raw: str) -> str | None:
    raw = raw.strip()
    return raw if raw else None


def _merged_tables(
    text: str | None, overrides: Iterable[str]
) -> dict[str, dict[str, str]]:
    tables = {sec: dict(keys) for sec, keys in _DEFAULTS.items()}
    if text is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config does not parse: {exc}") from exc
        for section in parser.sections():
            if section not in tables:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in tables[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                tables[section][key] = value
    for item in overrides:
        target, sep, value = item.partition("=")
        section, dot, key = target.strip().partition(".")
        if not sep or not dot or not section or not key:
            raise ConfigError(
                f"override {item!r} is not of the form section.key=value"
            )
        section, key = section.strip(), key.strip()
        if section not in tables:
            raise ConfigError(f"unknown config section [{section}]")
        if key not in tables[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        tables[section][key] = value.strip()
    return tables


def _build(tables: Mapping[str, Mapping[str, str]]) -> AppConfig:
    def cls_params(section: str) -> ClassParams:
        t = tables[section]
        try:
            return ClassParams(
                arrival_rate=_as_float(section, "lambda", t["lambda"]),
                packet_size=_as_float(section, "size", t["size"]),
                curve=UtilityCurve(
                    steepness=_as_float(section, "a", t["a"]),
                    inflection=_as_float(section, "b", t["b"]),
                ),
                weight=_as_float(section, "beta", t["beta"]),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"[{section}] {exc}") from exc

    try:
        system = SystemConfig(
            server_rate=_as_float("system", "r", tables["system"]["r"]),
            class1=cls_params("class1"),
            class2=cls_params("class2"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[system] {exc}") from exc

    sim_t = tables["simulation"]
    simulation = SimulationSettings(
        horizon=_as_float("simulation", "horizon", sim_t["horizon"]),
        warmup_fraction=_as_float(
            "simulation", "warmup_fraction", sim_t["warmup_fraction"]
        ),
        replications=_as_int("simulation", "replications", sim_t["replications"]),
        master_seed=_as_int("simulation", "master_seed", sim_t["master_seed"]),
    )
    if not simulation.horizon > 0.0:
        raise ConfigError("[simulation] horizon must be positive")
    if not 0.0 <= simulation.warmup_fraction < 0.5:
        raise ConfigError("[simulation] warmup_fraction must lie in [0, 0.5)")
    if simulation.replications < 1:
        raise ConfigError("[simulation] replications must be at least 1")
    if simulation.master_seed < 0:
        raise ConfigError("[simulation] master_seed must be nonnegative")

    sch_t = tables["scheduler"]
    variant = sch_t["variant"].strip()
    if variant not in SCHEDULER_NAMES:
        raise ConfigError(
            f"[scheduler] unknown variant {variant!r}; "
            f"expected one of {', '.join(SCHEDULER_NAMES)}"
        )
    alpha_raw = _optional(sch_t["alpha"])
    alpha = None if alpha_raw is None else _as_float("scheduler", "alpha", alpha_raw)
    if alpha is not None and variant != "proposed":
        raise ConfigError("[scheduler] alpha applies only to the proposed variant")
    if alpha is not None and not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"[scheduler] alpha must lie in [0, 1], got {alpha}")
    w1_raw, w2_raw = _optional(sch_t["weight1"]), _optional(sch_t["weight2"])
    if (w1_raw is None) != (w2_raw is None):
        raise ConfigError("[scheduler] weight1 and weight2 must be set together")
    weight1 = None if w1_raw is None else _as_int("scheduler", "weight1", w1_raw)
    weight2 = None if w2_raw is None else _as_int("scheduler", "weight2", w2_raw)
    if weight1 is not None and variant != "wrr":
        raise ConfigError("[scheduler] weights apply only to the wrr variant")
    if weight1 is not None and (weight1 < 1 or weight2 < 1):
        raise ConfigError("[scheduler] weights must be positive integers")
    switching = sch_t["switching"].strip()
    if switching not in ("per_busy_period", "cycle"):
        raise ConfigError(
            f"[scheduler] switching must be per_busy_period or cycle, got {switching!r}"
        )
    cycle_raw = _optional(sch_t["cycle"])
    cycle = None if cycle_raw is None else _as_float("scheduler", "cycle", cycle_raw)
    if switching == "cycle" and (cycle is None or not cycle > 0.0):
        raise ConfigError("[scheduler] cycle switching needs a positive cycle length")
    if switching != "cycle" and cycle is not None:
        raise ConfigError("[scheduler] cycle applies only when switching = cycle")
    scheduler = SchedulerSettings(
        variant=variant,
        alpha=alpha,
        weight1=weight1,
        weight2=weight2,
        switching=switching,
        cycle=cycle,
    )

    sw_t = tables["sweep"]
    names = tuple(
        s.strip() for s in sw_t["schedulers"].split(",") if s.strip()
    )
    unknown = [s for s in names if s not in SCHEDULER_NAMES]
    if unknown:
        raise ConfigError(f"[sweep] unknown schedulers: {', '.join(unknown)}")
    if not names:
        raise ConfigError("[sweep] schedulers must not be empty")
    sweep = SweepSettings(
        lambda2_start=_as_float("sweep", "lambda2_start", sw_t["lambda2_start"]),
        lambda2_stop=_as_float("sweep", "lambda2_stop", sw_t["lambda2_stop"]),
        lambda2_step=_as_float("sweep", "lambda2_step", sw_t["lambda2_step"]),
        fine_grid=_as_bool("sweep", "fine_grid", sw_t["fine_grid"]),
        schedulers=names,
    )
    if sweep.lambda2_start < 0.0:
        raise ConfigError("[sweep] lambda2_start must be nonnegative")
    if sweep.lambda2_stop < sweep.lambda2_start:
        raise ConfigError("[sweep] lambda2_stop must be at least lambda2_start")
    if not sweep.lambda2_step > 0.0:
        raise ConfigError("[sweep] lambda2_step must be positive")

    return AppConfig(
        system=system, simulation=simulation, scheduler=scheduler, sweep=sweep
    )


def parse_config(text: str | None, overrides: Iterable[str] = ()) -> AppConfig:
    """Parse config text (None for pure defaults) plus override strings."""
    return _build(_merged_tables(text, overrides))


def load_config(path: str | Path | None, overrides: Iterable[str] = ()) -> AppConfig:
    """Load a config file; ``None`` gives the built-in defaults."""
    if path is None:
        return parse_config(None, overrides)
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, overrides)


def serialize_config(cfg: AppConfig) -> str:
    """Render a config back to INI text that parses to an equal value."""
    def fmt(value: float | int | str | None) -> str:
        if value is None:
            return ""
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            return repr(value)
        return str(value)

    sys_cfg = cfg.system
    lines = [
        "[system]",
        f"r = {fmt(sys_cfg.server_rate)}",
        "",
    ]
    for name, k in (("class1", sys_cfg.class1), ("class2", sys_cfg.class2)):
        lines += [
            f"[{name}]",
            f"lambda = {fmt(k.arrival_rate)}",
            f"size = {fmt(k.packet_size)}",
            f"a = {fmt(k.curve.steepness)}",
            f"b = {fmt(k.curve.inflection)}",
            f"beta = {fmt(k.weight)}",
            "",
        ]
    sim = cfg.simulation
    lines += [
        "[simulation]",
        f"horizon = {fmt(sim.horizon)}",
        f"warmup_fraction = {fmt(sim.warmup_fraction)}",
        f"replications = {fmt(sim.replications)}",
        f"master_seed = {fmt(sim.master_seed)}",
        "",
    ]
    s = cfg.scheduler
    lines += [
        "[scheduler]",
        f"variant = {s.variant}",
        f"alpha = {fmt(s.alpha)}",
        f"weight1 = {fmt(s.weight1)}",
        f"weight2 = {fmt(s.weight2)}",
        f"switching = {s.switching}",
        f"cycle = {fmt(s.cycle)}",
        "",
    ]
    sw = cfg.sweep
    lines += [
        "[sweep]",
        f"lambda2_start = {fmt(sw.lambda2_start)}",
        f"lambda2_stop = {fmt(sw.lambda2_stop)}",
        f"lambda2_step = {fmt(sw.lambda2_step)}",
        f"fine_grid = {fmt(sw.fine_grid)}",
        f"schedulers = {', '.join(sw.schedulers)}",
        "",
    ]
    return "\n".join(lines)


def default_config_text() -> str:
    """INI text of the built-in defaults."""
    return serialize_config(parse_config(None))
