"""Scheduling policies for the two-class simulator.

Each policy is an immutable parameter object that mints a small mutable
state for one simulation run.  The engine asks three questions:

* ``choose``: which nonempty class to serve next, given queue lengths and
  queued work;
* ``preempt_target``: which class (if any) may interrupt the packet in
  service the moment it has work waiting;
* ``next_switch`` / ``handle_switch``: when the policy wants a timer event
  (only the fixed-cycle time-share uses one).

``begin_busy_period`` fires whenever an arrival finds the system empty,
which is where the randomized time-share redraws its priority regime.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .traffic import SystemConfig

__all__ = [
    "Policy",
    "PriorityTo",
    "TimeShared",
    "WeightedRoundRobin",
    "MaxWeight",
    "FairAlternation",
    "QueueSnapshot",
    "select",
    "wrr_weights",
    "WRR_WEIGHT_FLOOR",
]

# smallest acceptable integer weight after scaling; keeps rounding error of
# the weight ratio under a couple of percent
WRR_WEIGHT_FLOOR = 40


def _other(cls: int) -> int:
    return 3 - cls


@dataclass(frozen=True)
class QueueSnapshot:
    """What a policy may look at when picking the next packet.

    Attributes:
        queued1: Class-1 packets waiting (not counting one in service).
        queued2: Class-2 packets waiting.
        backlog1: Queued class-1 work in bits.
        backlog2: Queued class-2 work in bits.
        now: Simulation clock in seconds.
    """

    queued1: int
    queued2: int
    backlog1: float
    backlog2: float
    now: float


class Policy(Protocol):
    """Scheduling policy interface consumed by the engine."""

    name: str

    def fresh_state(self, rng: np.random.Generator) -> object: ...

    def choose(
        self, state: object, n1: int, n2: int, work1: float, work2: float
    ) -> int: ...

    def preempt_target(self, state: object) -> int: ...

    def begin_busy_period(
        self, state: object, rng: np.random.Generator, now: float
    ) -> None: ...

    def note_service_start(self, state: object, cls: int) -> None: ...

    def next_switch(self, state: object) -> float: ...

    def handle_switch(self, state: object, now: float) -> None: ...

    def current_regime(self, state: object) -> int: ...


class _StatelessMixin:
    """Defaults for policies that need no per-run state or timers."""

    def fresh_state(self, rng: np.random.Generator) -> object:
        return None

    def begin_busy_period(
        self, state: object, rng: np.random.Generator, now: float
    ) -> None:
        return None

    def note_service_start(self, state: object, cls: int) -> None:
        return None

    def next_switch(self, state: object) -> float:
        return math.inf

    def handle_switch(self, state: object, now: float) -> None:
        raise RuntimeError("policy scheduled no switch")

    def current_regime(self, state: object) -> int:
        return 0


@dataclass(frozen=True)
class PriorityTo(_StatelessMixin):
    """Preempt-resume static priority for one class.

    Attributes:
        cls: The class holding priority, 1 or 2.
    """

    cls: int

    def __post_init__(self) -> None:
        if self.cls not in (1, 2):
            raise ValueError(f"priority class must be 1 or 2, got {self.cls}")

    @property
    def name(self) -> str:
        return f"priority{self.cls}"

    def choose(self, state, n1, n2, work1, work2) -> int:
        favored = n1 if self.cls == 1 else n2
        return self.cls if favored > 0 else _other(self.cls)

    def preempt_target(self, state) -> int:
        return self.cls


@dataclass
class _TimeShareState:
    regime: int
    boundary: float = math.inf


@dataclass(frozen=True)
class TimeShared:
    """Time-shared preempt-resume priority.

    In ``per_busy_period`` mode (the default) each busy period runs entirely
    under one regime, drawn Bernoulli(alpha) in favor of class 1 when an
    arrival finds the system empty.  Because busy-period boundaries are the
    same for every work-conserving policy, the long-run fraction of busy
    periods, and hence of delays, governed by each regime is exactly alpha.

    In ``cycle`` mode the regime instead follows a fixed clock: class 1
    holds priority for alpha * cycle seconds, class 2 for the remainder.

    Attributes:
        alpha: Fraction of time class 1 holds priority, in [0, 1].
        mode: "per_busy_period" or "cycle".
        cycle: Cycle length in seconds, required in cycle mode.
    """

    alpha: float
    mode: str = "per_busy_period"
    cycle: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.mode not in ("per_busy_period", "cycle"):
            raise ValueError(f"unknown time-share mode {self.mode!r}")
        if self.mode == "cycle" and not (self.cycle and self.cycle > 0.0):
            raise ValueError("cycle mode needs a positive cycle length")

    @property
    def name(self) -> str:
        return "proposed"

    def fresh_state(self, rng: np.random.Generator) -> _TimeShareState:
        if self.mode == "cycle":
            # regime 1 occupies [0, alpha*cycle) of every cycle
            if self.alpha >= 1.0:
                return _TimeShareState(regime=1)
            if self.alpha <= 0.0:
                return _TimeShareState(regime=2)
            return _TimeShareState(regime=1, boundary=self.alpha * self.cycle)
        return _TimeShareState(regime=1 if rng.random() < self.alpha else 2)

    def choose(self, state: _TimeShareState, n1, n2, work1, work2) -> int:
        favored = n1 if state.regime == 1 else n2
        return state.regime if favored > 0 else _other(state.regime)

    def preempt_target(self, state: _TimeShareState) -> int:
        return state.regime

    def begin_busy_period(self, state: _TimeShareState, rng, now) -> None:
        if self.mode == "per_busy_period":
            state.regime = 1 if rng.random() < self.alpha else 2

    def note_service_start(self, state, cls) -> None:
        return None

    def next_switch(self, state: _TimeShareState) -> float:
        return state.boundary

    def handle_switch(self, state: _TimeShareState, now: float) -> None:
        assert self.cycle is not None
        cycle_start = math.floor(now / self.cycle + 1e-9) * self.cycle
        if state.regime == 1:
            state.regime = 2
            state.boundary = cycle_start + self.cycle
        else:
            state.regime = 1
            state.boundary = cycle_start + self.alpha * self.cycle

    def current_regime(self, state: _TimeShareState) -> int:
        return state.regime


@dataclass
class _RoundRobinState:
    turn: int
    credit: int


@dataclass(frozen=True)
class WeightedRoundRobin(_StatelessMixin):
    """Non-preemptive weighted round robin.

    Serves up to ``weight1`` class-1 packets, then up to ``weight2`` class-2
    packets, skipping a class whose queue empties and forfeiting the rest of
    its quantum.

    Attributes:
        weight1: Packets per round for class 1, positive.
        weight2: Packets per round for class 2, positive.
    """

    weight1: int
    weight2: int

    def __post_init__(self) -> None:
        if self.weight1 < 1 or self.weight2 < 1:
            raise ValueError(
                f"weights must be positive integers, got ({self.weight1}, {self.weight2})"
            )

    @property
    def name(self) -> str:
        return "wrr"

    def fresh_state(self, rng: np.random.Generator) -> _RoundRobinState:
        return _RoundRobinState(turn=1, credit=self.weight1)

    def _hand_over(self, state: _RoundRobinState) -> None:
        state.turn = _other(state.turn)
        state.credit = self.weight1 if state.turn == 1 else self.weight2

    def choose(self, state: _RoundRobinState, n1, n2, work1, work2) -> int:
        counts = (n1, n2)
        if state.credit <= 0 or counts[state.turn - 1] == 0:
            self._hand_over(state)
        if counts[state.turn - 1] == 0:
            self._hand_over(state)
        return state.turn

    def preempt_target(self, state) -> int:
        return 0

    def note_service_start(self, state: _RoundRobinState, cls: int) -> None:
        state.credit -= 1


@dataclass(frozen=True)
class MaxWeight(_StatelessMixin):
    """Non-preemptive largest-backlog-first, ties to class 1."""

    @property
    def name(self) -> str:
        return "maxweight"

    def choose(self, state, n1, n2, work1, work2) -> int:
        return 1 if work1 >= work2 else 2

    def preempt_target(self, state) -> int:
        return 0


@dataclass
class _AlternationState:
    last: int = 2


@dataclass(frozen=True)
class FairAlternation(_StatelessMixin):
    """Non-preemptive strict alternation between nonempty classes."""

    @property
    def name(self) -> str:
        return "fair"

    def fresh_state(self, rng: np.random.Generator) -> _AlternationState:
        return _AlternationState()

    def choose(self, state: _AlternationState, n1, n2, work1, work2) -> int:
        preferred = _other(state.last)
        counts = (n1, n2)
        return preferred if counts[preferred - 1] > 0 else state.last

    def preempt_target(self, state) -> int:
        return 0

    def note_service_start(self, state: _AlternationState, cls: int) -> None:
        state.last = cls


def select(policy: Policy, state: object, snap: QueueSnapshot) -> int:
    """Pick the class to serve for a queue snapshot with work waiting."""
    if snap.queued1 + snap.queued2 <= 0:
        raise ValueError("select needs at least one queued packet")
    return policy.choose(state, snap.queued1, snap.queued2, snap.backlog1, snap.backlog2)


def wrr_weights(
    cfg: SystemConfig, floor: int = WRR_WEIGHT_FLOOR
) -> tuple[int, int]:
    """Integer round-robin weights tuned to the utility curves.

    Each class gets raw weight 1 / ((b_i + 4/a_i) * s_i): classes that
    tolerate less latency before their sigmoid collapses, or carry smaller
    packets, deserve more service turns.  The raws are scaled by the
    smallest power of ten that lifts the minimum to ``floor`` and rounded
    to integers, keeping the ratio faithful at modest magnitudes.

    Args:
        cfg: System parameters.
        floor: Minimum scaled weight before rounding.

    Returns:
        (weight1, weight2) as positive integers.
    """
    if floor < 1:
        raise ValueError(f"floor must be positive, got {floor}")
    raws = []
    for i in (1, 2):
        k = cfg.klass(i)
        span = k.curve.inflection + 4.0 / k.curve.steepness
        raws.append(1.0 / (span * k.packet_size))
    exponent = math.ceil(math.log10(floor / min(raws)))
    # guard the ceil against log10 rounding at exact powers of ten
    while 10.0**exponent * min(raws) < floor:
        exponent += 1
    while 10.0 ** (exponent - 1) * min(raws) >= floor:
        exponent -= 1
    scale = 10.0**exponent
    return round(scale * raws[0]), round(scale * raws[1])
