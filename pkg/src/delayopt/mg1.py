"""Closed-form mean delays for a two-class preempt-resume priority queue.

Arrivals are Poisson, the server is work conserving, and the high-priority
class preempts with resume (no work is lost).  For that discipline the mean
sojourn time of each class has an exact M/G/1-style form built from the mean
residual work the server owes ahead of a new arrival:

* priority class i, alone at the top: l_ii = (R_ii + (1 - rho_i)/mu_i) / (1 - rho_i)
* deprioritized class i under j:      l_ij = (R_ij + (1 - rho_1 - rho_2)/mu_i)
                                              / ((1 - rho_j) * (1 - rho_1 - rho_2))

with residuals R_ii = lambda_i E[X_i^2] / 2 and, for the low class, the
residual of all work R_ij = (lambda_1 E[X_1^2] + lambda_2 E[X_2^2]) / 2,
X_i being the service time of class i.

Time sharing randomizes which class holds priority per busy period: class 1
holds it a fraction alpha of busy periods, class 2 the rest.  Because busy
periods are identical for every work-conserving discipline, each class sees
a plain mixture of its two pure-priority delays:

    blended l_1 = alpha * l11 + (1 - alpha) * l12
    blended l_2 = alpha * l21 + (1 - alpha) * l22
"""
from __future__ import annotations

from dataclasses import dataclass

from .traffic import SystemConfig

__all__ = [
    "PriorityDelayTable",
    "BlendedDelays",
    "residual_work",
    "priority_delay",
    "delay_table",
    "blended_delay",
]


@dataclass(frozen=True)
class PriorityDelayTable:
    """Mean sojourn times (seconds) under both pure priority orders.

    Attributes:
        l11: Class 1 delay when class 1 has priority.
        l12: Class 1 delay when class 2 has priority.
        l21: Class 2 delay when class 1 has priority.
        l22: Class 2 delay when class 2 has priority.
    """

    l11: float
    l12: float
    l21: float
    l22: float

    def for_class(self, index: int) -> tuple[float, float]:
        """(delay when prioritized, delay when deprioritized) for a class."""
        if index == 1:
            return self.l11, self.l12
        if index == 2:
            return self.l22, self.l21
        raise ValueError(f"class index must be 1 or 2, got {index}")


@dataclass(frozen=True)
class BlendedDelays:
    """Mean sojourn times under time sharing with a given alpha."""

    alpha: float
    l1: float
    l2: float


def residual_work(cfg: SystemConfig, cls: int, prioritized: bool) -> float:
    """Mean residual work R_ij ahead of a class-``cls`` arrival, in seconds.

    A prioritized arrival only waits out residual work of its own class;
    a deprioritized one waits out the residual of all in-progress work.

    Args:
        cfg: System parameters.
        cls: 1-based class index of the arriving packet.
        prioritized: Whether that class currently holds priority.
    """
    if prioritized:
        k = cfg.klass(cls)
        return k.arrival_rate * cfg.service_second_moment(cls) / 2.0
    return (
        cfg.class1.arrival_rate * cfg.service_second_moment(1)
        + cfg.class2.arrival_rate * cfg.service_second_moment(2)
    ) / 2.0


def priority_delay(cfg: SystemConfig, cls: int, priority_class: int) -> float:
    """Mean sojourn time l_ij of class ``cls`` when ``priority_class`` is on top.

    Raises:
        UnstableSystemError: If total utilization is >= 1.
    """
    cfg.require_stable()
    rho_own = cfg.utilization(cls)
    rho_total = cfg.total_utilization
    if cls == priority_class:
        r = residual_work(cfg, cls, prioritized=True)
        return (r + (1.0 - rho_own) * cfg.mean_service_time(cls)) / (1.0 - rho_own)
    rho_prio = cfg.utilization(priority_class)
    slack = 1.0 - rho_total
    r = residual_work(cfg, cls, prioritized=False)
    return (r + slack * cfg.mean_service_time(cls)) / ((1.0 - rho_prio) * slack)


def delay_table(cfg: SystemConfig) -> PriorityDelayTable:
    """All four pure-priority mean sojourn times for a stable system."""
    return PriorityDelayTable(
        l11=priority_delay(cfg, 1, 1),
        l12=priority_delay(cfg, 1, 2),
        l21=priority_delay(cfg, 2, 1),
        l22=priority_delay(cfg, 2, 2),
    )


def blended_delay(
    cfg: SystemConfig, alpha: float, table: PriorityDelayTable | None = None
) -> BlendedDelays:
    """Mean delays when class 1 holds priority a fraction ``alpha`` of time.

    Args:
        cfg: System parameters.
        alpha: Fraction of busy periods run with class 1 prioritized, in [0, 1].
        table: Optional precomputed :func:`delay_table` to reuse.

    Raises:
        ValueError: If alpha lies outside [0, 1].
        UnstableSystemError: If total utilization is >= 1.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    t = table if table is not None else delay_table(cfg)
    return BlendedDelays(
        alpha=alpha,
        l1=alpha * t.l11 + (1.0 - alpha) * t.l12,
        l2=alpha * t.l21 + (1.0 - alpha) * t.l22,
    )
