"""Optimal priority split between two traffic classes.

The control knob is alpha, the fraction of busy periods during which class 1
holds preemptive priority.  The objective is the weighted geometric mean of
the class utilities, maximized through its log:

    Z(alpha) = w1 * log u1(l1(alpha)) + w2 * log u2(l2(alpha))

with l1, l2 affine in alpha.  log u_i is concave in latency on the operating
range and each l_i is affine, so Z is concave and the maximizer is either an
endpoint or the unique root of Z'.  Z'(alpha) = 0 rearranges into

    g(alpha) = phi21 * exp(alpha * phi22) - phi11 * exp(alpha * phi12) + phi

which shares its sign with Z' and is cheap to bisect.  The solver clamps to
an endpoint when Z' does not change sign on [0, 1] and bisects g otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .mg1 import BlendedDelays, PriorityDelayTable, blended_delay, delay_table
from .traffic import SystemConfig, _safe_exp

__all__ = [
    "AlphaSolution",
    "OptimalityConstants",
    "DegenerateGapError",
    "NumericalInconsistencyError",
    "log_system_utility",
    "z_prime",
    "optimality_constants",
    "solve_alpha",
]

DEFAULT_TOL = 1e-10


class DegenerateGapError(ValueError):
    """Raised when a priority gap is zero and the root transform is undefined."""


class NumericalInconsistencyError(ArithmeticError):
    """Raised when the root transform disagrees in sign with the derivative."""


def log_system_utility(
    cfg: SystemConfig, alpha: float, table: PriorityDelayTable | None = None
) -> float:
    """Weighted log-utility objective Z(alpha) for a stable system."""
    d = blended_delay(cfg, alpha, table)
    return cfg.class1.weight * cfg.class1.curve.log_utility(
        d.l1
    ) + cfg.class2.weight * cfg.class2.curve.log_utility(d.l2)


def z_prime(
    cfg: SystemConfig, alpha: float, table: PriorityDelayTable | None = None
) -> float:
    """Derivative of the objective in alpha.

    Chain rule: Z' = sum_i w_i * (dl_i/dalpha) * dlog(u_i)/dl.  Raising alpha
    shortens class-1 delays (dl1/dalpha < 0) and lengthens class-2 delays, so
    the two terms pull in opposite directions.
    """
    t = table if table is not None else delay_table(cfg)
    d = blended_delay(cfg, alpha, t)
    slope1 = cfg.class1.curve.log_utility_slope(d.l1)
    slope2 = cfg.class2.curve.log_utility_slope(d.l2)
    return cfg.class1.weight * (t.l11 - t.l12) * slope1 + cfg.class2.weight * (
        t.l21 - t.l22
    ) * slope2


@dataclass(frozen=True)
class OptimalityConstants:
    """Coefficients of the sign-equivalent root function g.

    g(alpha) = phi21 * exp(alpha * phi22) - phi11 * exp(alpha * phi12) + phi,
    with theta the ratio of the weighted marginal stakes of the two classes
    and phi = theta - 1.  ``log_phi21`` and ``log_phi11`` carry the exact
    logs so g can be evaluated without overflowing the plain coefficients.
    """

    theta: float
    phi: float
    phi11: float
    phi12: float
    phi21: float
    phi22: float
    log_phi11: float
    log_phi21: float

    def g(self, alpha: float) -> float:
        """Evaluate g(alpha); shares its sign with Z'(alpha)."""
        # exponent-sum form: never multiplies two already-huge factors
        return (
            _safe_exp(self.log_phi21 + alpha * self.phi22)
            - _safe_exp(self.log_phi11 + alpha * self.phi12)
            + self.phi
        )


def optimality_constants(
    cfg: SystemConfig, table: PriorityDelayTable | None = None
) -> OptimalityConstants:
    """Constants of g for a stable system.

    Raises:
        DegenerateGapError: If the class-2 priority gap l21 - l22 is not
            positive (no class-1 traffic), which makes theta undefined.
    """
    t = table if table is not None else delay_table(cfg)
    gap1 = t.l12 - t.l11
    gap2 = t.l21 - t.l22
    if gap2 <= 0.0:
        raise DegenerateGapError(
            f"class-2 priority gap must be positive, got {gap2}; "
            "the stake ratio theta is undefined"
        )
    if gap1 < 0.0:
        raise DegenerateGapError(f"class-1 priority gap must not be negative, got {gap1}")
    a1, b1 = cfg.class1.curve.steepness, cfg.class1.curve.inflection
    a2, b2 = cfg.class2.curve.steepness, cfg.class2.curve.inflection
    stake1 = cfg.class1.weight * a1 * gap1
    stake2 = cfg.class2.weight * a2 * gap2
    theta = stake1 / stake2
    log_theta = math.log(stake1) - math.log(stake2) if stake1 > 0.0 else -math.inf
    log_phi11 = a1 * (b1 - t.l12)
    log_phi21 = log_theta + a2 * (b2 - t.l22)
    return OptimalityConstants(
        theta=theta,
        phi=theta - 1.0,
        phi11=_safe_exp(log_phi11),
        phi12=a1 * gap1,
        phi21=_safe_exp(log_phi21),
        phi22=a2 * (t.l22 - t.l21),
        log_phi11=log_phi11,
        log_phi21=log_phi21,
    )


@dataclass(frozen=True)
class AlphaSolution:
    """Result of :func:`solve_alpha`.

    Attributes:
        alpha: Maximizing priority split in [0, 1].
        method: "clamp" when Z' kept one sign on [0, 1], "endpoint" when an
            endpoint was an exact stationary point, "bisect" otherwise.
        z_prime_at_0: Z'(0), the marginal value of nudging alpha up from 0.
        z_prime_at_1: Z'(1).
        iterations: Bisection steps taken (0 for clamp and endpoint).
        delays: Blended mean delays at the optimum.
        log_utility: Objective value Z(alpha*).
    """

    alpha: float
    method: str
    z_prime_at_0: float
    z_prime_at_1: float
    iterations: int
    delays: BlendedDelays
    log_utility: float


def solve_alpha(
    cfg: SystemConfig,
    tol: float = DEFAULT_TOL,
    table: PriorityDelayTable | None = None,
) -> AlphaSolution:
    """Maximize the weighted log-utility over the priority split.

    Z is concave, so Z' is nonincreasing: when Z' keeps one sign the optimum
    clamps to an endpoint, otherwise the sign change brackets the unique
    stationary point and bisection on g pins it to width ``tol``.

    Args:
        cfg: System parameters; must be stable.
        tol: Final bracket width for the interior root.
        table: Optional precomputed delay table to reuse.

    Raises:
        UnstableSystemError: If total utilization is >= 1.
        NumericalInconsistencyError: If g's endpoint signs contradict Z''s.
    """
    if not tol > 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    t = table if table is not None else delay_table(cfg)
    z0 = z_prime(cfg, 0.0, t)
    z1 = z_prime(cfg, 1.0, t)

    def _solution(alpha: float, method: str, iterations: int) -> AlphaSolution:
        return AlphaSolution(
            alpha=alpha,
            method=method,
            z_prime_at_0=z0,
            z_prime_at_1=z1,
            iterations=iterations,
            delays=blended_delay(cfg, alpha, t),
            log_utility=log_system_utility(cfg, alpha, t),
        )

    if z0 * z1 > 0.0:
        # one-signed derivative: objective is monotone on [0, 1]
        return _solution(1.0 if z0 > 0.0 else 0.0, "clamp", 0)
    if z0 == 0.0 or z1 == 0.0:
        # an endpoint is itself the stationary point
        return _solution(0.0 if z0 == 0.0 else 1.0, "endpoint", 0)

    consts = optimality_constants(cfg, t)
    g_lo, g_hi = consts.g(0.0), consts.g(1.0)
    if not (g_lo > 0.0 > g_hi):
        raise NumericalInconsistencyError(
            f"g endpoint signs ({g_lo:.3g}, {g_hi:.3g}) contradict "
            f"Z' signs ({z0:.3g}, {z1:.3g})"
        )
    lo, hi = 0.0, 1.0
    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if consts.g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        iterations += 1
    return _solution(0.5 * (lo + hi), "bisect", iterations)
